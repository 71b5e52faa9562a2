//! Repeated train/test experiments, unprojected comparators and the
//! large-`B1` diagnostics.
//!
//! Every repetition draws its own training and test sets from a seed derived
//! from the master seed and the repetition index. All methods in a
//! repetition see the same two sets, and each method's randomness is derived
//! from the repetition seed and the method's own configured seed, never from
//! its position in the method list.

use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::{fit_knn, fit_lda, fit_qda, knn, Classify};
use crate::data::{Dataset, Label};
use crate::datagen::{Estimate, LabelledSample, ModelSpec, Welford};
use crate::ensemble::{AlphaRule, EnsembleConfig, EnsembleModel};
use crate::error::{Error, Result};
use crate::seed::{self, tag};

/// Where each repetition's data comes from.
#[derive(Clone, Debug)]
pub enum DataSource {
    Model(ModelSpec),
    /// A fixed dataset: each repetition draws `n_train` points without
    /// replacement for training and tests on the remainder.
    Table(Dataset),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodSpec {
    Ensemble(EnsembleConfig),
    /// LDA on all `p` features.
    Lda,
    /// QDA on all `p` features.
    Qda,
    /// kNN on all `p` features; `k = None` picks `k` by leave-one-out.
    Knn { k: Option<usize> },
    /// Always predicts the given class.
    Constant { label: Label },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Method {
    pub id: String,
    pub spec: MethodSpec,
}

impl Method {
    pub fn new(id: impl Into<String>, spec: MethodSpec) -> Method {
        Method { id: id.into(), spec }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub source: DataSource,
    pub n_train: usize,
    /// Ignored for [`DataSource::Table`], which tests on the remainder.
    pub n_test: usize,
    pub repetitions: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods".into()));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].iter().any(|o| o.id == m.id) {
                return Err(Error::Config(format!("duplicate method id {:?}", m.id)));
            }
        }
        if self.n_train < 2 {
            return Err(Error::Config("n_train must be at least 2".into()));
        }
        match &self.source {
            DataSource::Model(_) if self.n_test == 0 => {
                Err(Error::Config("n_test must be at least 1".into()))
            }
            DataSource::Table(d) if self.n_train >= d.n() => Err(Error::Config(format!(
                "n_train = {} leaves no test points out of {}",
                self.n_train,
                d.n()
            ))),
            _ => Ok(()),
        }
    }
}

/// Per-repetition test errors; `None` marks a method that was not available
/// on that repetition's training set.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub methods: Vec<String>,
    /// `errors[method][repetition]`.
    pub errors: Vec<Vec<Option<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method: String,
    /// Mean test error ×100 over the available repetitions.
    pub mean: f64,
    /// Standard error ×100: sample standard deviation over `√reps`.
    pub se: f64,
    pub reps: usize,
}

impl Summary {
    pub fn of(method: &str, errors: &[Option<f64>]) -> Summary {
        let mut w = Welford::default();
        for e in errors.iter().flatten() {
            w.push(*e);
        }
        let est = w.estimate();
        Summary {
            method: method.to_string(),
            mean: if est.n == 0 { f64::NAN } else { 100.0 * est.mean },
            se: if est.n == 0 { f64::NAN } else { 100.0 * est.se },
            reps: est.n,
        }
    }

    /// `mean_{se}` with two decimals, or `N/A`.
    pub fn cell(&self) -> String {
        if self.reps == 0 {
            "N/A".into()
        } else {
            format!("{:.2}_{{{:.2}}}", self.mean, self.se)
        }
    }
}

impl ExperimentResult {
    pub fn summaries(&self) -> Vec<Summary> {
        self.methods
            .iter()
            .zip(&self.errors)
            .map(|(m, e)| Summary::of(m, e))
            .collect()
    }

    pub fn method_errors(&self, id: &str) -> Option<&[Option<f64>]> {
        let i = self.methods.iter().position(|m| m == id)?;
        Some(&self.errors[i])
    }

    /// One row per method and repetition: `method,repetition,error`, with
    /// an empty error for unavailable methods.
    pub fn write_records<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["method", "repetition", "error"])?;
        for (m, errs) in self.methods.iter().zip(&self.errors) {
            for (r, e) in errs.iter().enumerate() {
                let e = e.map(|v| format!("{v:?}")).unwrap_or_default();
                wtr.write_record([m.as_str(), &r.to_string(), &e])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_summary<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["method", "mean_x100", "se_x100", "reps", "cell"])?;
        for s in self.summaries() {
            wtr.write_record([
                s.method.clone(),
                format!("{:.4}", s.mean),
                format!("{:.4}", s.se),
                s.reps.to_string(),
                s.cell(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Repetition `rep`'s training and test sets.
pub fn draw_repetition(spec: &ExperimentSpec, rep: usize) -> Result<(Dataset, Dataset)> {
    let s = seed::derive(spec.seed, &[tag::REPLICATE, rep as u64]);
    match &spec.source {
        DataSource::Model(m) => Ok((
            m.sample(spec.n_train, &mut seed::rng(seed::child(s, tag::TRAIN)))
                .into_dataset(),
            m.sample(spec.n_test, &mut seed::rng(seed::child(s, tag::TEST)))
                .into_dataset(),
        )),
        DataSource::Table(d) => {
            let mut idx: Vec<usize> = (0..d.n()).collect();
            idx.shuffle(&mut seed::rng(seed::child(s, tag::SUBSAMPLE)));
            let (train, test) = idx.split_at(spec.n_train);
            Ok((d.subset(train), d.subset(test)))
        }
    }
}

fn error_rate(pred: impl Iterator<Item = Label>, truth: &[Label]) -> f64 {
    let wrong = pred.zip(truth).filter(|(p, t)| p != *t).count();
    wrong as f64 / truth.len() as f64
}

fn model_error<M: Classify>(m: &M, test: &Dataset) -> f64 {
    error_rate((0..test.n()).map(|i| m.predict(&test.point(i))), test.y())
}

/// Tie seed for the unprojected kNN comparator.
const COMPARATOR_TIES: u64 = 0x6b6e_6e;

/// Test error of one method, or `None` when it cannot be fitted.
pub fn evaluate_method(
    method: &MethodSpec,
    train: &Dataset,
    test: &Dataset,
    rep_seed: u64,
) -> Result<Option<f64>> {
    let p = train.p();
    let [n1, n2] = train.class_counts();
    let unavailable = |why: &str| {
        log::info!("{why}");
        Ok(None)
    };
    match method {
        MethodSpec::Constant { label } => {
            Ok(Some(error_rate(std::iter::repeat(*label).take(test.n()), test.y())))
        }
        MethodSpec::Lda => {
            if train.n() <= p + 2 || n1 == 0 || n2 == 0 {
                return unavailable("unprojected LDA not available: n <= p + 2");
            }
            match fit_lda(train) {
                Ok(m) => Ok(Some(model_error(&m, test))),
                Err(e) if e.is_numerical() => unavailable("unprojected LDA: singular covariance"),
                Err(e) => Err(e),
            }
        }
        MethodSpec::Qda => {
            if n1.min(n2) <= p + 1 {
                return unavailable("unprojected QDA not available: min(n1, n2) <= p + 1");
            }
            match fit_qda(train) {
                Ok(m) => Ok(Some(model_error(&m, test))),
                Err(e) if e.is_numerical() => unavailable("unprojected QDA: singular covariance"),
                Err(e) => Err(e),
            }
        }
        MethodSpec::Knn { k } => {
            let k = match k {
                Some(k) => *k,
                None => comparator_knn_cv(train, COMPARATOR_TIES)?,
            };
            let m = fit_knn(train, k, COMPARATOR_TIES)?;
            Ok(Some(model_error(&m, test)))
        }
        MethodSpec::Ensemble(cfg) => {
            let mut cfg = *cfg;
            cfg.seed = seed::derive(rep_seed, &[tag::METHOD, cfg.seed]);
            match EnsembleModel::fit(train, &cfg) {
                Ok(m) => Ok(Some(m.test_error(test)?)),
                Err(e) if e.is_numerical() || matches!(e, Error::MissingClass(_)) => {
                    log::warn!("ensemble failed: {e}");
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        }
    }
}

/// Runs every method on every repetition. Repetitions run in parallel.
pub fn run(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let per_rep: Vec<Vec<Option<f64>>> = (0..spec.repetitions)
        .into_par_iter()
        .map(|rep| {
            let (train, test) = draw_repetition(spec, rep)?;
            let rep_seed = seed::derive(spec.seed, &[tag::REPLICATE, rep as u64]);
            let errs = spec
                .methods
                .iter()
                .map(|m| {
                    evaluate_method(&m.spec, &train, &test, rep_seed).map_err(|e| {
                        Error::Data(format!("repetition {rep}, method {}: {e}", m.id))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if errs.iter().all(Option::is_none) {
                return Err(Error::Data(format!(
                    "repetition {rep}: no method could be fitted"
                )));
            }
            Ok(errs)
        })
        .collect::<Result<_>>()?;
    let errors = (0..spec.methods.len())
        .map(|j| per_rep.iter().map(|r| r[j]).collect())
        .collect();
    Ok(ExperimentResult {
        methods: spec.methods.iter().map(|m| m.id.clone()).collect(),
        errors,
    })
}

/// `k` for the unprojected kNN comparator: the odd `k ≤ min(25, n - 1)`
/// with the smallest leave-one-out error, smallest `k` on ties.
pub fn comparator_knn_cv(train: &Dataset, tie_seed: u64) -> Result<usize> {
    let n = train.n();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, found: n });
    }
    let top = 25.min(n - 1);
    let mut best = (usize::MAX, 1);
    for k in (1..=top).step_by(2) {
        let errors = knn::loo_predictions(train, k, tie_seed)
            .into_iter()
            .zip(train.y())
            .filter(|(p, t)| p.as_ref().map_or(true, |p| p != *t))
            .count();
        if errors < best.0 {
            best = (errors, k);
        }
    }
    Ok(best.1)
}

/// Average conditional risk of `pred`: `η` weighting when the true
/// regression function is known, 0-1 loss otherwise.
fn risk(pred: &[Label], test: &LabelledSample) -> Vec<f64> {
    match &test.eta {
        Some(eta) => pred
            .iter()
            .zip(eta)
            .map(|(p, e)| if *p == Label::One { 1.0 - e } else { *e })
            .collect(),
        None => pred
            .iter()
            .zip(&test.y)
            .map(|(p, t)| if p == t { 0.0 } else { 1.0 })
            .collect(),
    }
}

fn fixed_alpha(cfg: &EnsembleConfig) -> Result<f64> {
    match cfg.alpha {
        AlphaRule::Fixed { value } => Ok(value),
        AlphaRule::DataDriven => Err(Error::Config(
            "the diagnostics need a fixed voting threshold".into(),
        )),
    }
}

fn vote_labels(members: &[Vec<Label>], range: std::ops::Range<usize>, alpha: f64) -> Vec<Label> {
    let m = members[0].len();
    let b = range.len() as f64;
    let mut counts = vec![0u32; m];
    for row in &members[range] {
        for (c, l) in counts.iter_mut().zip(row) {
            if *l == Label::One {
                *c += 1;
            }
        }
    }
    counts
        .into_iter()
        .map(|c| if c as f64 / b >= alpha { Label::One } else { Label::Two })
        .collect()
}

/// Gap between finite-`B1` and large-`B1` test error as `B1` grows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateDiagnostic {
    pub b1_grid: Vec<usize>,
    pub b1_max: usize,
    /// Mean gap `L(B1) - L(B1_max)` per grid point, and its standard error
    /// over replicates.
    pub gaps: Vec<f64>,
    pub gap_se: Vec<f64>,
    /// Least-squares slope of `log gap` on `log B1` over positive gaps, when
    /// at least three remain.
    pub slope: Option<f64>,
    pub replicates: usize,
}

impl RateDiagnostic {
    pub fn insufficient_signal(&self) -> bool {
        self.slope.is_none()
    }

    /// Largest gap in units of its standard error (0 when all are exact).
    pub fn max_gap_in_se(&self) -> f64 {
        self.gaps
            .iter()
            .zip(&self.gap_se)
            .map(|(g, s)| {
                if *s > 0.0 {
                    g.abs() / s
                } else if *g == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Least-squares slope of `y` on `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Fits `replicates` independent ensembles of `B1_max = 4 max(grid)`
/// members on the same training data. For each grid value the pool is cut
/// into disjoint sub-ensembles of that size; their mean test risk minus the
/// full pool's risk estimates `L(B1) - L(∞)`. Risks are `η`-weighted when
/// `test` carries the regression function.
pub fn theorem1_rate_diagnostic(
    train: &Dataset,
    test: &LabelledSample,
    cfg: &EnsembleConfig,
    b1_grid: &[usize],
    replicates: usize,
) -> Result<RateDiagnostic> {
    let alpha = fixed_alpha(cfg)?;
    if b1_grid.len() < 4 || b1_grid.windows(2).any(|w| w[0] >= w[1]) || b1_grid[0] == 0 {
        return Err(Error::Config("B1 grid must be ascending with at least 4 points".into()));
    }
    if replicates < 2 {
        return Err(Error::Config("need at least 2 replicates".into()));
    }
    let b1_max = 4 * b1_grid[b1_grid.len() - 1];
    let m = test.y.len() as f64;
    let per_rep: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut c = *cfg;
            c.b1 = b1_max;
            c.seed = seed::derive(cfg.seed, &[tag::REPLICATE, r as u64]);
            let model = EnsembleModel::fit(train, &c)?;
            let members = model.member_predictions(&test.x)?;
            let full = risk(&vote_labels(&members, 0..b1_max, alpha), test);
            // Differences are taken pointwise so that identical predictions
            // give a gap of exactly zero.
            Ok(b1_grid
                .iter()
                .map(|&b| {
                    let subs = b1_max / b;
                    (0..subs)
                        .map(|s| {
                            risk(&vote_labels(&members, s * b..(s + 1) * b, alpha), test)
                                .iter()
                                .zip(&full)
                                .map(|(a, f)| a - f)
                                .sum::<f64>()
                                / m
                        })
                        .sum::<f64>()
                        / subs as f64
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut gaps = Vec::with_capacity(b1_grid.len());
    let mut gap_se = Vec::with_capacity(b1_grid.len());
    for j in 0..b1_grid.len() {
        let mut w = Welford::default();
        for r in &per_rep {
            w.push(r[j]);
        }
        let e = w.estimate();
        gaps.push(e.mean);
        gap_se.push(e.se);
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = b1_grid
        .iter()
        .zip(&gaps)
        .filter(|(_, g)| **g > 0.0)
        .map(|(b, g)| ((*b as f64).ln(), g.ln()))
        .unzip();
    let slope = (lx.len() >= 3).then(|| ls_slope(&lx, &ly));
    Ok(RateDiagnostic {
        b1_grid: b1_grid.to_vec(),
        b1_max,
        gaps,
        gap_se,
        slope,
        replicates,
    })
}

/// Monte Carlo comparison of the ensemble's excess risk with the bound
/// `(1 / min(α, 1-α)) × (mean single-member excess risk)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundDiagnostic {
    pub alpha: f64,
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub bayes_risk: Estimate,
    pub holds: bool,
}

/// Trains one ensemble on `n_train` draws from `spec` and evaluates both
/// sides of the bound on `mc_n` fresh draws. Each side is the average over
/// test points of the conditional excess risk `|2η(x) - 1| 1{C(x) ≠ C_Bayes(x)}`;
/// the single-member side averages this over all `B1` selected members.
pub fn theorem2_bound_diagnostic(
    spec: &ModelSpec,
    cfg: &EnsembleConfig,
    n_train: usize,
    mc_n: usize,
) -> Result<BoundDiagnostic> {
    let alpha = fixed_alpha(cfg)?;
    if mc_n < 2 {
        return Err(Error::Config("need at least two Monte Carlo draws".into()));
    }
    let train = spec
        .sample(n_train, &mut seed::rng(seed::child(cfg.seed, tag::TRAIN)))
        .into_dataset();
    let test = spec
        .sample(mc_n, &mut seed::rng(seed::child(cfg.seed, tag::TEST)))
        .with_truth(spec);
    let eta = test.eta.as_ref().expect("truth attached");
    let model = EnsembleModel::fit(&train, cfg)?;
    let members = model.member_predictions(&test.x)?;
    let b1 = members.len();
    let ensemble = vote_labels(&members, 0..b1, alpha);
    let scale = 1.0 / alpha.min(1.0 - alpha);
    let (mut lhs, mut rhs, mut bayes) = (Welford::default(), Welford::default(), Welford::default());
    for (i, &e) in eta.iter().enumerate() {
        let bayes_label = if e >= 0.5 { Label::One } else { Label::Two };
        let weight = (2.0 * e - 1.0).abs();
        let excess = |l: Label| if l == bayes_label { 0.0 } else { weight };
        lhs.push(excess(ensemble[i]));
        let wrong = members.iter().filter(|row| row[i] != bayes_label).count();
        rhs.push(scale * weight * wrong as f64 / b1 as f64);
        bayes.push(e.min(1.0 - e));
    }
    let (lhs, rhs) = (lhs.estimate(), rhs.estimate());
    let slack = 3.0 * (lhs.se * lhs.se + rhs.se * rhs.se).sqrt();
    Ok(BoundDiagnostic {
        alpha,
        holds: lhs.mean <= rhs.mean + slack,
        lhs,
        rhs,
        bayes_risk: bayes.estimate(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_cell_format() {
        let s = Summary::of("x", &[Some(0.1175), Some(0.1175)]);
        assert_eq!(s.cell(), "11.75_{0.00}");
        assert_eq!(Summary::of("y", &[None]).cell(), "N/A");
    }

    #[test]
    fn slope_of_exact_power_law() {
        let x: Vec<f64> = [8.0f64, 16.0, 32.0, 64.0].iter().map(|v| v.ln()).collect();
        let y: Vec<f64> = [8.0f64, 16.0, 32.0, 64.0].iter().map(|v| (3.0 / v).ln()).collect();
        assert!((ls_slope(&x, &y) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn knn_cv_small_grid() {
        let d = Dataset::from_rows(
            &[vec![0.0], vec![1.0], vec![5.0]],
            vec![Label::One, Label::Two, Label::One],
        )
        .unwrap();
        assert_eq!(comparator_knn_cv(&d, 0).unwrap(), 1);
    }
}
