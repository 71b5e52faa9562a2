//! The random-projection ensemble classifier.
//!
//! `B1` independent blocks of `B2` random projections are drawn. In each
//! block the base classifier is trained on every projected view of the data
//! and the projection with the smallest estimated test error is kept (the
//! first one on ties). The `B1` kept classifiers vote; a point is assigned to
//! class 1 when the fraction of class-1 votes is at least the threshold `α`.
//!
//! The threshold is either fixed or chosen to minimise
//!
//! ```text
//! O(t) = π̂₁ Ĝ₁(t) + π̂₂ (1 - Ĝ₂(t)),   Ĝ_r(t) = #{i in class r : ν(X_i) < t} / n_r
//! ```
//!
//! where `ν(X_i)` is the vote fraction at training point `i`, taken from the
//! same per-point predictions the error estimator produced (in-sample for
//! resubstitution, held-out for leave-one-out). `O` is piecewise constant;
//! the chosen threshold is the midpoint of the smallest and largest
//! minimisers.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::{BaseKind, BaseModel, Classify};
use crate::data::{Dataset, Label};
use crate::error::{Error, Result};
use crate::estimate::{self, Assessment, ErrorEstimate, LooFailure};
use crate::io::serde_matrix;
use crate::projection::{Projection, ProjectionKind};
use crate::seed::{self, tag};

/// Number of blocks and block size used throughout the reference experiments.
pub const DEFAULT_B1: usize = 100;
pub const DEFAULT_B2: usize = 100;

/// How projection quality is estimated during selection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    Resubstitution,
    LeaveOneOut,
    /// Train on a random part of the data, count errors on the rest.
    /// `holdout` is the fraction held out.
    SampleSplit { holdout: f64 },
}

impl Estimator {
    /// Resubstitution for LDA, leave-one-out for QDA and kNN.
    pub fn default_for(base: BaseKind) -> Estimator {
        match base {
            BaseKind::Lda => Estimator::Resubstitution,
            BaseKind::Qda | BaseKind::Knn { .. } => Estimator::LeaveOneOut,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum AlphaRule {
    Fixed { value: f64 },
    DataDriven,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub b1: usize,
    pub b2: usize,
    pub d: usize,
    pub base: BaseKind,
    pub estimator: Estimator,
    pub projection: ProjectionKind,
    pub alpha: AlphaRule,
    pub seed: u64,
}

impl EnsembleConfig {
    /// `B1 = B2 = 100`, Haar projections, data-driven threshold, the
    /// base classifier's default estimator and seed 0.
    pub fn new(d: usize, base: BaseKind) -> Self {
        EnsembleConfig {
            b1: DEFAULT_B1,
            b2: DEFAULT_B2,
            d,
            base,
            estimator: Estimator::default_for(base),
            projection: ProjectionKind::Haar,
            alpha: AlphaRule::DataDriven,
            seed: 0,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.b1 == 0 || self.b2 == 0 {
            return Err(Error::Config("B1 and B2 must be at least 1".into()));
        }
        if self.b1 > u32::MAX as usize {
            return Err(Error::Config("B1 too large".into()));
        }
        if self.d == 0 || self.d > p {
            return Err(Error::InvalidDimension { d: self.d, p });
        }
        if let AlphaRule::Fixed { value } = self.alpha {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::Config(format!("fixed alpha must lie in (0,1), got {value}")));
            }
        }
        if let Estimator::SampleSplit { holdout } = self.estimator {
            if !(holdout > 0.0 && holdout < 1.0) {
                return Err(Error::Config(format!(
                    "holdout fraction must lie in (0,1), got {holdout}"
                )));
            }
        }
        if let BaseKind::Knn { k } = self.base {
            if k == 0 {
                return Err(Error::Config("k must be at least 1".into()));
            }
        }
        Ok(())
    }
}

/// Fraction of `total` voters choosing class 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VoteFraction {
    pub count: u32,
    pub total: u32,
}

impl VoteFraction {
    pub fn value(&self) -> f64 {
        self.count as f64 / self.total as f64
    }
}

/// A projection's trained base model and its error assessment.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub estimate: ErrorEstimate,
    pub model: BaseModel,
    /// Predictions at the estimator's evaluation points.
    pub predictions: Vec<Label>,
}

/// Result of screening one block.
#[derive(Clone, Debug)]
pub struct BlockOutcome {
    pub winner: usize,
    pub projection: Projection,
    pub candidate: Candidate,
    /// Error count of every candidate; `None` where fitting failed.
    pub errors: Vec<Option<usize>>,
}

/// Scores projections of one training set.
pub struct Selector<'a> {
    train: &'a Dataset,
    base: BaseKind,
    plan: Plan,
}

enum Plan {
    Resubstitution,
    LeaveOneOut,
    Split {
        fit_part: Dataset,
        eval_part: Dataset,
        eval_index: Vec<usize>,
    },
}

impl<'a> Selector<'a> {
    /// `split_seed` is only used by the sample-splitting estimator.
    pub fn new(
        train: &'a Dataset,
        base: BaseKind,
        estimator: Estimator,
        split_seed: u64,
    ) -> Result<Self> {
        let plan = match estimator {
            Estimator::Resubstitution => Plan::Resubstitution,
            Estimator::LeaveOneOut => Plan::LeaveOneOut,
            Estimator::SampleSplit { holdout } => {
                let n = train.n();
                let n2 = ((n as f64) * holdout).round() as usize;
                if n2 == 0 || n2 >= n {
                    return Err(Error::Config(format!(
                        "holdout {holdout} leaves an empty part of {n} points"
                    )));
                }
                let mut idx: Vec<usize> = (0..n).collect();
                idx.shuffle(&mut seed::rng(split_seed));
                let (eval, fit) = idx.split_at(n2);
                let mut eval = eval.to_vec();
                let mut fit = fit.to_vec();
                eval.sort_unstable();
                fit.sort_unstable();
                Plan::Split {
                    fit_part: train.subset(&fit),
                    eval_part: train.subset(&eval),
                    eval_index: eval,
                }
            }
        };
        Ok(Selector { train, base, plan })
    }

    /// Training-set indices of the evaluation points, in prediction order.
    pub fn evaluation_points(&self) -> Vec<usize> {
        match &self.plan {
            Plan::Split { eval_index, .. } => eval_index.clone(),
            _ => (0..self.train.n()).collect(),
        }
    }

    pub fn assess(&self, projection: &Projection, tie_seed: u64) -> Result<Candidate> {
        let a: Assessment;
        let model: BaseModel;
        match &self.plan {
            Plan::Resubstitution => {
                let z = projection.apply_dataset(self.train)?;
                model = self.base.fit(&z, tie_seed)?;
                a = estimate::resubstitution_base(&z, &model);
            }
            Plan::LeaveOneOut => {
                let z = projection.apply_dataset(self.train)?;
                model = self.base.fit(&z, tie_seed)?;
                a = estimate::leave_one_out_base(&z, self.base, tie_seed, LooFailure::CountAsError)?;
            }
            Plan::Split {
                fit_part,
                eval_part,
                ..
            } => {
                let z1 = projection.apply_dataset(fit_part)?;
                let z2 = projection.apply_dataset(eval_part)?;
                model = self.base.fit(&z1, tie_seed)?;
                a = estimate::sample_split(&z1, &z2, |_| Ok(model.clone()))?;
            }
        }
        Ok(Candidate {
            estimate: a.estimate,
            model,
            predictions: a.predictions,
        })
    }

    /// Keeps the projection with the fewest estimated errors; the smallest
    /// index wins ties. `block_id` only labels the error.
    pub fn select(
        &self,
        block: &[Projection],
        tie_seeds: &[u64],
        block_id: usize,
    ) -> Result<BlockOutcome> {
        assert_eq!(block.len(), tie_seeds.len());
        let mut best: Option<(usize, Candidate)> = None;
        let mut errors = Vec::with_capacity(block.len());
        for (j, (proj, &ts)) in block.iter().zip(tie_seeds).enumerate() {
            match self.assess(proj, ts) {
                Ok(c) => {
                    errors.push(Some(c.estimate.errors));
                    let better = match &best {
                        None => true,
                        Some((_, b)) => c.estimate.errors < b.estimate.errors,
                    };
                    if better {
                        best = Some((j, c));
                    }
                }
                Err(e) => {
                    log::debug!("block {block_id}, candidate {j}: {e}");
                    errors.push(None);
                }
            }
        }
        let (winner, candidate) = best.ok_or(Error::BlockFailed { block: block_id })?;
        Ok(BlockOutcome {
            winner,
            projection: block[winner].clone(),
            candidate,
            errors,
        })
    }
}

/// Screens one block of projections and returns the winner.
pub fn select_block_winner(
    train: &Dataset,
    block: &[Projection],
    base: BaseKind,
    estimator: Estimator,
    seed: u64,
) -> Result<BlockOutcome> {
    if block.is_empty() {
        return Err(Error::Config("empty block".into()));
    }
    let selector = Selector::new(train, base, estimator, seed::child(seed, tag::SPLIT))?;
    let ties: Vec<u64> = (0..block.len())
        .map(|j| seed::derive(seed, &[j as u64, tag::TIES]))
        .collect();
    selector.select(block, &ties, 0)
}

fn candidate_seeds(master: u64, b1: usize, b2: usize) -> (u64, u64) {
    let s = seed::derive(master, &[b1 as u64, b2 as u64]);
    (seed::child(s, tag::PROJECTIONS), seed::child(s, tag::TIES))
}

/// Draws and screens all `B1` blocks. Blocks run in parallel; every block's
/// randomness comes from its own seeds, so the output does not depend on the
/// thread count.
pub fn run_blocks(train: &Dataset, cfg: &EnsembleConfig) -> Result<(Vec<BlockOutcome>, Vec<usize>)> {
    cfg.validate(train.p())?;
    let p = train.p();
    let selector = Selector::new(
        train,
        cfg.base,
        cfg.estimator,
        seed::child(cfg.seed, tag::SPLIT),
    )?;
    let outcomes = (0..cfg.b1)
        .into_par_iter()
        .map(|b| {
            let mut block = Vec::with_capacity(cfg.b2);
            let mut ties = Vec::with_capacity(cfg.b2);
            for c in 0..cfg.b2 {
                let (ps, ts) = candidate_seeds(cfg.seed, b, c);
                block.push(Projection::sample(cfg.projection, p, cfg.d, &mut seed::rng(ps))?);
                ties.push(ts);
            }
            selector.select(&block, &ties, b)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((outcomes, selector.evaluation_points()))
}

/// Result of threshold estimation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub alpha: f64,
    /// Minimum of the objective.
    pub objective: f64,
    /// Infimum and supremum of the set of minimisers.
    pub smallest: f64,
    pub largest: f64,
    /// All votes were equal; the objective carries no information and 1/2
    /// was used.
    pub flat: bool,
}

/// `π̂₁ Ĝ₁(t) + π̂₂ (1 - Ĝ₂(t))` evaluated directly.
pub fn alpha_objective(t: f64, votes: &[VoteFraction], labels: &[Label], priors: [f64; 2]) -> f64 {
    let mut n = [0usize; 2];
    let mut below = [0usize; 2];
    for (v, l) in votes.iter().zip(labels) {
        n[l.index()] += 1;
        if v.value() < t {
            below[l.index()] += 1;
        }
    }
    priors[0] * below[0] as f64 / n[0] as f64
        + priors[1] * (n[1] - below[1]) as f64 / n[1] as f64
}

/// `{1/(2B1)} ∪ {distinct votes} ∪ {midpoints of consecutive distinct votes} ∪ {1}`.
pub fn alpha_candidates(votes: &[VoteFraction]) -> Vec<f64> {
    let Some(total) = votes.first().map(|v| v.total) else {
        return vec![];
    };
    let mut counts: Vec<u32> = votes.iter().map(|v| v.count).collect();
    counts.sort_unstable();
    counts.dedup();
    let mut out = vec![0.5 / total as f64, 1.0];
    for w in counts.windows(2) {
        out.push((w[0] + w[1]) as f64 / (2 * total) as f64);
    }
    out.extend(counts.iter().map(|&c| c as f64 / total as f64));
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

const OBJECTIVE_TOL: f64 = 1e-12;

/// Data-driven voting threshold.
///
/// On `(0, 1]` the objective is constant on `(0, w₁]`, on each
/// `(w_j, w_{j+1}]` and on `(w_m, 1]`, where `w₁ < … < w_m` are the distinct
/// vote values (empty pieces dropped). The minimisers form a union of such
/// pieces; the threshold is the midpoint of their infimum and supremum. When
/// the minimising pieces are not contiguous and that midpoint falls outside
/// them, the midpoint of the contiguous run of minimising pieces closest to it
/// is used instead, so the result always attains the minimum over `(0, 1]`.
/// Every piece has positive length, so the threshold lies strictly inside
/// `(0, 1)`.
///
/// If all votes are equal the threshold is 1/2.
pub fn estimate_alpha(
    votes: &[VoteFraction],
    labels: &[Label],
    priors: [f64; 2],
) -> Result<AlphaEstimate> {
    if votes.len() != labels.len() {
        return Err(Error::Data("votes and labels differ in length".into()));
    }
    let mut n = [0usize; 2];
    for l in labels {
        n[l.index()] += 1;
    }
    if n[0] == 0 || n[1] == 0 {
        return Err(Error::DegenerateAlpha("in-sample votes cover a single class"));
    }
    let total = votes[0].total;
    if votes.iter().any(|v| v.total != total || v.count > total) {
        return Err(Error::Data("vote fractions have inconsistent totals".into()));
    }
    let b = total as f64;

    let mut values: Vec<u32> = votes.iter().map(|v| v.count).collect();
    values.sort_unstable();
    values.dedup();
    if values.len() == 1 {
        log::warn!("all in-sample votes are equal; using alpha = 1/2");
        return Ok(AlphaEstimate {
            alpha: 0.5,
            objective: alpha_objective(0.5, votes, labels, priors),
            smallest: 0.0,
            largest: 1.0,
            flat: true,
        });
    }

    // Per class, how many votes are <= each distinct value.
    let m = values.len();
    let mut at_most = vec![[0usize; 2]; m];
    for (v, l) in votes.iter().zip(labels) {
        let j = values.binary_search(&v.count).expect("value present");
        at_most[j][l.index()] += 1;
    }
    for j in 1..m {
        at_most[j][0] += at_most[j - 1][0];
        at_most[j][1] += at_most[j - 1][1];
    }

    // Pieces as (lower, upper, objective).
    let obj = |below: [usize; 2]| {
        priors[0] * below[0] as f64 / n[0] as f64
            + priors[1] * (n[1] - below[1]) as f64 / n[1] as f64
    };
    let w = |j: usize| values[j] as f64 / b;
    let mut pieces = Vec::with_capacity(m + 1);
    if values[0] > 0 {
        pieces.push((0.0, w(0), obj([0, 0])));
    }
    for j in 0..m - 1 {
        pieces.push((w(j), w(j + 1), obj(at_most[j])));
    }
    if values[m - 1] < total {
        pieces.push((w(m - 1), 1.0, obj(at_most[m - 1])));
    }

    let best = pieces.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
    let is_min = |p: &(f64, f64, f64)| p.2 <= best + OBJECTIVE_TOL;
    let first = pieces.iter().position(is_min).expect("nonempty");
    let last = pieces.iter().rposition(is_min).expect("nonempty");
    let smallest = pieces[first].0;
    let largest = pieces[last].1;
    let mid = 0.5 * (smallest + largest);

    let piece_of = |t: f64| {
        pieces
            .iter()
            .position(|p| t > p.0 && t <= p.1)
            .expect("pieces cover (0, 1]")
    };
    let mut alpha = mid;
    if !is_min(&pieces[piece_of(mid)]) {
        // Contiguous runs of minimising pieces.
        let mut runs: Vec<(f64, f64)> = Vec::new();
        let mut i = 0;
        while i < pieces.len() {
            if is_min(&pieces[i]) {
                let lo = pieces[i].0;
                while i + 1 < pieces.len() && is_min(&pieces[i + 1]) {
                    i += 1;
                }
                runs.push((lo, pieces[i].1));
            }
            i += 1;
        }
        let centre = |r: &(f64, f64)| 0.5 * (r.0 + r.1);
        let run = runs
            .iter()
            .min_by(|a, b| (centre(a) - mid).abs().total_cmp(&(centre(b) - mid).abs()))
            .expect("at least one run");
        alpha = centre(run);
    }
    debug_assert!(alpha > 0.0 && alpha < 1.0);
    Ok(AlphaEstimate {
        alpha,
        objective: best,
        smallest,
        largest,
        flat: false,
    })
}

/// Vote fractions at the training points used to estimate the threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InSampleVotes {
    /// Training-set index of each evaluation point.
    pub index: Vec<usize>,
    pub labels: Vec<Label>,
    pub votes: Vec<VoteFraction>,
}

impl InSampleVotes {
    /// `(t, Ĝ₁(t), Ĝ₂(t))` on a grid of `points + 1` thresholds in `[0, 1]`.
    pub fn g_curves(&self, points: usize) -> Vec<(f64, f64, f64)> {
        let mut n = [0usize; 2];
        for l in &self.labels {
            n[l.index()] += 1;
        }
        (0..=points)
            .map(|i| {
                let t = i as f64 / points as f64;
                let mut below = [0usize; 2];
                for (v, l) in self.votes.iter().zip(&self.labels) {
                    if v.value() < t {
                        below[l.index()] += 1;
                    }
                }
                let g = |r: usize| {
                    if n[r] == 0 {
                        f64::NAN
                    } else {
                        below[r] as f64 / n[r] as f64
                    }
                };
                (t, g(0), g(1))
            })
            .collect()
    }
}

/// A fitted ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleModel {
    config: EnsembleConfig,
    p: usize,
    projections: Vec<Projection>,
    models: Vec<BaseModel>,
    alpha_hat: f64,
    winner_estimates: Vec<ErrorEstimate>,
    block_errors: Vec<Vec<Option<usize>>>,
    in_sample: InSampleVotes,
    priors: [f64; 2],
}

impl EnsembleModel {
    pub fn fit(train: &Dataset, cfg: &EnsembleConfig) -> Result<EnsembleModel> {
        cfg.validate(train.p())?;
        let [n1, n2] = train.class_counts();
        if n1 == 0 {
            return Err(Error::MissingClass(Label::One));
        }
        if n2 == 0 {
            return Err(Error::MissingClass(Label::Two));
        }
        let (outcomes, eval_index) = run_blocks(train, cfg)?;
        let b1 = cfg.b1 as u32;
        let mut counts = vec![0u32; eval_index.len()];
        for o in &outcomes {
            for (c, l) in counts.iter_mut().zip(&o.candidate.predictions) {
                if *l == Label::One {
                    *c += 1;
                }
            }
        }
        let in_sample = InSampleVotes {
            labels: eval_index.iter().map(|&i| train.label(i)).collect(),
            votes: counts
                .into_iter()
                .map(|count| VoteFraction { count, total: b1 })
                .collect(),
            index: eval_index,
        };
        let priors = train.priors();
        let alpha_hat = match cfg.alpha {
            AlphaRule::Fixed { value } => value,
            AlphaRule::DataDriven => {
                estimate_alpha(&in_sample.votes, &in_sample.labels, priors)?.alpha
            }
        };
        let mut projections = Vec::with_capacity(outcomes.len());
        let mut models = Vec::with_capacity(outcomes.len());
        let mut winner_estimates = Vec::with_capacity(outcomes.len());
        let mut block_errors = Vec::with_capacity(outcomes.len());
        for o in outcomes {
            projections.push(o.projection);
            models.push(o.candidate.model);
            winner_estimates.push(o.candidate.estimate);
            block_errors.push(o.errors);
        }
        Ok(EnsembleModel {
            config: *cfg,
            p: train.p(),
            projections,
            models,
            alpha_hat,
            winner_estimates,
            block_errors,
            in_sample,
            priors,
        })
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn b1(&self) -> usize {
        self.projections.len()
    }

    pub fn alpha_hat(&self) -> f64 {
        self.alpha_hat
    }

    pub fn projections(&self) -> &[Projection] {
        &self.projections
    }

    pub fn base_models(&self) -> &[BaseModel] {
        &self.models
    }

    pub fn winner_estimates(&self) -> &[ErrorEstimate] {
        &self.winner_estimates
    }

    /// Error counts of every candidate in every block (`None` = failed fit).
    pub fn block_errors(&self) -> &[Vec<Option<usize>>] {
        &self.block_errors
    }

    pub fn in_sample_votes(&self) -> &InSampleVotes {
        &self.in_sample
    }

    pub fn priors(&self) -> [f64; 2] {
        self.priors
    }

    /// Same ensemble with a different threshold.
    pub fn with_alpha(&self, alpha: f64) -> Result<EnsembleModel> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0,1), got {alpha}")));
        }
        let mut m = self.clone();
        m.alpha_hat = alpha;
        Ok(m)
    }

    /// The ensemble expressed in coordinates `x' = R x` for an orthogonal
    /// `R`: every projection `A` becomes `A Rᵀ`, base models unchanged.
    pub fn change_basis(&self, rotation: &DMatrix<f64>) -> Result<EnsembleModel> {
        let projections = self
            .projections
            .iter()
            .map(|a| a.rotated(rotation))
            .collect::<Result<Vec<_>>>()?;
        let mut m = self.clone();
        m.projections = projections;
        Ok(m)
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.p {
            Err(Error::Shape {
                expected: self.p,
                found: x.len(),
            })
        } else {
            Ok(())
        }
    }

    /// Fraction of the `B1` selected classifiers voting for class 1.
    pub fn votes(&self, x: &[f64]) -> Result<VoteFraction> {
        self.check_point(x)?;
        let mut count = 0u32;
        for (a, m) in self.projections.iter().zip(&self.models) {
            let z = a.apply_point(x)?;
            if m.predict(z.as_slice()) == Label::One {
                count += 1;
            }
        }
        Ok(VoteFraction {
            count,
            total: self.b1() as u32,
        })
    }

    /// Class 1 iff the vote fraction is at least the threshold.
    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        Ok(self.decide(self.votes(x)?))
    }

    pub fn decide(&self, v: VoteFraction) -> Label {
        if v.value() >= self.alpha_hat {
            Label::One
        } else {
            Label::Two
        }
    }

    /// Prediction of every selected classifier at every row of `x`
    /// (`B1` rows of `n` labels).
    pub fn member_predictions(&self, x: &DMatrix<f64>) -> Result<Vec<Vec<Label>>> {
        if x.ncols() != self.p {
            return Err(Error::Shape {
                expected: self.p,
                found: x.ncols(),
            });
        }
        self.projections
            .par_iter()
            .zip(self.models.par_iter())
            .map(|(a, m)| {
                let z = a.apply(x)?;
                let d = z.ncols();
                let mut row = vec![0.0; d];
                Ok((0..z.nrows())
                    .map(|i| {
                        for j in 0..d {
                            row[j] = z[(i, j)];
                        }
                        m.predict(&row)
                    })
                    .collect())
            })
            .collect()
    }

    pub fn votes_batch(&self, x: &DMatrix<f64>) -> Result<Vec<VoteFraction>> {
        let members = self.member_predictions(x)?;
        let total = self.b1() as u32;
        let mut counts = vec![0u32; x.nrows()];
        for preds in &members {
            for (c, l) in counts.iter_mut().zip(preds) {
                if *l == Label::One {
                    *c += 1;
                }
            }
        }
        Ok(counts
            .into_iter()
            .map(|count| VoteFraction { count, total })
            .collect())
    }

    pub fn predict_batch(&self, x: &DMatrix<f64>) -> Result<Vec<Label>> {
        Ok(self
            .votes_batch(x)?
            .into_iter()
            .map(|v| self.decide(v))
            .collect())
    }

    /// Misclassification rate on `test`.
    pub fn test_error(&self, test: &Dataset) -> Result<f64> {
        let pred = self.predict_batch(test.x())?;
        let wrong = pred.iter().zip(test.y()).filter(|(a, b)| a != b).count();
        Ok(wrong as f64 / test.n() as f64)
    }

    pub fn save<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, &ModelFile::from_model(self))?;
        Ok(())
    }

    pub fn load<R: Read>(r: R) -> Result<EnsembleModel> {
        let file: ModelFile = serde_json::from_reader(r)?;
        file.into_model()
    }
}

pub const MODEL_FORMAT: &str = "rpens-ensemble";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ProjectionRecord {
    kind: ProjectionKind,
    matrix: serde_matrix::Record,
}

#[derive(Serialize, Deserialize)]
struct Provenance {
    library_version: String,
    master_seed: u64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    provenance: Provenance,
    config: EnsembleConfig,
    p: usize,
    alpha_hat: f64,
    priors: [f64; 2],
    projections: Vec<ProjectionRecord>,
    base_models: Vec<BaseModel>,
    winner_estimates: Vec<ErrorEstimate>,
    block_errors: Vec<Vec<Option<usize>>>,
    in_sample_votes: InSampleVotes,
}

impl ModelFile {
    fn from_model(m: &EnsembleModel) -> ModelFile {
        ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            provenance: Provenance {
                library_version: env!("CARGO_PKG_VERSION").into(),
                master_seed: m.config.seed,
            },
            config: m.config,
            p: m.p,
            alpha_hat: m.alpha_hat,
            priors: m.priors,
            projections: m
                .projections
                .iter()
                .map(|a| ProjectionRecord {
                    kind: a.kind(),
                    matrix: serde_matrix::Record::from_matrix(a.matrix()),
                })
                .collect(),
            base_models: m.models.clone(),
            winner_estimates: m.winner_estimates.clone(),
            block_errors: m.block_errors.clone(),
            in_sample_votes: m.in_sample.clone(),
        }
    }

    fn into_model(self) -> Result<EnsembleModel> {
        if self.format != MODEL_FORMAT {
            return Err(Error::Format(format!("unknown format {:?}", self.format)));
        }
        if self.version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported version {}", self.version)));
        }
        let projections = self
            .projections
            .into_iter()
            .map(|r| {
                let m = r.matrix.into_matrix().map_err(Error::Format)?;
                Projection::from_matrix(m, r.kind)
            })
            .collect::<Result<Vec<_>>>()?;
        let b1 = projections.len();
        if b1 == 0 || self.base_models.len() != b1 || self.winner_estimates.len() != b1 {
            return Err(Error::Format("inconsistent ensemble size".into()));
        }
        for (a, m) in projections.iter().zip(&self.base_models) {
            if a.p() != self.p || a.d() != m.dim() {
                return Err(Error::Format("projection and base model dimensions disagree".into()));
            }
        }
        Ok(EnsembleModel {
            config: self.config,
            p: self.p,
            projections,
            models: self.base_models,
            alpha_hat: self.alpha_hat,
            winner_estimates: self.winner_estimates,
            block_errors: self.block_errors,
            in_sample: self.in_sample_votes,
            priors: self.priors,
        })
    }
}

/// Outcome of choosing the projected dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct DimensionChoice {
    pub chosen: usize,
    /// `(d, mean selected-projection error estimate)` for every candidate.
    pub scores: Vec<(usize, f64)>,
}

/// Picks `d` minimising the average error estimate of the `B1` selected
/// projections; smaller `d` wins ties. Each `d` uses its own projections.
pub fn select_d(train: &Dataset, candidates: &[usize], cfg: &EnsembleConfig) -> Result<DimensionChoice> {
    if candidates.is_empty() {
        return Err(Error::Config("no candidate dimensions".into()));
    }
    let mut ds = candidates.to_vec();
    ds.sort_unstable();
    ds.dedup();
    // (d, error sum, denominator)
    let mut totals: Vec<(usize, u128, u128)> = Vec::with_capacity(ds.len());
    for &d in &ds {
        let mut c = *cfg;
        c.d = d;
        c.seed = seed::derive(cfg.seed, &[tag::DIM, d as u64]);
        let (outcomes, _) = run_blocks(train, &c)?;
        let sum: u128 = outcomes.iter().map(|o| o.candidate.estimate.errors as u128).sum();
        let m = outcomes[0].candidate.estimate.m as u128;
        totals.push((d, sum, m * outcomes.len() as u128));
    }
    let mut best = 0;
    for i in 1..totals.len() {
        let (_, s, q) = totals[i];
        let (_, bs, bq) = totals[best];
        if s * bq < bs * q {
            best = i;
        }
    }
    Ok(DimensionChoice {
        chosen: totals[best].0,
        scores: totals
            .iter()
            .map(|&(d, s, q)| (d, s as f64 / q as f64))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vf(counts: &[u32], total: u32) -> Vec<VoteFraction> {
        counts.iter().map(|&count| VoteFraction { count, total }).collect()
    }

    #[test]
    fn separable_votes_give_half() {
        let votes = vf(&[10, 10, 0, 0], 10);
        let labels = [Label::One, Label::One, Label::Two, Label::Two];
        let a = estimate_alpha(&votes, &labels, [0.5, 0.5]).unwrap();
        assert_eq!(a.objective, 0.0);
        assert_eq!(a.smallest, 0.0);
        assert_eq!(a.largest, 1.0);
        assert_eq!(a.alpha, 0.5);
    }

    #[test]
    fn enumerated_example() {
        let votes = vf(&[9, 8, 1, 2], 10);
        let labels = [Label::One, Label::One, Label::Two, Label::Two];
        let a = estimate_alpha(&votes, &labels, [0.5, 0.5]).unwrap();
        // Enumerate the objective over a fine grid: zero exactly on (0.2, 0.8].
        for i in 0..=1000 {
            let t = i as f64 / 1000.0;
            let o = alpha_objective(t, &votes, &labels, [0.5, 0.5]);
            assert_eq!(o == 0.0, t > 0.2 + 1e-12 && t <= 0.8 + 1e-12, "t = {t}");
        }
        assert!((a.alpha - 0.5).abs() < 1e-15);
        assert_eq!(a.objective, 0.0);
    }

    #[test]
    fn single_class_is_degenerate() {
        let votes = vf(&[1, 2], 4);
        assert!(matches!(
            estimate_alpha(&votes, &[Label::One, Label::One], [1.0, 0.0]),
            Err(Error::DegenerateAlpha(_))
        ));
    }

    #[test]
    fn flat_votes_default_to_half() {
        let votes = vf(&[3, 3, 3], 6);
        let a = estimate_alpha(&votes, &[Label::One, Label::Two, Label::Two], [1.0 / 3.0, 2.0 / 3.0])
            .unwrap();
        assert!(a.flat);
        assert_eq!(a.alpha, 0.5);
    }

    #[test]
    fn disconnected_minimisers_still_minimise() {
        // Class 1 at votes 0.1 and 0.9, class 2 at 0.5: thresholds in
        // (0, 0.1] and (0.5, 0.9] tie; their overall midpoint 0.45 does not.
        let votes = vf(&[1, 9, 5], 10);
        let labels = [Label::One, Label::One, Label::Two];
        let priors = [2.0 / 3.0, 1.0 / 3.0];
        let a = estimate_alpha(&votes, &labels, priors).unwrap();
        let at = alpha_objective(a.alpha, &votes, &labels, priors);
        assert!((at - a.objective).abs() < 1e-12);
        for t in alpha_candidates(&votes) {
            assert!(at <= alpha_objective(t, &votes, &labels, priors) + 1e-12);
        }
    }

    #[test]
    fn candidates_cover_breakpoints() {
        let c = alpha_candidates(&vf(&[0, 4, 4, 10], 10));
        assert_eq!(c, vec![0.0, 0.05, 0.2, 0.4, 0.7, 1.0]);
    }
}
