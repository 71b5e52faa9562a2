//! The four simulation models and their Bayes-risk oracle.
//!
//! | model | class 1 | class 2 |
//! |---|---|---|
//! | 1 | independent standard Laplace coordinates | `N(μ, I)`, `μ = (1/8, …, 1/8)` |
//! | 2 | `t₁` centred at 0, shape `I` | `t₂` centred at `μ₂ = 2(1,1,1,1,1,0,…)`, shape `Σ₂` |
//! | 3 | `½N(μ₁, I) + ½N(-μ₁, I)`, `μ₁ = (1,1,1,1,1,0,…)` | 5 standard Cauchy coordinates, the rest standard normal |
//! | 4 | `N(Rμ₁, RΣ₁Rᵀ)` | `N(Rμ₂, RΣ₂Rᵀ)` |
//!
//! In model 2, `Σ₂` has unit diagonal and 0.5 between distinct coordinates
//! among the first five; the t-variates are drawn as `μ + Z/√(U/ν)` with
//! `Z ~ N(0, Σ)` and `U ~ χ²_ν`. In model 4, `μ₁ = 0`, `μ₂ = (1,1,1,0,…)` and
//! both `Σ_r` are block diagonal with a `3 × 3` block and a `(p-3) × (p-3)`
//! block, each with unit diagonal and 0.5 off the diagonal; class 2 adds the
//! identity to the `3 × 3` block. `R` is a Haar rotation drawn once from the
//! spec's rotation seed.
//!
//! When `p < 5`, models 2 and 3 use `p` active coordinates instead of five.

use std::f64::consts::{LN_2, PI};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Cauchy, ChiSquared, Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::data::{Dataset, Label};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, mahalanobis_sq};
use crate::projection::Projection;
use crate::seed;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Rotation seed used by [`ModelSpec::model4`].
pub const DEFAULT_ROTATION_SEED: u64 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelId {
    M1,
    M2,
    M3,
    M4,
}

impl TryFrom<u8> for ModelId {
    type Error = Error;

    fn try_from(v: u8) -> Result<ModelId> {
        Ok(match v {
            1 => ModelId::M1,
            2 => ModelId::M2,
            3 => ModelId::M3,
            4 => ModelId::M4,
            _ => return Err(Error::Config(format!("model must be 1, 2, 3 or 4, got {v}"))),
        })
    }
}

/// A fully specified Gaussian or t class law: mean and lower Cholesky factor
/// of the scale matrix.
#[derive(Clone, Debug)]
struct Shape {
    mean: DVector<f64>,
    chol: DMatrix<f64>,
    log_det: f64,
}

impl Shape {
    fn new(mean: DVector<f64>, sigma: &DMatrix<f64>) -> Result<Shape> {
        let chol = cholesky_lower(sigma)?;
        let log_det = 2.0 * chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Shape {
            mean,
            chol,
            log_det,
        })
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64, out: &mut [f64]) {
        let p = out.len();
        let g: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        for i in 0..p {
            let mut s = 0.0;
            for j in 0..=i {
                s += self.chol[(i, j)] * g[j];
            }
            out[i] = self.mean[i] + s * scale;
        }
    }

    fn mahalanobis(&self, x: &[f64]) -> f64 {
        let v: Vec<f64> = x.iter().zip(self.mean.iter()).map(|(a, m)| a - m).collect();
        mahalanobis_sq(&self.chol, &v)
    }

    fn gaussian_log_density(&self, x: &[f64]) -> f64 {
        let p = x.len() as f64;
        -0.5 * (p * LN_2PI + self.log_det + self.mahalanobis(x))
    }

    fn t_log_density(&self, x: &[f64], nu: f64) -> f64 {
        let p = x.len() as f64;
        ln_gamma(0.5 * (nu + p)) - ln_gamma(0.5 * nu) - 0.5 * p * (nu * PI).ln() - 0.5 * self.log_det
            - 0.5 * (nu + p) * (self.mahalanobis(x) / nu).ln_1p()
    }
}

#[derive(Clone, Debug)]
enum Params {
    M1 {
        shift: f64,
    },
    M2 {
        shapes: [Shape; 2],
        nu: [f64; 2],
    },
    M3 {
        mu: Vec<f64>,
        cauchy: usize,
    },
    M4 {
        rotation: DMatrix<f64>,
        /// Laws of the first three unrotated coordinates.
        head: [Shape; 2],
        /// Law of the remaining `p - 3` unrotated coordinates, shared.
        tail: Option<Shape>,
    },
}

/// One of the simulation models at a given dimension and class-1 prior.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    id: ModelId,
    p: usize,
    pi_1: f64,
    rotation_seed: Option<u64>,
    params: Params,
}

fn equicorrelation(k: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { rho })
}

fn indicator_vector(p: usize, k: usize, value: f64) -> DVector<f64> {
    DVector::from_fn(p, |i, _| if i < k { value } else { 0.0 })
}

impl ModelSpec {
    pub fn new(id: ModelId, p: usize, pi_1: f64, rotation_seed: u64) -> Result<ModelSpec> {
        if p == 0 {
            return Err(Error::Config("p must be at least 1".into()));
        }
        if !(pi_1 > 0.0 && pi_1 < 1.0) {
            return Err(Error::Config(format!("pi1 must lie in (0,1), got {pi_1}")));
        }
        let active = p.min(5);
        let params = match id {
            ModelId::M1 => Params::M1 { shift: 0.125 },
            ModelId::M2 => {
                let mut sigma_2 = DMatrix::identity(p, p);
                sigma_2
                    .view_mut((0, 0), (active, active))
                    .copy_from(&equicorrelation(active, 0.5));
                Params::M2 {
                    shapes: [
                        Shape::new(DVector::zeros(p), &DMatrix::identity(p, p))?,
                        Shape::new(indicator_vector(p, active, 2.0), &sigma_2)?,
                    ],
                    nu: [1.0, 2.0],
                }
            }
            ModelId::M3 => Params::M3 {
                mu: indicator_vector(p, active, 1.0).iter().copied().collect(),
                cauchy: active,
            },
            ModelId::M4 => {
                if p < 3 {
                    return Err(Error::Config("model 4 needs p >= 3".into()));
                }
                let rotation = Projection::sample_haar(p, p, &mut seed::rng(rotation_seed))?
                    .matrix()
                    .clone();
                let block = equicorrelation(3, 0.5);
                let head = [
                    Shape::new(DVector::zeros(3), &block)?,
                    Shape::new(
                        DVector::from_element(3, 1.0),
                        &(&block + DMatrix::identity(3, 3)),
                    )?,
                ];
                let tail = if p > 3 {
                    Some(Shape::new(DVector::zeros(p - 3), &equicorrelation(p - 3, 0.5))?)
                } else {
                    None
                };
                Params::M4 {
                    rotation,
                    head,
                    tail,
                }
            }
        };
        Ok(ModelSpec {
            id,
            p,
            pi_1,
            rotation_seed: (id == ModelId::M4).then_some(rotation_seed),
            params,
        })
    }

    pub fn model1(p: usize, pi_1: f64) -> Result<ModelSpec> {
        ModelSpec::new(ModelId::M1, p, pi_1, 0)
    }

    pub fn model2(p: usize, pi_1: f64) -> Result<ModelSpec> {
        ModelSpec::new(ModelId::M2, p, pi_1, 0)
    }

    pub fn model3(p: usize, pi_1: f64) -> Result<ModelSpec> {
        ModelSpec::new(ModelId::M3, p, pi_1, 0)
    }

    pub fn model4(p: usize, pi_1: f64) -> Result<ModelSpec> {
        ModelSpec::new(ModelId::M4, p, pi_1, DEFAULT_ROTATION_SEED)
    }

    pub fn id(&self) -> ModelId {
        self.id
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn pi_1(&self) -> f64 {
        self.pi_1
    }

    pub fn rotation_seed(&self) -> Option<u64> {
        self.rotation_seed
    }

    /// The fixed rotation of model 4.
    pub fn rotation(&self) -> Option<&DMatrix<f64>> {
        match &self.params {
            Params::M4 { rotation, .. } => Some(rotation),
            _ => None,
        }
    }

    /// One draw from the class-`label` law, written into `out`.
    pub fn draw_class<R: Rng + ?Sized>(&self, label: Label, rng: &mut R, out: &mut [f64]) {
        assert_eq!(out.len(), self.p);
        let r = label.index();
        match &self.params {
            Params::M1 { shift } => {
                for v in out.iter_mut() {
                    *v = match label {
                        Label::One => {
                            let e: f64 = rng.sample(Exp1);
                            if rng.random::<bool>() {
                                e
                            } else {
                                -e
                            }
                        }
                        Label::Two => shift + rng.sample::<f64, _>(StandardNormal),
                    };
                }
            }
            Params::M2 { shapes, nu } => {
                let u: f64 = ChiSquared::new(nu[r]).expect("positive dof").sample(rng);
                shapes[r].draw(rng, 1.0 / (u / nu[r]).sqrt(), out);
            }
            Params::M3 { mu, cauchy } => match label {
                Label::One => {
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    for (v, m) in out.iter_mut().zip(mu) {
                        *v = sign * m + rng.sample::<f64, _>(StandardNormal);
                    }
                }
                Label::Two => {
                    let c = Cauchy::new(0.0, 1.0).expect("unit scale");
                    for (j, v) in out.iter_mut().enumerate() {
                        *v = if j < *cauchy {
                            c.sample(rng)
                        } else {
                            rng.sample(StandardNormal)
                        };
                    }
                }
            },
            Params::M4 {
                rotation,
                head,
                tail,
            } => {
                let mut y = vec![0.0; self.p];
                head[r].draw(rng, 1.0, &mut y[..3]);
                if let Some(t) = tail {
                    t.draw(rng, 1.0, &mut y[3..]);
                }
                for i in 0..self.p {
                    let mut s = 0.0;
                    for j in 0..self.p {
                        s += rotation[(i, j)] * y[j];
                    }
                    out[i] = s;
                }
            }
        }
    }

    /// `n` labelled draws; labels are Bernoulli with `P(class 1) = π₁`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> LabelledSample {
        let mut data = vec![0.0; n * self.p];
        let mut y = Vec::with_capacity(n);
        for row in data.chunks_exact_mut(self.p.max(1)).take(n) {
            let label = if rng.random::<f64>() < self.pi_1 {
                Label::One
            } else {
                Label::Two
            };
            self.draw_class(label, rng, row);
            y.push(label);
        }
        LabelledSample {
            x: DMatrix::from_row_slice(n, self.p, &data),
            y,
            eta: None,
        }
    }

    /// `Rᵀ x` for model 4.
    fn unrotate(&self, rotation: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
        (0..self.p)
            .map(|j| (0..self.p).map(|i| rotation[(i, j)] * x[i]).sum())
            .collect()
    }

    /// Log density of the class-`label` law at `x`.
    pub fn log_density(&self, label: Label, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.p);
        let r = label.index();
        match &self.params {
            Params::M1 { shift } => match label {
                Label::One => x.iter().map(|v| -LN_2 - v.abs()).sum(),
                Label::Two => x
                    .iter()
                    .map(|v| -0.5 * (LN_2PI + (v - shift) * (v - shift)))
                    .sum(),
            },
            Params::M2 { shapes, nu } => shapes[r].t_log_density(x, nu[r]),
            Params::M3 { mu, cauchy } => match label {
                Label::One => {
                    let (mut plus, mut minus) = (0.0, 0.0);
                    for (v, m) in x.iter().zip(mu) {
                        plus += (v - m) * (v - m);
                        minus += (v + m) * (v + m);
                    }
                    let base = -0.5 * self.p as f64 * LN_2PI - LN_2;
                    base + log_sum_exp(-0.5 * plus, -0.5 * minus)
                }
                Label::Two => x
                    .iter()
                    .enumerate()
                    .map(|(j, v)| {
                        if j < *cauchy {
                            -(PI * (1.0 + v * v)).ln()
                        } else {
                            -0.5 * (LN_2PI + v * v)
                        }
                    })
                    .sum(),
            },
            Params::M4 {
                rotation,
                head,
                tail,
            } => {
                let y = self.unrotate(rotation, x);
                head[r].gaussian_log_density(&y[..3])
                    + tail.as_ref().map_or(0.0, |t| t.gaussian_log_density(&y[3..]))
            }
        }
    }

    /// `log(π₁ f₁(x)) - log(π₂ f₂(x))`.
    pub fn log_odds(&self, x: &[f64]) -> f64 {
        let prior = self.pi_1.ln() - (1.0 - self.pi_1).ln();
        match &self.params {
            // The shared tail block cancels.
            Params::M4 { rotation, head, .. } => {
                let y = self.unrotate(rotation, x);
                prior + head[0].gaussian_log_density(&y[..3])
                    - head[1].gaussian_log_density(&y[..3])
            }
            _ => prior + self.log_density(Label::One, x) - self.log_density(Label::Two, x),
        }
    }

    /// `η(x) = P(Y = 1 | X = x)`.
    pub fn eta(&self, x: &[f64]) -> f64 {
        logistic(self.log_odds(x))
    }

    /// The Bayes classifier: class 1 iff `η(x) ≥ 1/2`.
    pub fn bayes_label(&self, x: &[f64]) -> Label {
        if self.log_odds(x) >= 0.0 {
            Label::One
        } else {
            Label::Two
        }
    }

    /// Monte Carlo estimate of `E min(η(X), 1 - η(X))`.
    pub fn bayes_risk<R: Rng + ?Sized>(&self, mc_n: usize, rng: &mut R) -> Result<Estimate> {
        if mc_n < 2 {
            return Err(Error::Config("need at least two Monte Carlo draws".into()));
        }
        let mut x = vec![0.0; self.p];
        let mut acc = Welford::default();
        for _ in 0..mc_n {
            let label = if rng.random::<f64>() < self.pi_1 {
                Label::One
            } else {
                Label::Two
            };
            self.draw_class(label, rng, &mut x);
            acc.push(logistic(-self.log_odds(&x).abs()));
        }
        Ok(acc.estimate())
    }
}

fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// A Monte Carlo mean and its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

/// Running mean and variance.
#[derive(Clone, Copy, Debug, Default)]
pub struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        let delta = v - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (v - self.mean);
    }

    /// Mean with standard error `sd / √n` (sample standard deviation).
    pub fn estimate(&self) -> Estimate {
        let se = if self.n > 1 {
            (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
        } else {
            0.0
        };
        Estimate {
            mean: self.mean,
            se,
            n: self.n,
        }
    }
}

/// Draws from a model, optionally with `η` at each point.
#[derive(Clone, Debug)]
pub struct LabelledSample {
    pub x: DMatrix<f64>,
    pub y: Vec<Label>,
    pub eta: Option<Vec<f64>>,
}

impl LabelledSample {
    pub fn with_truth(mut self, spec: &ModelSpec) -> Self {
        let mut row = vec![0.0; self.x.ncols()];
        let eta = (0..self.x.nrows())
            .map(|i| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = self.x[(i, j)];
                }
                spec.eta(&row)
            })
            .collect();
        self.eta = Some(eta);
        self
    }

    pub fn into_dataset(self) -> Dataset {
        Dataset::new(self.x, self.y).expect("model draws are finite")
    }
}
