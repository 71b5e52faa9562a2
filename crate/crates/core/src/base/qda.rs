//! Quadratic discriminant analysis.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::stats::ClassStats;
use super::Classify;
use crate::data::{Dataset, Label};
use crate::error::{Error, Result};
use crate::io::serde_matrix;
use crate::linalg;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QdaModel {
    pub pi_hat_1: f64,
    pub pi_hat_2: f64,
    #[serde(with = "serde_matrix::vector")]
    pub mu_hat_1: DVector<f64>,
    #[serde(with = "serde_matrix::vector")]
    pub mu_hat_2: DVector<f64>,
    #[serde(with = "serde_matrix::matrix")]
    pub sigma_hat_1: DMatrix<f64>,
    #[serde(with = "serde_matrix::matrix")]
    pub sigma_hat_2: DMatrix<f64>,
    pub log_det_1: f64,
    pub log_det_2: f64,
    #[serde(with = "serde_matrix::matrix")]
    pub inverse_1: DMatrix<f64>,
    #[serde(with = "serde_matrix::matrix")]
    pub inverse_2: DMatrix<f64>,
    // Lower Cholesky factors used for prediction.
    #[serde(with = "serde_matrix::matrix")]
    chol_1: DMatrix<f64>,
    #[serde(with = "serde_matrix::matrix")]
    chol_2: DMatrix<f64>,
}

/// Fits QDA. Per-class covariances use divisor `n_r - 1`.
pub fn fit_qda(data: &Dataset) -> Result<QdaModel> {
    let s1 = ClassStats::of(data, Label::One);
    let s2 = ClassStats::of(data, Label::Two);
    QdaModel::from_stats(&s1, &s2)
}

struct Factored {
    sigma: DMatrix<f64>,
    chol: DMatrix<f64>,
    inverse: DMatrix<f64>,
    log_det: f64,
}

fn factor(sigma: DMatrix<f64>) -> Result<Factored> {
    let (ch, ridge) = linalg::factor_covariance(&sigma)?;
    let d = sigma.nrows();
    let inverse = ch.inverse();
    Ok(Factored {
        sigma: sigma + DMatrix::identity(d, d) * ridge,
        chol: ch.l(),
        inverse,
        log_det: linalg::log_det(&ch),
    })
}

impl QdaModel {
    pub(crate) fn from_stats(s1: &ClassStats, s2: &ClassStats) -> Result<QdaModel> {
        let d = s1.mean.len();
        for (s, label) in [(s1, Label::One), (s2, Label::Two)] {
            if s.count == 0 {
                return Err(Error::MissingClass(label));
            }
            if s.count < d + 1 {
                return Err(Error::TooFewPoints {
                    needed: d + 1,
                    found: s.count,
                });
            }
        }
        let n = (s1.count + s2.count) as f64;
        let sigma1 = &s1.scatter / (s1.count - 1) as f64;
        let sigma2 = &s2.scatter / (s2.count - 1) as f64;
        QdaModel::build(
            s1.count as f64 / n,
            s2.count as f64 / n,
            s1.mean.clone(),
            s2.mean.clone(),
            sigma1,
            sigma2,
        )
    }

    /// A model with the given class-1 prior, means and covariances.
    pub fn from_parts(
        pi_1: f64,
        mu_1: DVector<f64>,
        mu_2: DVector<f64>,
        sigma_1: DMatrix<f64>,
        sigma_2: DMatrix<f64>,
    ) -> Result<QdaModel> {
        if !(pi_1 > 0.0 && pi_1 < 1.0) {
            return Err(Error::Config(format!("prior must lie in (0,1), got {pi_1}")));
        }
        let d = mu_1.len();
        for s in [&sigma_1, &sigma_2] {
            if s.nrows() != d || s.ncols() != d || mu_2.len() != d {
                return Err(Error::Shape {
                    expected: d,
                    found: s.ncols(),
                });
            }
        }
        QdaModel::build(pi_1, 1.0 - pi_1, mu_1, mu_2, sigma_1, sigma_2)
    }

    fn build(
        pi1: f64,
        pi2: f64,
        mu1: DVector<f64>,
        mu2: DVector<f64>,
        sigma1: DMatrix<f64>,
        sigma2: DMatrix<f64>,
    ) -> Result<QdaModel> {
        let f1 = factor(sigma1)?;
        let f2 = factor(sigma2)?;
        Ok(QdaModel {
            pi_hat_1: pi1,
            pi_hat_2: pi2,
            mu_hat_1: mu1,
            mu_hat_2: mu2,
            sigma_hat_1: f1.sigma,
            sigma_hat_2: f2.sigma,
            log_det_1: f1.log_det,
            log_det_2: f2.log_det,
            inverse_1: f1.inverse,
            inverse_2: f2.inverse,
            chol_1: f1.chol,
            chol_2: f2.chol,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu_hat_1.len()
    }

    /// The quadratic discriminant Δ(z); class 1 when non-negative.
    ///
    /// Evaluated as
    /// `log(π̂₁/π̂₂) - ½ log(det Σ̂₁ / det Σ̂₂) - ½ q₁(z) + ½ q₂(z)` with
    /// `q_r(z) = (z - μ̂_r)ᵀ Σ̂_r⁻¹ (z - μ̂_r)`, which expands to the usual
    /// quadratic-plus-linear form.
    pub fn discriminant(&self, z: &[f64]) -> f64 {
        let d = z.len();
        let mut v1 = [0.0; 16];
        let mut v2 = [0.0; 16];
        let (q1, q2) = if d <= 16 {
            for j in 0..d {
                v1[j] = z[j] - self.mu_hat_1[j];
                v2[j] = z[j] - self.mu_hat_2[j];
            }
            (
                linalg::mahalanobis_sq(&self.chol_1, &v1[..d]),
                linalg::mahalanobis_sq(&self.chol_2, &v2[..d]),
            )
        } else {
            let a: Vec<f64> = (0..d).map(|j| z[j] - self.mu_hat_1[j]).collect();
            let b: Vec<f64> = (0..d).map(|j| z[j] - self.mu_hat_2[j]).collect();
            (
                linalg::mahalanobis_sq(&self.chol_1, &a),
                linalg::mahalanobis_sq(&self.chol_2, &b),
            )
        };
        (self.pi_hat_1 / self.pi_hat_2).ln() - 0.5 * (self.log_det_1 - self.log_det_2) - 0.5 * q1
            + 0.5 * q2
    }
}

impl Classify for QdaModel {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn predict(&self, z: &[f64]) -> Label {
        if self.discriminant(z) >= 0.0 {
            Label::One
        } else {
            Label::Two
        }
    }
}
