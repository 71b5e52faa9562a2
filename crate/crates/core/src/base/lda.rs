//! Linear discriminant analysis with a pooled covariance estimate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::stats::ClassStats;
use super::Classify;
use crate::data::{Dataset, Label};
use crate::error::{Error, Result};
use crate::io::serde_matrix;
use crate::linalg;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub pi_hat_1: f64,
    pub pi_hat_2: f64,
    #[serde(with = "serde_matrix::vector")]
    pub mu_hat_1: DVector<f64>,
    #[serde(with = "serde_matrix::vector")]
    pub mu_hat_2: DVector<f64>,
    /// Pooled covariance (after any ridge), the matrix `omega_hat` inverts.
    #[serde(with = "serde_matrix::matrix")]
    pub sigma_hat: DMatrix<f64>,
    #[serde(with = "serde_matrix::matrix")]
    pub omega_hat: DMatrix<f64>,
    /// `omega_hat (mu_hat_1 - mu_hat_2)`.
    #[serde(with = "serde_matrix::vector")]
    direction: DVector<f64>,
}

/// Fits LDA. The pooled covariance uses divisor `n - 2`.
pub fn fit_lda(data: &Dataset) -> Result<LdaModel> {
    let s1 = ClassStats::of(data, Label::One);
    let s2 = ClassStats::of(data, Label::Two);
    LdaModel::from_stats(&s1, &s2)
}

impl LdaModel {
    pub(crate) fn from_stats(s1: &ClassStats, s2: &ClassStats) -> Result<LdaModel> {
        if s1.count == 0 {
            return Err(Error::MissingClass(Label::One));
        }
        if s2.count == 0 {
            return Err(Error::MissingClass(Label::Two));
        }
        let d = s1.mean.len();
        let n = s1.count + s2.count;
        if n < d + 2 {
            return Err(Error::TooFewPoints {
                needed: d + 2,
                found: n,
            });
        }
        let sigma = (&s1.scatter + &s2.scatter) / (n - 2) as f64;
        let pi1 = s1.count as f64 / n as f64;
        let pi2 = s2.count as f64 / n as f64;
        LdaModel::build(pi1, pi2, s1.mean.clone(), s2.mean.clone(), sigma)
    }

    /// A model with the given parameters (class-1 prior, means, shared
    /// covariance).
    pub fn from_parts(
        pi_1: f64,
        mu_1: DVector<f64>,
        mu_2: DVector<f64>,
        sigma: DMatrix<f64>,
    ) -> Result<LdaModel> {
        if !(pi_1 > 0.0 && pi_1 < 1.0) {
            return Err(Error::Config(format!("prior must lie in (0,1), got {pi_1}")));
        }
        if mu_1.len() != mu_2.len() || sigma.nrows() != mu_1.len() || !sigma.is_square() {
            return Err(Error::Shape {
                expected: mu_1.len(),
                found: sigma.ncols(),
            });
        }
        LdaModel::build(pi_1, 1.0 - pi_1, mu_1, mu_2, sigma)
    }

    fn build(
        pi1: f64,
        pi2: f64,
        mu1: DVector<f64>,
        mu2: DVector<f64>,
        sigma: DMatrix<f64>,
    ) -> Result<LdaModel> {
        let (ch, ridge) = linalg::factor_covariance(&sigma)?;
        let omega = ch.inverse();
        let omega = (&omega + omega.transpose()) * 0.5;
        let direction = &omega * (&mu1 - &mu2);
        let d = sigma.nrows();
        let sigma_hat = sigma + DMatrix::identity(d, d) * ridge;
        Ok(LdaModel {
            pi_hat_1: pi1,
            pi_hat_2: pi2,
            mu_hat_1: mu1,
            mu_hat_2: mu2,
            sigma_hat,
            omega_hat: omega,
            direction,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu_hat_1.len()
    }

    /// `log(π̂₁/π̂₂) + (z - (μ̂₁+μ̂₂)/2)ᵀ Ω̂ (μ̂₁ - μ̂₂)`.
    pub fn discriminant(&self, z: &[f64]) -> f64 {
        let mut acc = (self.pi_hat_1 / self.pi_hat_2).ln();
        for j in 0..z.len() {
            let mid = (self.mu_hat_1[j] + self.mu_hat_2[j]) / 2.0;
            acc += (z[j] - mid) * self.direction[j];
        }
        acc
    }

    /// Exact test error of this fitted rule when the classes are
    /// `N(mu_1, sigma)` and `N(mu_2, sigma)` with class-1 prior `pi_1`.
    pub fn closed_form_test_error(
        &self,
        pi_1: f64,
        mu_1: &DVector<f64>,
        mu_2: &DVector<f64>,
        sigma: &DMatrix<f64>,
    ) -> Result<f64> {
        let d = self.dim();
        if mu_1.len() != d || mu_2.len() != d || sigma.nrows() != d || sigma.ncols() != d {
            return Err(Error::Shape {
                expected: d,
                found: sigma.ncols(),
            });
        }
        linalg::cholesky_lower(sigma)?;
        let pi_2 = 1.0 - pi_1;
        let delta = &self.mu_hat_2 - &self.mu_hat_1;
        let mean_hat = (&self.mu_hat_1 + &self.mu_hat_2) * 0.5;
        let w = &self.omega_hat * &delta;
        let spread = (w.transpose() * sigma * &w)[(0, 0)].max(0.0).sqrt();
        let log_ratio = (self.pi_hat_1 / self.pi_hat_2).ln();
        if spread == 0.0 {
            // Constant rule.
            return Ok(if log_ratio >= 0.0 { pi_2 } else { pi_1 });
        }
        let a1 = (-log_ratio - w.dot(&(&mean_hat - mu_1))) / spread;
        let a2 = (log_ratio + w.dot(&(&mean_hat - mu_2))) / spread;
        let risk = pi_1 * linalg::normal_cdf(a1) + pi_2 * linalg::normal_cdf(a2);
        Ok(risk.clamp(0.0, 1.0))
    }
}

impl Classify for LdaModel {
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
