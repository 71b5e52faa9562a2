//! Small dense helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative ridge added once when a covariance estimate fails to factorise.
pub const RIDGE_EPS: f64 = 1e-8;

/// Cholesky factorisation of a covariance estimate, with a single ridge
/// fallback `eps * trace/d * I`. Returns the factor and the ridge added
/// (zero when none was needed).
pub fn factor_covariance(sigma: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if let Some(ch) = Cholesky::new(sigma.clone()) {
        if is_well_factored(&ch) {
            return Ok((ch, 0.0));
        }
    }
    let d = sigma.nrows();
    let scale = sigma.trace() / d as f64;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Singular);
    }
    let ridge = RIDGE_EPS * scale;
    let ridged = sigma + DMatrix::identity(d, d) * ridge;
    match Cholesky::new(ridged) {
        Some(ch) if is_well_factored(&ch) => {
            log::debug!("covariance needed ridge regularisation");
            Ok((ch, ridge))
        }
        _ => Err(Error::Singular),
    }
}

// nalgebra accepts factors with denormal pivots; treat those as singular.
fn is_well_factored(ch: &Cholesky<f64, Dyn>) -> bool {
    let l = ch.l_dirty();
    let max = (0..l.nrows()).map(|i| l[(i, i)]).fold(0.0_f64, f64::max);
    (0..l.nrows()).all(|i| {
        let v = l[(i, i)];
        v.is_finite() && v > max * 1e-12
    })
}

/// `log det` from a Cholesky factor.
pub fn log_det(ch: &Cholesky<f64, Dyn>) -> f64 {
    let l = ch.l_dirty();
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

/// `vᵀ Σ⁻¹ v` given the lower Cholesky factor of Σ, by forward substitution.
pub fn mahalanobis_sq(l: &DMatrix<f64>, v: &[f64]) -> f64 {
    let d = v.len();
    let mut w = [0.0_f64; 16];
    let mut heap;
    let w: &mut [f64] = if d <= 16 {
        &mut w[..d]
    } else {
        heap = vec![0.0; d];
        &mut heap
    };
    let mut acc = 0.0;
    for i in 0..d {
        let mut s = v[i];
        for j in 0..i {
            s -= l[(i, j)] * w[j];
        }
        let wi = s / l[(i, i)];
        w[i] = wi;
        acc += wi * wi;
    }
    acc
}

/// Lower Cholesky factor of an SPD matrix, or an error.
pub fn cholesky_lower(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Cholesky::new(m.clone())
        .map(|c| c.l())
        .ok_or(Error::NotPositiveDefinite)
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Largest absolute entry of `a aᵀ - I`.
pub fn orthonormality_defect(a: &DMatrix<f64>) -> f64 {
    let g = a * a.transpose();
    let d = g.nrows();
    let mut worst = 0.0_f64;
    for i in 0..d {
        for j in 0..d {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mahalanobis_matches_explicit_inverse() {
        let s = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let l = cholesky_lower(&s).unwrap();
        let v = [0.3, -1.2, 2.0];
        let inv = s.clone().try_inverse().unwrap();
        let vv = DVector::from_row_slice(&v);
        let expected = (vv.transpose() * inv * &vv)[(0, 0)];
        assert_relative_eq!(mahalanobis_sq(&l, &v), expected, epsilon = 1e-12);
    }

    #[test]
    fn ridge_rescues_rank_deficient_but_not_zero() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(factor_covariance(&s).is_ok());
        let z = DMatrix::zeros(2, 2);
        assert!(matches!(factor_covariance(&z), Err(Error::Singular)));
    }

    #[test]
    fn normal_cdf_values() {
        assert_relative_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_relative_eq!(normal_cdf(-1.0), 0.158_655_253_931_457_05, epsilon = 1e-12);
        assert_relative_eq!(normal_cdf(1.959_963_984_540_054), 0.975, epsilon = 1e-12);
    }
}
