use nalgebra::{DMatrix, DVector};

use crate::data::{Dataset, Label};

/// Count, mean and scatter matrix `Σ (z - mean)(z - mean)ᵀ` of one class.
#[derive(Clone, Debug)]
pub(crate) struct ClassStats {
    pub count: usize,
    pub mean: DVector<f64>,
    pub scatter: DMatrix<f64>,
}

impl ClassStats {
    pub fn of(data: &Dataset, label: Label) -> ClassStats {
        let d = data.p();
        let x = data.x();
        let rows: Vec<usize> = (0..data.n()).filter(|&i| data.label(i) == label).collect();
        let count = rows.len();
        let mut mean = DVector::zeros(d);
        for &i in &rows {
            for j in 0..d {
                mean[j] += x[(i, j)];
            }
        }
        if count > 0 {
            mean /= count as f64;
        }
        let mut scatter = DMatrix::zeros(d, d);
        let mut c = vec![0.0; d];
        for &i in &rows {
            for j in 0..d {
                c[j] = x[(i, j)] - mean[j];
            }
            for a in 0..d {
                for b in 0..=a {
                    scatter[(a, b)] += c[a] * c[b];
                }
            }
        }
        symmetrize_lower(&mut scatter);
        ClassStats {
            count,
            mean,
            scatter,
        }
    }

    /// Statistics after removing the point `z`, which must belong to the class.
    pub fn without(&self, z: &[f64]) -> ClassStats {
        let d = self.mean.len();
        let m = self.count;
        if m <= 1 {
            return ClassStats {
                count: 0,
                mean: DVector::zeros(d),
                scatter: DMatrix::zeros(d, d),
            };
        }
        let diff: Vec<f64> = (0..d).map(|j| z[j] - self.mean[j]).collect();
        let mut mean = self.mean.clone();
        for j in 0..d {
            mean[j] -= diff[j] / (m - 1) as f64;
        }
        let w = m as f64 / (m - 1) as f64;
        let mut scatter = self.scatter.clone();
        for a in 0..d {
            for b in 0..=a {
                scatter[(a, b)] -= w * diff[a] * diff[b];
            }
        }
        symmetrize_lower(&mut scatter);
        ClassStats {
            count: m - 1,
            mean,
            scatter,
        }
    }
}

fn symmetrize_lower(m: &mut DMatrix<f64>) {
    let d = m.nrows();
    for a in 0..d {
        for b in 0..a {
            m[(b, a)] = m[(a, b)];
        }
    }
}
