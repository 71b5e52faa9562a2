//! Row-orthonormal projections from `R^p` to `R^d`.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg;

/// Maximum entry of `A Aᵀ - I` accepted for a projection.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionKind {
    /// Uniform (Haar) over all `d × p` matrices with orthonormal rows.
    Haar,
    /// Rows are distinct standard basis vectors.
    AxisAligned,
}

/// A `d × p` matrix `A` with `A Aᵀ = I_d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    matrix: DMatrix<f64>,
    kind: ProjectionKind,
}

impl Projection {
    /// Draws from Haar measure.
    ///
    /// Fills a `p × d` matrix with independent standard normals and takes the
    /// thin QR factor, with column signs fixed so that `R` has a positive
    /// diagonal. That sign convention makes `Q` exactly Haar distributed.
    pub fn sample_haar<R: Rng + ?Sized>(p: usize, d: usize, rng: &mut R) -> Result<Self> {
        check_dims(p, d)?;
        let g = DMatrix::<f64>::from_fn(p, d, |_, _| rng.sample(StandardNormal));
        let qr = g.qr();
        let r = qr.r();
        let mut q = qr.q();
        for j in 0..d {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        Ok(Projection {
            matrix: q.transpose(),
            kind: ProjectionKind::Haar,
        })
    }

    /// Draws `d` distinct coordinates uniformly without replacement; row `r`
    /// selects the `r`th drawn coordinate.
    pub fn sample_axis_aligned<R: Rng + ?Sized>(p: usize, d: usize, rng: &mut R) -> Result<Self> {
        check_dims(p, d)?;
        let cols = index::sample(rng, p, d);
        let mut matrix = DMatrix::zeros(d, p);
        for (r, c) in cols.iter().enumerate() {
            matrix[(r, c)] = 1.0;
        }
        Ok(Projection {
            matrix,
            kind: ProjectionKind::AxisAligned,
        })
    }

    pub fn sample<R: Rng + ?Sized>(
        kind: ProjectionKind,
        p: usize,
        d: usize,
        rng: &mut R,
    ) -> Result<Self> {
        match kind {
            ProjectionKind::Haar => Projection::sample_haar(p, d, rng),
            ProjectionKind::AxisAligned => Projection::sample_axis_aligned(p, d, rng),
        }
    }

    /// Wraps an existing matrix after checking it is a projection of the
    /// declared kind.
    pub fn from_matrix(matrix: DMatrix<f64>, kind: ProjectionKind) -> Result<Self> {
        check_dims(matrix.ncols(), matrix.nrows())?;
        let defect = linalg::orthonormality_defect(&matrix);
        if !(defect < ORTHONORMAL_TOL) {
            return Err(Error::Data(format!(
                "rows are not orthonormal (max |AAᵀ - I| = {defect:e})"
            )));
        }
        if kind == ProjectionKind::AxisAligned {
            let ok = matrix.row_iter().all(|row| {
                row.iter().filter(|&&v| v == 1.0).count() == 1
                    && row.iter().filter(|&&v| v == 0.0).count() == row.len() - 1
            });
            if !ok {
                return Err(Error::Data("axis-aligned rows must be unit basis vectors".into()));
            }
        }
        Ok(Projection { matrix, kind })
    }

    pub fn d(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn p(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn kind(&self) -> ProjectionKind {
        self.kind
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Projects every row of an `n × p` matrix.
    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.p() {
            return Err(Error::Shape {
                expected: self.p(),
                found: x.ncols(),
            });
        }
        Ok(x * self.matrix.transpose())
    }

    pub fn apply_point(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.p() {
            return Err(Error::Shape {
                expected: self.p(),
                found: x.len(),
            });
        }
        Ok(&self.matrix * DVector::from_row_slice(x))
    }

    pub fn apply_dataset(&self, data: &Dataset) -> Result<Dataset> {
        let z = self.apply(data.x())?;
        Dataset::new(z, data.y().to_vec())
    }

    /// `A Rᵀ`: the same projection expressed in coordinates rotated by the
    /// orthogonal `rotation`, so that `(A Rᵀ)(R x) = A x`.
    pub fn rotated(&self, rotation: &DMatrix<f64>) -> Result<Self> {
        if rotation.nrows() != self.p() || rotation.ncols() != self.p() {
            return Err(Error::Shape {
                expected: self.p(),
                found: rotation.ncols(),
            });
        }
        // A rotated axis-aligned projection is no longer axis-aligned.
        Projection::from_matrix(&self.matrix * rotation.transpose(), ProjectionKind::Haar)
    }
}

fn check_dims(p: usize, d: usize) -> Result<()> {
    if d == 0 || d > p {
        Err(Error::InvalidDimension { d, p })
    } else {
        Ok(())
    }
}
