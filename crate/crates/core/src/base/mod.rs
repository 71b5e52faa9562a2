//! Base classifiers applied to projected data.

pub mod knn;
pub mod lda;
pub mod qda;
mod stats;

use serde::{Deserialize, Serialize};

pub use self::knn::{default_k, fit_knn, KnnModel};
pub use self::lda::{fit_lda, LdaModel};
pub use self::qda::{fit_qda, QdaModel};

use self::stats::ClassStats;
use crate::data::{Dataset, Label};
use crate::error::{Error, Result};

/// A trained classifier on `R^d`.
pub trait Classify {
    fn dim(&self) -> usize;
    fn predict(&self, z: &[f64]) -> Label;
}

/// Which base classifier to train.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseKind {
    Lda,
    Qda,
    Knn { k: usize },
}

impl BaseKind {
    pub fn fit(&self, data: &Dataset, tie_seed: u64) -> Result<BaseModel> {
        Ok(match *self {
            BaseKind::Lda => BaseModel::Lda(fit_lda(data)?),
            BaseKind::Qda => BaseModel::Qda(fit_qda(data)?),
            BaseKind::Knn { k } => BaseModel::Knn(fit_knn(data, k, tie_seed)?),
        })
    }

    /// Leave-one-out prediction at each training point from a refit on the
    /// other `n - 1` points. Failed refits are reported per point.
    ///
    /// LDA and QDA downdate the class statistics instead of refitting from
    /// scratch; kNN reuses one pairwise distance table.
    pub fn loo_predictions(&self, data: &Dataset, tie_seed: u64) -> Vec<Result<Label>> {
        match *self {
            BaseKind::Knn { k } => knn::loo_predictions(data, k, tie_seed),
            BaseKind::Lda | BaseKind::Qda => {
                let stats = [
                    ClassStats::of(data, Label::One),
                    ClassStats::of(data, Label::Two),
                ];
                (0..data.n())
                    .map(|i| {
                        let z = data.point(i);
                        let r = data.label(i).index();
                        let mut s = stats.clone();
                        s[r] = stats[r].without(&z);
                        let model: Result<BaseModel> = match self {
                            BaseKind::Lda => LdaModel::from_stats(&s[0], &s[1]).map(BaseModel::Lda),
                            _ => QdaModel::from_stats(&s[0], &s[1]).map(BaseModel::Qda),
                        };
                        model.map(|m| m.predict(&z))
                    })
                    .collect()
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            BaseKind::Lda => "lda".into(),
            BaseKind::Qda => "qda".into(),
            BaseKind::Knn { k } => format!("knn{k}"),
        }
    }

    /// Checks that `d`-dimensional fits are at least possible with `n` points.
    pub fn check_feasible(&self, n: usize, d: usize) -> Result<()> {
        let needed = match *self {
            BaseKind::Lda => d + 2,
            BaseKind::Qda => 2 * (d + 1),
            BaseKind::Knn { k } => k,
        };
        if n < needed {
            Err(Error::TooFewPoints { needed, found: n })
        } else {
            Ok(())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseModel {
    Lda(LdaModel),
    Qda(QdaModel),
    Knn(KnnModel),
}

impl Classify for BaseModel {
    fn dim(&self) -> usize {
        match self {
            BaseModel::Lda(m) => m.dim(),
            BaseModel::Qda(m) => m.dim(),
            BaseModel::Knn(m) => Classify::dim(m),
        }
    }

    fn predict(&self, z: &[f64]) -> Label {
        match self {
            BaseModel::Lda(m) => m.predict(z),
            BaseModel::Qda(m) => m.predict(z),
            BaseModel::Knn(m) => m.predict(z),
        }
    }
}

impl BaseModel {
    pub fn predict_checked(&self, z: &[f64]) -> Result<Label> {
        if z.len() != self.dim() {
            return Err(Error::Shape {
                expected: self.dim(),
                found: z.len(),
            });
        }
        Ok(self.predict(z))
    }
}
