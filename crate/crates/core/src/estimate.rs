//! Test-error estimates for a projected-data classifier.
//!
//! Every estimate is an exact count of misclassified evaluation points; the
//! rate is formed by a single division at the end.

use serde::{Deserialize, Serialize};

use crate::base::{BaseKind, BaseModel, Classify};
use crate::data::{Dataset, Label};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Resubstitution,
    LeaveOneOut,
    SampleSplit,
}

/// `errors / m`, kept as the integer pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub errors: usize,
    pub m: usize,
    pub method: Method,
}

impl ErrorEstimate {
    pub fn value(&self) -> f64 {
        self.errors as f64 / self.m as f64
    }
}

/// An estimate plus the prediction made at each evaluation point.
#[derive(Clone, Debug)]
pub struct Assessment {
    pub estimate: ErrorEstimate,
    /// One entry per evaluation point, in order. For leave-one-out this is
    /// the prediction of the refit that excluded the point.
    pub predictions: Vec<Label>,
}

/// What to do when a leave-one-out refit cannot be fitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LooFailure {
    /// Abort with [`Error::EstimationFailed`].
    Abort,
    /// Count the point as misclassified and carry on.
    CountAsError,
}

fn tally(truth: &[Label], predictions: Vec<Label>, method: Method) -> Assessment {
    let errors = truth
        .iter()
        .zip(&predictions)
        .filter(|(t, p)| t != p)
        .count();
    Assessment {
        estimate: ErrorEstimate {
            errors,
            m: truth.len(),
            method,
        },
        predictions,
    }
}

fn predict_all<M: Classify>(model: &M, data: &Dataset) -> Vec<Label> {
    (0..data.n()).map(|i| model.predict(&data.point(i))).collect()
}

/// Training error of the model fitted on all of `train`.
pub fn resubstitution<M, F>(train: &Dataset, fit: F) -> Result<Assessment>
where
    M: Classify,
    F: Fn(&Dataset) -> Result<M>,
{
    let model = fit(train)?;
    Ok(tally(train.y(), predict_all(&model, train), Method::Resubstitution))
}

/// Leave-one-out error by refitting on each `n - 1` subset.
pub fn leave_one_out<M, F>(train: &Dataset, fit: F) -> Result<Assessment>
where
    M: Classify,
    F: Fn(&Dataset) -> Result<M>,
{
    let mut predictions = Vec::with_capacity(train.n());
    for i in 0..train.n() {
        let model = fit(&train.without(i)).map_err(|e| Error::EstimationFailed {
            index: i,
            source: Box::new(e),
        })?;
        predictions.push(model.predict(&train.point(i)));
    }
    Ok(tally(train.y(), predictions, Method::LeaveOneOut))
}

/// Fit on `train1`, count errors on `train2`.
pub fn sample_split<M, F>(train1: &Dataset, train2: &Dataset, fit: F) -> Result<Assessment>
where
    M: Classify,
    F: Fn(&Dataset) -> Result<M>,
{
    if train2.n() == 0 {
        return Err(Error::Data("sample split needs a non-empty evaluation part".into()));
    }
    let model = fit(train1)?;
    if model.dim() != train2.p() {
        return Err(Error::Shape {
            expected: model.dim(),
            found: train2.p(),
        });
    }
    Ok(tally(train2.y(), predict_all(&model, train2), Method::SampleSplit))
}

/// Leave-one-out for a base classifier, using its fast refit path.
pub fn leave_one_out_base(
    train: &Dataset,
    base: BaseKind,
    tie_seed: u64,
    on_failure: LooFailure,
) -> Result<Assessment> {
    let raw = base.loo_predictions(train, tie_seed);
    let mut predictions = Vec::with_capacity(raw.len());
    let mut failed = 0;
    for (i, r) in raw.into_iter().enumerate() {
        match r {
            Ok(l) => predictions.push(l),
            Err(e) => match on_failure {
                LooFailure::Abort => {
                    return Err(Error::EstimationFailed {
                        index: i,
                        source: Box::new(e),
                    })
                }
                LooFailure::CountAsError => {
                    failed += 1;
                    predictions.push(train.label(i).flip());
                }
            },
        }
    }
    if failed > 0 {
        log::warn!("{failed} leave-one-out refits failed and were counted as errors");
    }
    Ok(tally(train.y(), predictions, Method::LeaveOneOut))
}

/// Resubstitution for an already fitted base model.
pub fn resubstitution_base(train: &Dataset, model: &BaseModel) -> Assessment {
    tally(train.y(), predict_all(model, train), Method::Resubstitution)
}
