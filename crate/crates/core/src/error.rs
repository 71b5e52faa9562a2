use thiserror::Error;

use crate::data::Label;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid projection dimension: d = {d}, p = {p} (need 1 <= d <= p)")]
    InvalidDimension { d: usize, p: usize },

    #[error("shape mismatch: expected {expected} columns, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("class {0} has no training points")]
    MissingClass(Label),

    #[error("not enough training points: need at least {needed}, found {found}")]
    TooFewPoints { needed: usize, found: usize },

    #[error("covariance estimate is singular even after ridge regularisation")]
    Singular,

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("leave-one-out refit failed at point {index}: {source}")]
    EstimationFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("every projection in block {block} failed to fit")]
    BlockFailed { block: usize },

    #[error("cannot estimate a voting threshold: {0}")]
    DegenerateAlpha(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("model file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the failure came from numerical trouble (as opposed to bad
    /// input or configuration).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Singular | Error::NotPositiveDefinite | Error::DegenerateAlpha(_) => true,
            Error::BlockFailed { .. } => true,
            Error::EstimationFailed { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
