//! Random-projection ensemble classification.
//!
//! A base classifier (LDA, QDA or k-nearest neighbours) is trained on many
//! random low-dimensional projections of the data. Projections are drawn in
//! blocks; within each block only the projection with the smallest estimated
//! test error is kept. The kept classifiers vote, and a data-driven threshold
//! on the vote fraction decides the final class.
//!
//! ```
//! use rpens::datagen::ModelSpec;
//! use rpens::ensemble::{EnsembleConfig, EnsembleModel};
//! use rpens::base::BaseKind;
//! use rpens::seed;
//!
//! let spec = ModelSpec::model3(20, 0.5).unwrap();
//! let train = spec.sample(100, &mut seed::rng(1)).into_dataset();
//! let test = spec.sample(200, &mut seed::rng(2)).into_dataset();
//!
//! let mut cfg = EnsembleConfig::new(5, BaseKind::Qda);
//! cfg.b1 = 20;
//! cfg.b2 = 10;
//! let model = EnsembleModel::fit(&train, &cfg).unwrap();
//! let err = model.test_error(&test).unwrap();
//! assert!(err < 0.5);
//! ```

pub mod base;
pub mod data;
pub mod datagen;
pub mod ensemble;
pub mod error;
pub mod estimate;
pub mod evaluation;
pub mod io;
pub mod linalg;
pub mod projection;
pub mod seed;

pub use crate::data::{Dataset, Label};
pub use crate::error::{Error, Result};
pub use crate::projection::{Projection, ProjectionKind};
