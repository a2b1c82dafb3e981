// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The PASS Authors

//! Partitioned approximate aggregation: a tree of exact partition aggregates
//! with stratified samples at the leaves, plus optimizers that choose the
//! leaf partitioning.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`). The
//! aliases at the crate root fix the scalar to `f64`; the `f32` module holds
//! the single precision variants.

pub mod error;
pub mod estimators;
pub mod model;
pub mod optimizer1d;
pub mod optimizer_kd;
pub mod oracle;
pub mod persist;
pub mod scalar;
pub mod synopsis;

pub use error::{Error, Result};
pub use estimators::{EstimatorConfig, DEFAULT_LAMBDA};
pub use model::{AggregateKind, Overlap};
pub use scalar::Scalar;

pub type Tuple = model::Tuple<f64>;
pub type Dataset = model::Dataset<f64>;
pub type Rect = model::Rect<f64>;
pub type Query = model::Query<f64>;
pub type Estimate = estimators::Estimate<f64>;
pub type Synopsis = synopsis::Synopsis<f64>;

/// Single precision aliases.
pub mod f32 {
    pub type Tuple = crate::model::Tuple<f32>;
    pub type Dataset = crate::model::Dataset<f32>;
    pub type Rect = crate::model::Rect<f32>;
    pub type Query = crate::model::Query<f32>;
    pub type Estimate = crate::estimators::Estimate<f32>;
    pub type Synopsis = crate::synopsis::Synopsis<f32>;
}
