// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The PASS Authors

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value at tuple {index}")]
    NonFinite { index: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid rectangle: lo > hi in dimension {dim}")]
    InvalidRect { dim: usize },

    /// An AVG/MIN/MAX estimate had no matching sampled tuple. When produced by
    /// a synopsis the deterministic bounds are still reported.
    #[error("no sampled tuple matches the predicate")]
    NoMatchingSample { bounds: Option<(f64, f64)> },

    #[error("empty range")]
    EmptyRange,

    #[error("build error: {0}")]
    Build(String),

    #[error("infeasible partitioning: {0}")]
    Infeasible(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("serialization error: {0}")]
    Serialization(String),
}
