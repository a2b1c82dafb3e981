// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The PASS Authors

//! Benchmark harness around `pass-core`: CSV ingestion, query workloads,
//! ground truth, sampling baselines and accuracy reports.

pub mod baselines;
pub mod bench;
pub mod build;
pub mod cli;
pub mod error;
pub mod ingest;
pub mod methods;
pub mod synth;
pub mod truth;
pub mod workload;

pub use error::{HarnessError, Result};
