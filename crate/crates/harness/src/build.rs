// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The PASS Authors

//! Optimizer plus materialization in one call, shared by the CLI and the
//! benchmark.

use pass_core::optimizer1d::{self, Method, OptimizerConfig};
use pass_core::optimizer_kd::{self, Fanout, KdConfig};
use pass_core::synopsis::BuildMetadata;
use pass_core::{AggregateKind, Dataset, EstimatorConfig, Rect, Synopsis};
use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub method: Method,
    /// Leaf count (an upper bound for kd-greedy).
    pub k: usize,
    /// Total sample budget K across leaves.
    pub samples: usize,
    pub delta: f64,
    /// Optimization sample size; 0 uses every tuple.
    pub m: usize,
    pub objective: AggregateKind,
    /// Dimension partitioned by the 1-D methods.
    pub dim: usize,
    /// Fanout of the tree above 1-D leaves.
    pub tree_fanout: usize,
    pub kd_fanout: Fanout,
    pub estimator: EstimatorConfig,
    pub seed: u64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            method: Method::FastDp,
            k: 32,
            samples: 1_000,
            delta: optimizer1d::DEFAULT_DELTA,
            m: 10_000,
            objective: AggregateKind::Sum,
            dim: 0,
            tree_fanout: 2,
            kd_fanout: Fanout::Binary,
            estimator: EstimatorConfig::default(),
            seed: 0,
        }
    }
}

fn widen(rect: &Rect, dim: usize, d: usize) -> Rect {
    Rect::unbounded(d)
        .with_bounds(dim, rect.lo()[0], rect.hi()[0])
        .expect("1-D leaf bounds are ordered")
}

pub fn build_synopsis(data: &Dataset, cfg: &BuildConfig) -> Result<Synopsis> {
    let d = data.dimension();
    let m = if cfg.m == 0 { data.len() } else { cfg.m.min(data.len()) };
    let synopsis = match cfg.method {
        Method::KdGreedy => {
            let kd = KdConfig {
                k: cfg.k,
                fanout: cfg.kd_fanout,
                delta: cfg.delta,
                m: cfg.m,
                objective: cfg.objective,
                seed: cfg.seed,
                ..KdConfig::default()
            };
            let layout = optimizer_kd::optimize(data, &kd)?.layout;
            Synopsis::build_from_layout(data, &layout, cfg.samples, cfg.estimator, cfg.seed)?
        }
        method => {
            let opt = OptimizerConfig {
                k: cfg.k,
                delta: cfg.delta,
                m: cfg.m,
                method,
                objective: cfg.objective,
                seed: cfg.seed,
                ..OptimizerConfig::default()
            };
            let leaves = optimizer1d::optimize(data, cfg.dim, &opt)?.leaves;
            let leaves = if d == 1 {
                leaves
            } else {
                leaves.iter().map(|r| widen(r, cfg.dim, d)).collect()
            };
            Synopsis::build(data, leaves, cfg.samples, cfg.tree_fanout, cfg.estimator, cfg.seed)?
        }
    };
    Ok(synopsis.with_metadata(BuildMetadata {
        method: cfg.method.as_str().to_string(),
        delta: cfg.delta,
        optimization_samples: m,
        seed: cfg.seed,
        sample_budget: cfg.samples,
    }))
}
