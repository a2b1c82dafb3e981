// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The PASS Authors

//! Methods the benchmark can compare. Anything implementing [`AqpMethod`]
//! can be added to a run through [`crate::bench::run_bench_with`].

use std::fmt;
use std::str::FromStr;

use pass_core::optimizer1d::Method;
use pass_core::{Dataset, Estimate, Query, Synopsis};

use crate::baselines::{StratifiedBaseline, UniformBaseline};
use crate::build::{build_synopsis, BuildConfig};
use crate::error::{HarnessError, Result};

pub trait AqpMethod: Send + Sync {
    fn answer(&self, query: &Query) -> pass_core::Result<Estimate>;
}

impl AqpMethod for Synopsis {
    fn answer(&self, query: &Query) -> pass_core::Result<Estimate> {
        Synopsis::answer(self, query)
    }
}

impl AqpMethod for UniformBaseline {
    fn answer(&self, query: &Query) -> pass_core::Result<Estimate> {
        UniformBaseline::answer(self, query)
    }
}

impl AqpMethod for StratifiedBaseline {
    fn answer(&self, query: &Query) -> pass_core::Result<Estimate> {
        StratifiedBaseline::answer(self, query)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodSpec {
    /// The synopsis; `None` picks fast-dp in 1-D and kd-greedy otherwise.
    Pass(Option<Method>),
    Uniform,
    StratifiedEq,
}

impl MethodSpec {
    pub fn optimizer(self, dimension: usize) -> Option<Method> {
        match self {
            MethodSpec::Pass(Some(m)) => Some(m),
            MethodSpec::Pass(None) if dimension == 1 => Some(Method::FastDp),
            MethodSpec::Pass(None) => Some(Method::KdGreedy),
            _ => None,
        }
    }

    /// Builds the method with the shared budget: K samples for everyone,
    /// plus k leaves (PASS) or k strata (STRATIFIED_EQ).
    pub fn prepare(self, data: &Dataset, cfg: &BuildConfig) -> Result<Box<dyn AqpMethod>> {
        Ok(match self {
            MethodSpec::Pass(_) => {
                let method = self.optimizer(data.dimension()).expect("pass has an optimizer");
                Box::new(build_synopsis(data, &BuildConfig { method, ..cfg.clone() })?)
            }
            MethodSpec::Uniform => {
                Box::new(UniformBaseline::prepare(data, cfg.samples, cfg.estimator, cfg.seed)?)
            }
            MethodSpec::StratifiedEq => Box::new(StratifiedBaseline::prepare(
                data,
                cfg.samples,
                cfg.k,
                cfg.estimator,
                cfg.seed,
            )?),
        })
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodSpec::Pass(None) => f.write_str("pass"),
            MethodSpec::Pass(Some(m)) => write!(f, "pass:{m}"),
            MethodSpec::Uniform => f.write_str("uniform"),
            MethodSpec::StratifiedEq => f.write_str("stratified-eq"),
        }
    }
}

impl FromStr for MethodSpec {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "pass" => Ok(MethodSpec::Pass(None)),
            "uniform" => Ok(MethodSpec::Uniform),
            "stratified-eq" | "stratified" => Ok(MethodSpec::StratifiedEq),
            other => match other.strip_prefix("pass:") {
                Some(m) => m
                    .parse::<Method>()
                    .map(|m| MethodSpec::Pass(Some(m)))
                    .map_err(|e| HarnessError::Config(e.to_string())),
                None => Err(HarnessError::Config(format!("unknown method {other:?}"))),
            },
        }
    }
}
