// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The PASS Authors

//! Sampling baselines without precomputed aggregates: one uniform sample, or
//! equal-population strata along dimension 0.

use pass_core::estimators::{
    combine_strata, estimate_uniform, stratum_estimate, StratumEstimate, StratumSample,
};
use pass_core::optimizer1d::equal_count_partition;
use pass_core::{Dataset, Error, Estimate, EstimatorConfig, Query, Scalar};

use crate::error::{HarnessError, Result};

/// Seed of stratum `i`; stratum 0 keeps the base seed.
pub fn stratum_seed(seed: u64, i: usize) -> u64 {
    seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

#[derive(Debug, Clone)]
pub struct UniformBaseline {
    sample: StratumSample<f64>,
    cfg: EstimatorConfig,
}

impl UniformBaseline {
    pub fn prepare(data: &Dataset, budget: usize, cfg: EstimatorConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let members: Vec<usize> = (0..data.len()).collect();
        let sample = StratumSample::draw(data, &members, budget.min(data.len()), seed)?;
        Ok(Self { sample, cfg })
    }

    pub fn sample(&self) -> &StratumSample<f64> {
        &self.sample
    }

    pub fn answer(&self, query: &Query) -> pass_core::Result<Estimate> {
        estimate_uniform(&self.sample, query, &self.cfg)
    }
}

#[derive(Debug, Clone)]
pub struct StratifiedBaseline {
    strata: Vec<StratumSample<f64>>,
    cfg: EstimatorConfig,
}

impl StratifiedBaseline {
    /// `strata` equal-population groups by dimension 0 rank, each sampled
    /// with `budget / strata` tuples (the remainder goes to the first ones).
    pub fn prepare(
        data: &Dataset,
        budget: usize,
        strata: usize,
        cfg: EstimatorConfig,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        if strata == 0 || budget < strata {
            return Err(HarnessError::Config(format!(
                "{strata} strata need a budget of at least one sample each, got {budget}"
            )));
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.sort_by(|&a, &b| data.point(a)[0].order(&data.point(b)[0]).then(a.cmp(&b)));
        let cuts = equal_count_partition(data.len(), strata)?;
        let (base, extra) = (budget / strata, budget % strata);
        let mut out = Vec::with_capacity(strata);
        for (i, w) in cuts.windows(2).enumerate() {
            let mut members = order[w[0]..w[1]].to_vec();
            members.sort_unstable();
            let size = (base + usize::from(i < extra)).min(members.len());
            out.push(StratumSample::draw(data, &members, size, stratum_seed(seed, i))?);
        }
        Ok(Self { strata: out, cfg })
    }

    pub fn strata(&self) -> &[StratumSample<f64>] {
        &self.strata
    }

    /// Combines every stratum; there is no skipping and no hard bound.
    pub fn answer(&self, query: &Query) -> pass_core::Result<Estimate> {
        let mut parts = Vec::with_capacity(self.strata.len());
        for s in &self.strata {
            let est = match stratum_estimate(s, query, &self.cfg) {
                Ok(e) => e,
                Err(Error::NoMatchingSample { .. }) => {
                    StratumEstimate::no_match(s.population(), s.len())
                }
                Err(e) => return Err(e),
            };
            parts.push(est);
        }
        combine_strata(query.kind, &parts, &self.cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pass_core::{AggregateKind, Rect, Tuple};

    fn data(n: usize, constant: bool) -> Dataset {
        let tuples = (0..n)
            .map(|i| {
                let v = if constant { 4.0 } else { ((i * 37) % 101) as f64 };
                Tuple::new(vec![((i * 7919) % n) as f64], v)
            })
            .collect();
        Dataset::new(1, tuples).unwrap()
    }

    fn q(kind: AggregateKind, lo: f64, hi: f64) -> Query {
        Query::new(kind, Rect::interval(lo, hi).unwrap())
    }

    #[test]
    fn full_uniform_sample_is_exact() {
        let d = data(300, false);
        let u = UniformBaseline::prepare(&d, 300, EstimatorConfig::default(), 1).unwrap();
        for kind in [AggregateKind::Sum, AggregateKind::Count, AggregateKind::Avg] {
            let query = q(kind, 20.0, 170.0);
            let e = u.answer(&query).unwrap();
            let t = crate::truth::ground_truth(&d, &query).unwrap();
            assert!((e.value - t).abs() <= 1e-9 * t.abs(), "{kind}");
            assert_eq!(e.ci_half_width, 0.0);
        }
    }

    #[test]
    fn one_stratum_matches_uniform() {
        let d = data(500, false);
        let cfg = EstimatorConfig::default();
        let u = UniformBaseline::prepare(&d, 60, cfg, 7).unwrap();
        let s = StratifiedBaseline::prepare(&d, 60, 1, cfg, 7).unwrap();
        for kind in AggregateKind::ALL {
            let query = q(kind, 100.0, 350.0);
            assert_eq!(u.answer(&query), s.answer(&query), "{kind}");
        }
    }

    #[test]
    fn constant_data_sum_is_exact() {
        let d = data(400, true);
        let cfg = EstimatorConfig::default();
        let u = UniformBaseline::prepare(&d, 40, cfg, 2).unwrap();
        let s = StratifiedBaseline::prepare(&d, 40, 4, cfg, 2).unwrap();
        let query = q(AggregateKind::Sum, f64::NEG_INFINITY, f64::INFINITY);
        for e in [u.answer(&query).unwrap(), s.answer(&query).unwrap()] {
            assert_eq!(e.value, 1600.0);
            assert_eq!(e.ci_half_width, 0.0);
            assert_eq!((e.lb, e.ub), (f64::NEG_INFINITY, f64::INFINITY));
        }
    }

    #[test]
    fn strata_are_equal_population() {
        let d = data(103, false);
        let s = StratifiedBaseline::prepare(&d, 21, 4, EstimatorConfig::default(), 0).unwrap();
        let pops: Vec<usize> = s.strata().iter().map(|x| x.population()).collect();
        assert_eq!(pops.iter().sum::<usize>(), 103);
        assert!(pops.iter().max().unwrap() - pops.iter().min().unwrap() <= 1);
        let sizes: Vec<usize> = s.strata().iter().map(|x| x.len()).collect();
        assert_eq!(sizes, vec![6, 5, 5, 5]);
    }

    #[test]
    fn budget_below_strata_count_fails() {
        let d = data(50, false);
        assert!(StratifiedBaseline::prepare(&d, 3, 4, EstimatorConfig::default(), 0).is_err());
    }
}
