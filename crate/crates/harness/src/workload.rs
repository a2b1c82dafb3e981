// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The PASS Authors

//! Random range-query workloads whose endpoints are drawn from the data.

use pass_core::{AggregateKind, Dataset, Query, Rect};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSpec {
    /// Query kinds with relative weights.
    pub kinds: Vec<(AggregateKind, u32)>,
    pub count: usize,
    /// Queries matching a smaller fraction of the tuples are redrawn.
    pub min_selectivity: f64,
    /// Dimensions whose endpoints are drawn; the rest stay unbounded.
    /// `None` restricts every dimension.
    pub dims: Option<Vec<usize>>,
    pub seed: u64,
    /// Draws allowed per query before giving up.
    pub max_attempts: usize,
}

impl WorkloadSpec {
    pub fn new(kind: AggregateKind, count: usize, seed: u64) -> Self {
        Self {
            kinds: vec![(kind, 1)],
            count,
            min_selectivity: 0.0,
            dims: None,
            seed,
            max_attempts: 10_000,
        }
    }

    pub fn mixed(kinds: &[AggregateKind], count: usize, seed: u64) -> Self {
        Self {
            kinds: kinds.iter().map(|&k| (k, 1)).collect(),
            ..Self::new(AggregateKind::Sum, count, seed)
        }
    }

    pub fn with_min_selectivity(mut self, s: f64) -> Self {
        self.min_selectivity = s;
        self
    }

    pub fn validate(&self, dimension: usize) -> Result<()> {
        if self.count == 0 {
            return Err(HarnessError::Config("workload needs at least one query".into()));
        }
        if !(0.0..1.0).contains(&self.min_selectivity) {
            return Err(HarnessError::Config(format!(
                "min_selectivity {} is outside [0, 1)",
                self.min_selectivity
            )));
        }
        if self.kinds.is_empty() || self.kinds.iter().all(|&(_, w)| w == 0) {
            return Err(HarnessError::Config("workload has no query kinds".into()));
        }
        if self.max_attempts == 0 {
            return Err(HarnessError::Config("max_attempts must be positive".into()));
        }
        if let Some(dims) = &self.dims {
            if let Some(&bad) = dims.iter().find(|&&d| d >= dimension) {
                return Err(HarnessError::Config(format!(
                    "dimension {bad} is out of range for d = {dimension}"
                )));
            }
        }
        Ok(())
    }
}

fn pick_kind(kinds: &[(AggregateKind, u32)], rng: &mut ChaCha8Rng) -> AggregateKind {
    let total: u64 = kinds.iter().map(|&(_, w)| w as u64).sum();
    let mut x = rng.random_range(0..total);
    for &(k, w) in kinds {
        if x < w as u64 {
            return k;
        }
        x -= w as u64;
    }
    unreachable!("weights sum to total")
}

/// Tuples whose predicate lies in `rect`.
pub fn matching_count(data: &Dataset, rect: &Rect) -> usize {
    let (lo, hi) = (rect.lo(), rect.hi());
    (0..data.len())
        .filter(|&i| {
            data.point(i)
                .iter()
                .enumerate()
                .all(|(j, &x)| lo[j] <= x && x <= hi[j])
        })
        .count()
}

/// Queries drawn deterministically from `spec.seed`.
pub fn generate_workload(data: &Dataset, spec: &WorkloadSpec) -> Result<Vec<Query>> {
    let d = data.dimension();
    spec.validate(d)?;
    let dims: Vec<usize> = spec.dims.clone().unwrap_or_else(|| (0..d).collect());
    let needed = (spec.min_selectivity * data.len() as f64).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.count);
    for q in 0..spec.count {
        let kind = pick_kind(&spec.kinds, &mut rng);
        let mut accepted = None;
        for _ in 0..spec.max_attempts {
            let mut lo = vec![f64::NEG_INFINITY; d];
            let mut hi = vec![f64::INFINITY; d];
            for &j in &dims {
                let a = data.point(rng.random_range(0..data.len()))[j];
                let b = data.point(rng.random_range(0..data.len()))[j];
                lo[j] = a.min(b);
                hi[j] = a.max(b);
            }
            let rect = Rect::new(lo, hi)?;
            if needed == 0 || matching_count(data, &rect) >= needed {
                accepted = Some(rect);
                break;
            }
        }
        let rect = accepted.ok_or_else(|| {
            HarnessError::Config(format!(
                "query {q}: no draw reached selectivity {} within {} attempts",
                spec.min_selectivity, spec.max_attempts
            ))
        })?;
        out.push(Query::new(kind, rect));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use pass_core::Tuple;

    fn line(n: usize) -> Dataset {
        Dataset::new(1, (0..n).map(|i| Tuple::new(vec![i as f64], 1.0)).collect()).unwrap()
    }

    #[test]
    fn deterministic_per_seed() {
        let data = line(500);
        let spec = WorkloadSpec::mixed(&AggregateKind::ALL, 50, 9);
        assert_eq!(generate_workload(&data, &spec).unwrap(), generate_workload(&data, &spec).unwrap());
        let other = WorkloadSpec { seed: 10, ..spec.clone() };
        assert_ne!(generate_workload(&data, &spec).unwrap(), generate_workload(&data, &other).unwrap());
    }

    #[test]
    fn endpoints_come_from_the_data() {
        let data = line(100);
        for q in generate_workload(&data, &WorkloadSpec::new(AggregateKind::Sum, 100, 1)).unwrap() {
            let (lo, hi) = (q.rect.lo()[0], q.rect.hi()[0]);
            assert!(lo <= hi);
            assert_eq!(lo.fract(), 0.0);
            assert!((0.0..100.0).contains(&hi));
        }
    }

    #[test]
    fn selectivity_is_enforced() {
        let data = line(400);
        let spec = WorkloadSpec::new(AggregateKind::Count, 200, 3).with_min_selectivity(0.5);
        for q in generate_workload(&data, &spec).unwrap() {
            assert!(matching_count(&data, &q.rect) >= 200);
        }
    }

    #[test]
    fn infeasible_selectivity_is_a_config_error() {
        // only draws spanning both points qualify; with one attempt per query
        // some of the 200 queries miss
        let data = Dataset::new(1, vec![Tuple::new(vec![0.0], 1.0), Tuple::new(vec![1.0], 1.0)]).unwrap();
        let spec = WorkloadSpec { max_attempts: 1, ..WorkloadSpec::new(AggregateKind::Sum, 200, 0).with_min_selectivity(0.99) };
        assert!(matches!(generate_workload(&data, &spec), Err(HarnessError::Config(_))));
    }

    #[test]
    fn kind_mix_respects_weights() {
        let data = line(10);
        let spec = WorkloadSpec {
            kinds: vec![(AggregateKind::Sum, 3), (AggregateKind::Max, 0), (AggregateKind::Avg, 1)],
            ..WorkloadSpec::new(AggregateKind::Sum, 400, 5)
        };
        let qs = generate_workload(&data, &spec).unwrap();
        let sums = qs.iter().filter(|q| q.kind == AggregateKind::Sum).count();
        assert!(qs.iter().all(|q| q.kind != AggregateKind::Max));
        assert!((250..350).contains(&sums), "{sums}");
    }

    #[test]
    fn rejects_bad_specs() {
        let data = line(10);
        assert!(generate_workload(&data, &WorkloadSpec::new(AggregateKind::Sum, 0, 0)).is_err());
        assert!(generate_workload(&data, &WorkloadSpec::new(AggregateKind::Sum, 1, 0).with_min_selectivity(1.0)).is_err());
        let spec = WorkloadSpec { dims: Some(vec![3]), ..WorkloadSpec::new(AggregateKind::Sum, 1, 0) };
        assert!(generate_workload(&data, &spec).is_err());
    }
}
