// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The PASS Authors

//! Sampling estimators, confidence intervals, stratified combination and
//! deterministic bounds.
//!
//! SUM, COUNT and AVG are all evaluated as the mean of a transformed sample
//! `phi(t)`; the variance of `phi` (population-style, divisor `K`) drives both
//! the runtime confidence interval and the optimizer objective.

use std::ops::Range;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AggregateKind, Dataset, Query, Rect};
use crate::scalar::Scalar;
use crate::synopsis::AggregateSummary;

/// CI multiplier for a two-sided 99% normal interval.
pub const DEFAULT_LAMBDA: f64 = 2.576;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub lambda: f64,
    pub fpc_enabled: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            fpc_enabled: true,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    /// Finite population correction `(N - K) / (N - 1)`, or 1 when disabled.
    pub fn fpc<T: Scalar>(&self, population: usize, sample_size: usize) -> T {
        if self.fpc_enabled && population > 1 {
            let n = T::from_count(population);
            let k = T::from_count(sample_size.min(population));
            (n - k) / (n - T::one())
        } else {
            T::one()
        }
    }
}

/// Uniform without-replacement sample of one stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumSample<T> {
    dimension: usize,
    points: Vec<T>,
    values: Vec<T>,
    population: usize,
    seed: u64,
}

impl<T: Scalar> StratumSample<T> {
    pub fn new(
        dimension: usize,
        points: Vec<T>,
        values: Vec<T>,
        population: usize,
        seed: u64,
    ) -> Result<Self> {
        if points.len() != values.len() * dimension {
            return Err(Error::DimensionMismatch {
                expected: values.len() * dimension,
                actual: points.len(),
            });
        }
        if population == 0 || values.len() > population {
            return Err(Error::Build(format!(
                "sample of {} items from a stratum of {} tuples",
                values.len(),
                population
            )));
        }
        Ok(Self {
            dimension,
            points,
            values,
            population,
            seed,
        })
    }

    /// Draws `size` members of `members` (row indices into `data`) uniformly
    /// without replacement. `size` is clamped to the stratum population.
    pub fn draw(data: &Dataset<T>, members: &[usize], size: usize, seed: u64) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Build("cannot sample an empty stratum".into()));
        }
        let size = size.min(members.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = index::sample(&mut rng, members.len(), size).into_vec();
        picked.sort_unstable();
        let d = data.dimension();
        let mut points = Vec::with_capacity(size * d);
        let mut values = Vec::with_capacity(size);
        for p in picked {
            let row = members[p];
            points.extend_from_slice(data.point(row));
            values.push(data.value(row));
        }
        Self::new(d, points, values, members.len(), seed)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn population(&self) -> usize {
        self.population
    }

    #[inline]
    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[T] {
        &self.points[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[T], T)> + '_ {
        self.points
            .chunks_exact(self.dimension)
            .zip(self.values.iter().copied())
    }

    /// Number of sampled items inside `rect`.
    pub fn matching(&self, rect: &Rect<T>) -> usize {
        self.iter()
            .filter(|(p, _)| rect.contains_unchecked(p))
            .count()
    }
}

/// Result of one query evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub ci_half_width: T,
    pub lb: T,
    pub ub: T,
    pub sample_points_used: usize,
    pub partial_leaf_count: usize,
    pub skipped_population: usize,
}

impl<T: Scalar> Estimate<T> {
    /// Estimate without deterministic bounds.
    pub fn unbounded(value: T, ci_half_width: T, sample_points_used: usize) -> Self {
        Self {
            value,
            ci_half_width,
            lb: T::neg_infinity(),
            ub: T::infinity(),
            sample_points_used,
            partial_leaf_count: 0,
            skipped_population: 0,
        }
    }
}

/// Per-tuple transform turning SUM/COUNT/AVG into a sample mean.
pub fn phi<T: Scalar>(
    kind: AggregateKind,
    matches: bool,
    value: T,
    population: usize,
    sample_size: usize,
    matched: usize,
) -> Result<T> {
    if kind == AggregateKind::Avg && matched == 0 {
        return Err(Error::NoMatchingSample { bounds: None });
    }
    if !matches {
        return Ok(T::zero());
    }
    let n = T::from_count(population);
    match kind {
        AggregateKind::Count => Ok(n),
        AggregateKind::Sum => Ok(n * value),
        AggregateKind::Avg => Ok(T::from_count(sample_size) / T::from_count(matched) * value),
        AggregateKind::Min | AggregateKind::Max => Err(Error::Config(format!(
            "{kind} has no mean-of-phi form"
        ))),
    }
}

/// Mean and population variance (divisor `K`) of `phi` over the sample,
/// plus the number of matching sample items.
fn phi_moments<T: Scalar>(
    kind: AggregateKind,
    sample: &StratumSample<T>,
    rect: &Rect<T>,
) -> Result<(T, T, usize)> {
    let hits: Vec<bool> = sample
        .iter()
        .map(|(p, _)| rect.contains_unchecked(p))
        .collect();
    let matched = hits.iter().filter(|&&h| h).count();
    let k = sample.len();
    let phis = hits
        .iter()
        .zip(sample.values())
        .map(|(&h, &v)| phi(kind, h, v, sample.population(), k, matched))
        .collect::<Result<Vec<T>>>()?;
    let kf = T::from_count(k);
    let mean = phis.iter().copied().sum::<T>() / kf;
    let var = phis
        .iter()
        .map(|&p| (p - mean) * (p - mean))
        .sum::<T>()
        / kf;
    Ok((mean, var, matched))
}

fn check_sample<T: Scalar>(sample: &StratumSample<T>, query: &Query<T>) -> Result<()> {
    if sample.is_empty() {
        return Err(Error::Build("empty sample".into()));
    }
    query.check_dimension(sample.dimension())
}

/// Extreme of matching sampled values, for MIN/MAX estimates.
fn sample_extreme<T: Scalar>(
    kind: AggregateKind,
    sample: &StratumSample<T>,
    rect: &Rect<T>,
) -> Option<T> {
    let matching = sample
        .iter()
        .filter(|(p, _)| rect.contains_unchecked(p))
        .map(|(_, v)| v);
    match kind {
        AggregateKind::Min => matching.reduce(Scalar::min_of),
        _ => matching.reduce(Scalar::max_of),
    }
}

/// Single-sample estimate `mean(phi) +- lambda * sqrt(fpc * var(phi) / K)`.
///
/// MIN/MAX return the extreme matching sampled value with a zero-width interval.
pub fn estimate_uniform<T: Scalar>(
    sample: &StratumSample<T>,
    query: &Query<T>,
    cfg: &EstimatorConfig,
) -> Result<Estimate<T>> {
    check_sample(sample, query)?;
    if matches!(query.kind, AggregateKind::Min | AggregateKind::Max) {
        let v = sample_extreme(query.kind, sample, &query.rect)
            .ok_or(Error::NoMatchingSample { bounds: None })?;
        return Ok(Estimate::unbounded(v, T::zero(), sample.len()));
    }
    let s = stratum_estimate(sample, query, cfg)?;
    let ci = T::lit(cfg.lambda) * s.variance.sqrt();
    Ok(Estimate::unbounded(s.value, ci, sample.len()))
}

/// One stratum's contribution to a stratified estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StratumEstimate<T> {
    pub value: T,
    /// `fpc * var(phi) / K`; zero for exactly known strata.
    pub variance: T,
    pub population: usize,
    pub sample_size: usize,
    pub matched: usize,
    /// Exactly known (fully covered) rather than sampled.
    pub covered: bool,
}

impl<T: Scalar> StratumEstimate<T> {
    /// An exactly known stratum fully inside the query.
    pub fn exact(value: T, population: usize) -> Self {
        Self {
            value,
            variance: T::zero(),
            population,
            sample_size: 0,
            matched: population,
            covered: true,
        }
    }

    /// A sampled stratum none of whose sampled items match.
    pub fn no_match(population: usize, sample_size: usize) -> Self {
        Self {
            value: T::zero(),
            variance: T::zero(),
            population,
            sample_size,
            matched: 0,
            covered: false,
        }
    }

    /// Estimated number of stratum tuples satisfying the predicate.
    pub fn relevant_population(&self) -> T {
        let n = T::from_count(self.population);
        if self.covered {
            n
        } else if self.sample_size == 0 {
            T::zero()
        } else {
            n * T::from_count(self.matched) / T::from_count(self.sample_size)
        }
    }
}

/// Estimate for one stratum treated as a full dataset of `population` tuples.
///
/// For MIN/MAX the value is the matching sampled extreme and the variance zero.
pub fn stratum_estimate<T: Scalar>(
    stratum: &StratumSample<T>,
    query: &Query<T>,
    cfg: &EstimatorConfig,
) -> Result<StratumEstimate<T>> {
    check_sample(stratum, query)?;
    let k = stratum.len();
    if matches!(query.kind, AggregateKind::Min | AggregateKind::Max) {
        let matched = stratum.matching(&query.rect);
        return match sample_extreme(query.kind, stratum, &query.rect) {
            Some(v) => Ok(StratumEstimate {
                value: v,
                variance: T::zero(),
                population: stratum.population(),
                sample_size: k,
                matched,
                covered: false,
            }),
            None => Err(Error::NoMatchingSample { bounds: None }),
        };
    }
    let (mean, var, matched) = phi_moments(query.kind, stratum, &query.rect)?;
    let fpc: T = cfg.fpc(stratum.population(), k);
    Ok(StratumEstimate {
        value: mean,
        variance: (fpc * var / T::from_count(k)).max(T::zero()),
        population: stratum.population(),
        sample_size: k,
        matched,
        covered: false,
    })
}

/// Per-stratum weights: 1 for SUM/COUNT, `N_iq / N_q` for AVG.
pub fn stratum_weights<T: Scalar>(kind: AggregateKind, strata: &[StratumEstimate<T>]) -> Result<Vec<T>> {
    match kind {
        AggregateKind::Avg => {
            let relevant: Vec<T> = strata.iter().map(|s| s.relevant_population()).collect();
            let total: T = relevant.iter().copied().sum();
            if total <= T::zero() {
                return Err(Error::NoMatchingSample { bounds: None });
            }
            Ok(relevant.into_iter().map(|r| r / total).collect())
        }
        _ => Ok(vec![T::one(); strata.len()]),
    }
}

/// Weighted combination `sum(w_i est_i) +- lambda sqrt(sum(w_i^2 V_i))`.
///
/// MIN/MAX take the extreme over strata with at least one match.
pub fn combine_strata<T: Scalar>(
    kind: AggregateKind,
    strata: &[StratumEstimate<T>],
    cfg: &EstimatorConfig,
) -> Result<Estimate<T>> {
    if strata.is_empty() {
        return Err(Error::Config("combine_strata needs at least one stratum".into()));
    }
    let used = strata.iter().map(|s| s.sample_size).sum();
    if matches!(kind, AggregateKind::Min | AggregateKind::Max) {
        let vals = strata.iter().filter(|s| s.matched > 0).map(|s| s.value);
        let v = if kind == AggregateKind::Min {
            vals.reduce(Scalar::min_of)
        } else {
            vals.reduce(Scalar::max_of)
        }
        .ok_or(Error::NoMatchingSample { bounds: None })?;
        return Ok(Estimate::unbounded(v, T::zero(), used));
    }
    let weights = stratum_weights(kind, strata)?;
    let mut value = T::zero();
    let mut var = T::zero();
    for (s, &w) in strata.iter().zip(&weights) {
        value = value + w * s.value;
        var = var + w * w * s.variance;
    }
    Ok(Estimate::unbounded(value, T::lit(cfg.lambda) * var.sqrt(), used))
}

/// Bounds on the sum of any subset of a partition's tuples.
fn subset_sum_bounds<T: Scalar>(s: &AggregateSummary<T>) -> (T, T) {
    let n = T::from_count(s.count);
    let neg = (n * s.min).min(T::zero());
    let pos = (n * s.max).max(T::zero());
    // for nonnegative data this is exactly (0, sum)
    let lo = neg.max(s.sum - pos);
    let hi = pos.min(s.sum - neg);
    (lo, hi)
}

fn covered_average<T: Scalar>(covered: &[AggregateSummary<T>]) -> Option<T> {
    let count: usize = covered.iter().map(|s| s.count).sum();
    if count == 0 {
        return None;
    }
    let sum: T = covered.iter().map(|s| s.sum).sum();
    Some(sum / T::from_count(count))
}

/// Deterministic `(lb, ub)` from covered and partially overlapped partition
/// summaries. Always contains the exact answer.
pub fn hard_bounds<T: Scalar>(
    kind: AggregateKind,
    covered: &[AggregateSummary<T>],
    partial: &[AggregateSummary<T>],
) -> (T, T) {
    match kind {
        AggregateKind::Count => {
            let lb: usize = covered.iter().map(|s| s.count).sum();
            let extra: usize = partial.iter().map(|s| s.count).sum();
            (T::from_count(lb), T::from_count(lb + extra))
        }
        AggregateKind::Sum => {
            let base: T = covered.iter().map(|s| s.sum).sum();
            partial.iter().fold((base, base), |(lb, ub), s| {
                let (lo, hi) = subset_sum_bounds(s);
                (lb + lo, ub + hi)
            })
        }
        AggregateKind::Avg => {
            let cov = covered_average(covered);
            let pmin = partial.iter().map(|s| s.min).reduce(Scalar::min_of);
            let pmax = partial.iter().map(|s| s.max).reduce(Scalar::max_of);
            let lb = [cov, pmin].into_iter().flatten().reduce(Scalar::min_of);
            let ub = [cov, pmax].into_iter().flatten().reduce(Scalar::max_of);
            (
                lb.unwrap_or_else(T::neg_infinity),
                ub.unwrap_or_else(T::infinity),
            )
        }
        AggregateKind::Min => {
            if covered.is_empty() && partial.is_empty() {
                return (T::neg_infinity(), T::infinity());
            }
            let ub = covered
                .iter()
                .map(|s| s.min)
                .fold(T::infinity(), Scalar::min_of);
            let lb = partial.iter().map(|s| s.min).fold(ub, Scalar::min_of);
            (lb, ub)
        }
        AggregateKind::Max => {
            if covered.is_empty() && partial.is_empty() {
                return (T::neg_infinity(), T::infinity());
            }
            let lb = covered
                .iter()
                .map(|s| s.max)
                .fold(T::neg_infinity(), Scalar::max_of);
            let ub = partial.iter().map(|s| s.max).fold(lb, Scalar::max_of);
            (lb, ub)
        }
    }
}

/// Single-partition query variance used by the optimizers, evaluated
/// directly over `values` (the whole partition) for the query `range`.
///
/// SUM: `(1/N_i) [N_i St2 - St^2]`; AVG additionally divides by `N_iq^2`;
/// COUNT is SUM with every `t = 1`.
pub fn optimizer_variance<T: Scalar>(
    kind: AggregateKind,
    values: &[T],
    range: Range<usize>,
) -> Result<T> {
    if range.is_empty() || range.end > values.len() {
        return Err(Error::EmptyRange);
    }
    let (s, s2) = match kind {
        AggregateKind::Count => {
            let c = T::from_count(range.len());
            (c, c)
        }
        _ => values[range.clone()]
            .iter()
            .fold((T::zero(), T::zero()), |(a, b), &t| (a + t, b + t * t)),
    };
    Ok(window_variance(kind, values.len(), range.len(), s, s2))
}

/// Variance formula from window moments. `n` is the partition size, `len`
/// the number of window items, `s`/`s2` their sum and sum of squares.
#[inline]
pub(crate) fn window_variance<T: Scalar>(
    kind: AggregateKind,
    n: usize,
    len: usize,
    s: T,
    s2: T,
) -> T {
    let nf = T::from_count(n);
    let base = ((nf * s2 - s * s) / nf).max(T::zero());
    match kind {
        AggregateKind::Avg => {
            let l = T::from_count(len);
            base / (l * l)
        }
        _ => base,
    }
}
