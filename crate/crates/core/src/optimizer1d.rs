// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The PASS Authors

//! One-dimensional partitioning: single-bucket max-variance oracles and the
//! dynamic programs that minimize the worst bucket.
//!
//! All positions are 0-based indices into the sorted optimization sample and
//! all ranges are half-open.

use std::ops::Range;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::window_variance;
use crate::model::{AggregateKind, Dataset, Rect};
use crate::scalar::Scalar;

pub const DEFAULT_DELTA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    NaiveDp,
    MonotoneDp,
    FastDp,
    EqualCount,
    KdGreedy,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::NaiveDp,
        Method::MonotoneDp,
        Method::FastDp,
        Method::EqualCount,
        Method::KdGreedy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::NaiveDp => "naive-dp",
            Method::MonotoneDp => "monotone-dp",
            Method::FastDp => "fast-dp",
            Method::EqualCount => "equal-count",
            Method::KdGreedy => "kd-greedy",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Number of leaves.
    pub k: usize,
    /// Minimum fraction of a partition a meaningful query overlaps.
    pub delta: f64,
    /// Optimization sample size; 0 uses the full data.
    pub m: usize,
    pub method: Method,
    /// Query kind whose worst-case variance is minimized.
    pub objective: AggregateKind,
    /// Smallest bucket in sample points; raised to `max(1, ceil(2 delta m))`
    /// when lower.
    pub min_partition_samples: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            k: 64,
            delta: DEFAULT_DELTA,
            m: 10_000,
            method: Method::FastDp,
            objective: AggregateKind::Sum,
            min_partition_samples: 1,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    /// Optimization sample size actually used for a dataset of `n` tuples.
    pub fn effective_m(&self, n: usize) -> usize {
        if self.m == 0 {
            n
        } else {
            self.m.min(n)
        }
    }

    /// Minimum window length of a meaningful query, in sample points.
    pub fn delta_count(&self, m: usize) -> usize {
        ((self.delta * m as f64).ceil() as usize).max(1)
    }

    pub fn min_bucket(&self, m: usize) -> usize {
        let floor = ((2.0 * self.delta * m as f64).ceil() as usize).max(1);
        self.min_partition_samples.max(floor)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let m = self.effective_m(n);
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta {} outside (0, 1)", self.delta)));
        }
        if self.delta * (m as f64) < 1.0 {
            return Err(Error::Config(format!(
                "delta * m = {} is below 1",
                self.delta * m as f64
            )));
        }
        if self.k > m {
            return Err(Error::Config(format!("k = {} exceeds m = {m}", self.k)));
        }
        if matches!(self.objective, AggregateKind::Min | AggregateKind::Max) {
            return Err(Error::Config(format!(
                "{} is not a variance objective",
                self.objective
            )));
        }
        Ok(())
    }
}

/// Sorted optimization values with prefix sums `Y` (values) and `Z` (squares).
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixSums<T> {
    values: Vec<T>,
    y: Vec<T>,
    z: Vec<T>,
}

impl<T: Scalar> PrefixSums<T> {
    pub fn new(values: Vec<T>) -> Self {
        let mut y = Vec::with_capacity(values.len() + 1);
        let mut z = Vec::with_capacity(values.len() + 1);
        let (mut a, mut b) = (T::zero(), T::zero());
        y.push(a);
        z.push(b);
        for &t in &values {
            a = a + t;
            b = b + t * t;
            y.push(a);
            z.push(b);
        }
        Self { values, y, z }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn sum(&self, r: Range<usize>) -> T {
        self.y[r.end] - self.y[r.start]
    }

    #[inline]
    pub fn sum_sq(&self, r: Range<usize>) -> T {
        self.z[r.end] - self.z[r.start]
    }

    /// Single-bucket variance of the query `window` inside `bucket`.
    #[inline]
    pub fn variance(&self, kind: AggregateKind, bucket: Range<usize>, window: Range<usize>) -> T {
        let (s, s2) = match kind {
            AggregateKind::Count => {
                let c = T::from_count(window.len());
                (c, c)
            }
            _ => (self.sum(window.clone()), self.sum_sq(window.clone())),
        };
        window_variance(kind, bucket.len(), window.len(), s, s2)
    }
}

/// Worst query found inside a bucket.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowMax<T> {
    pub variance: T,
    pub window: Option<Range<usize>>,
}

impl<T: Scalar> WindowMax<T> {
    pub fn none() -> Self {
        Self {
            variance: T::zero(),
            window: None,
        }
    }
}

/// Maximum over every window of at least `d` points inside `bucket`. Ties go
/// to the smallest start, then the smallest end.
pub fn max_var_exhaustive<T: Scalar>(
    kind: AggregateKind,
    prefix: &PrefixSums<T>,
    bucket: Range<usize>,
    d: usize,
) -> WindowMax<T> {
    let d = d.max(1);
    let mut best = WindowMax::none();
    if bucket.len() < d {
        return best;
    }
    for g in bucket.start..=bucket.end - d {
        for w in g + d..=bucket.end {
            let v = prefix.variance(kind, bucket.clone(), g..w);
            if best.window.is_none() || v > best.variance {
                best = WindowMax {
                    variance: v,
                    window: Some(g..w),
                };
            }
        }
    }
    best
}

/// Median split: the larger-variance half of sizes `ceil(n/2)` and
/// `floor(n/2)`, first half on ties. Within a factor 4 of the maximum.
pub fn max_var_fast_sum<T: Scalar>(
    kind: AggregateKind,
    prefix: &PrefixSums<T>,
    bucket: Range<usize>,
) -> WindowMax<T> {
    match bucket.len() {
        0 => WindowMax::none(),
        1 => WindowMax {
            variance: prefix.variance(kind, bucket.clone(), bucket.clone()),
            window: Some(bucket),
        },
        n => {
            let mid = bucket.start + n.div_ceil(2);
            let first = prefix.variance(kind, bucket.clone(), bucket.start..mid);
            let second = prefix.variance(kind, bucket.clone(), mid..bucket.end);
            if second > first {
                WindowMax {
                    variance: second,
                    window: Some(mid..bucket.end),
                }
            } else {
                WindowMax {
                    variance: first,
                    window: Some(bucket.start..mid),
                }
            }
        }
    }
}

/// Range-argmax (sparse table) over `W[g]`, the sum of squares of the `d`
/// values ending at position `g`.
#[derive(Debug, Clone)]
pub struct AvgWindowIndex<T> {
    d: usize,
    weights: Vec<T>,
    table: Vec<Vec<u32>>,
}

impl<T: Scalar> AvgWindowIndex<T> {
    /// Window length.
    pub fn window(&self) -> usize {
        self.d
    }

    /// `W[g]`, defined for `g >= d - 1`.
    pub fn weight(&self, g: usize) -> T {
        self.weights[g + 1 - self.d]
    }

    /// Leftmost position of the maximum of `W` over the inclusive `[a, b]`.
    pub fn argmax(&self, a: usize, b: usize) -> usize {
        assert!(a <= b && a + 1 >= self.d, "argmax range out of bounds");
        let (lo, hi) = (a + 1 - self.d, b + 1 - self.d);
        let level = usize::BITS as usize - 1 - (hi - lo + 1).leading_zeros() as usize;
        let left = self.table[level][lo] as usize;
        let right = self.table[level][hi + 1 - (1 << level)] as usize;
        let best = if self.weights[right] > self.weights[left] {
            right
        } else {
            left
        };
        best + self.d - 1
    }
}

pub fn build_avg_window_index<T: Scalar>(prefix: &PrefixSums<T>, d: usize) -> AvgWindowIndex<T> {
    let d = d.max(1);
    let m = prefix.len();
    let weights: Vec<T> = if m < d {
        Vec::new()
    } else {
        (d - 1..m).map(|g| prefix.sum_sq(g + 1 - d..g + 1)).collect()
    };
    let n = weights.len();
    let mut table: Vec<Vec<u32>> = vec![(0..n as u32).collect()];
    let mut span = 1;
    while 2 * span <= n {
        let prev = table.last().unwrap();
        let next: Vec<u32> = (0..=n - 2 * span)
            .map(|i| {
                let (l, r) = (prev[i], prev[i + span]);
                if weights[r as usize] > weights[l as usize] {
                    r
                } else {
                    l
                }
            })
            .collect();
        table.push(next);
        span *= 2;
    }
    AvgWindowIndex { d, weights, table }
}

/// The `d`-window with the largest sum of squares, scored as an AVG
/// variance. Within a factor 4 of the maximum; buckets under `2d` points
/// report zero.
pub fn max_var_fast_avg<T: Scalar>(
    index: &AvgWindowIndex<T>,
    prefix: &PrefixSums<T>,
    bucket: Range<usize>,
) -> WindowMax<T> {
    let d = index.window();
    if bucket.len() < 2 * d {
        return WindowMax::none();
    }
    let g = index.argmax(bucket.start + d - 1, bucket.end - 1);
    let window = g + 1 - d..g + 1;
    WindowMax {
        variance: prefix.variance(AggregateKind::Avg, bucket, window.clone()),
        window: Some(window),
    }
}

/// Maximum single-bucket variance `M(bucket)`.
pub trait VarianceOracle<T> {
    fn max_variance(&self, bucket: Range<usize>) -> WindowMax<T>;
}

impl<T, F: Fn(Range<usize>) -> WindowMax<T>> VarianceOracle<T> for F {
    fn max_variance(&self, bucket: Range<usize>) -> WindowMax<T> {
        self(bucket)
    }
}

pub struct ExhaustiveOracle<'a, T> {
    pub kind: AggregateKind,
    pub prefix: &'a PrefixSums<T>,
    pub d: usize,
}

impl<T: Scalar> VarianceOracle<T> for ExhaustiveOracle<'_, T> {
    fn max_variance(&self, bucket: Range<usize>) -> WindowMax<T> {
        max_var_exhaustive(self.kind, self.prefix, bucket, self.d)
    }
}

/// Median split for SUM/COUNT, window index for AVG.
pub struct FastOracle<'a, T> {
    kind: AggregateKind,
    prefix: &'a PrefixSums<T>,
    index: Option<AvgWindowIndex<T>>,
}

impl<'a, T: Scalar> FastOracle<'a, T> {
    pub fn new(kind: AggregateKind, prefix: &'a PrefixSums<T>, d: usize) -> Self {
        let index = (kind == AggregateKind::Avg).then(|| build_avg_window_index(prefix, d));
        Self {
            kind,
            prefix,
            index,
        }
    }
}

impl<T: Scalar> VarianceOracle<T> for FastOracle<'_, T> {
    fn max_variance(&self, bucket: Range<usize>) -> WindowMax<T> {
        match &self.index {
            Some(index) => max_var_fast_avg(index, self.prefix, bucket),
            None => max_var_fast_sum(self.kind, self.prefix, bucket),
        }
    }
}

/// Flat partitioning of the sorted sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Partitioning<T> {
    /// `0 = c_0 < c_1 < ... < c_k = m`.
    pub cuts: Vec<usize>,
    pub bucket_variance: Vec<T>,
    pub minimax: T,
}

impl<T: Scalar> Partitioning<T> {
    /// Scores given cut positions with `oracle`.
    pub fn from_cuts(cuts: Vec<usize>, oracle: &impl VarianceOracle<T>) -> Self {
        let bucket_variance: Vec<T> = cuts
            .windows(2)
            .map(|w| oracle.max_variance(w[0]..w[1]).variance)
            .collect();
        let minimax = bucket_variance
            .iter()
            .copied()
            .fold(T::zero(), Scalar::max_of);
        Self {
            cuts,
            bucket_variance,
            minimax,
        }
    }

    pub fn k(&self) -> usize {
        self.cuts.len() - 1
    }

    pub fn buckets(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.cuts.windows(2).map(|w| w[0]..w[1])
    }
}

/// Every position `0..=m` is a permitted cut.
pub fn all_cuts(m: usize) -> Vec<usize> {
    (0..=m).collect()
}

struct DpTable<T> {
    value: Vec<Vec<T>>,
    arg: Vec<Vec<usize>>,
}

fn check_candidates(m: usize, k: usize, min_size: usize, candidates: &[usize]) -> Result<()> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if candidates.first() != Some(&0) || candidates.last() != Some(&m) {
        return Err(Error::Config("cut candidates must start at 0 and end at m".into()));
    }
    if candidates.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("cut candidates must be strictly increasing".into()));
    }
    if m < k * min_size.max(1) {
        return Err(Error::Infeasible(format!(
            "{k} buckets of at least {min_size} points do not fit in {m}"
        )));
    }
    Ok(())
}

fn reconstruct<T: Scalar>(
    table: &DpTable<T>,
    candidates: &[usize],
    k: usize,
    oracle: &impl VarianceOracle<T>,
) -> Result<Partitioning<T>> {
    let last = candidates.len() - 1;
    if !table.value[k - 1][last].is_finite() {
        return Err(Error::Infeasible(format!(
            "no partitioning into {k} buckets at the permitted cut positions"
        )));
    }
    let mut idx = vec![last];
    let mut p = last;
    for j in (1..k).rev() {
        p = table.arg[j][p];
        idx.push(p);
    }
    idx.push(0);
    idx.reverse();
    let cuts = idx.into_iter().map(|i| candidates[i]).collect();
    Ok(Partitioning::from_cuts(cuts, oracle))
}

/// Exact minimax DP `A[i, j] = min_h max(A[h, j-1], M(h..i))` over the
/// permitted cut positions (indices into the sorted sample, including 0 and
/// `m`). Ties go to the smallest `h`.
pub fn dp_naive<T: Scalar>(
    m: usize,
    k: usize,
    min_size: usize,
    candidates: &[usize],
    oracle: &impl VarianceOracle<T>,
) -> Result<Partitioning<T>> {
    check_candidates(m, k, min_size, candidates)?;
    let min_size = min_size.max(1);
    let c = candidates.len();
    let inf = T::infinity();
    let mut table = DpTable {
        value: vec![vec![inf; c]; k],
        arg: vec![vec![0; c]; k],
    };
    for i in 1..c {
        for h in 0..i {
            if candidates[i] - candidates[h] < min_size {
                break;
            }
            let cost = oracle.max_variance(candidates[h]..candidates[i]).variance;
            if h == 0 {
                table.value[0][i] = cost;
                continue;
            }
            for j in 1..k {
                let prev = table.value[j - 1][h];
                if !prev.is_finite() {
                    continue;
                }
                let v = prev.max_of(cost);
                if v < table.value[j][i] {
                    table.value[j][i] = v;
                    table.arg[j][i] = h;
                }
            }
        }
    }
    reconstruct(&table, candidates, k, oracle)
}

/// Binary-search DP: relies on `A[., j-1]` growing and `M(h..i)` shrinking
/// in `h`, and evaluates only the two positions around their crossing.
pub fn dp_monotone<T: Scalar>(
    m: usize,
    k: usize,
    min_size: usize,
    candidates: &[usize],
    oracle: &impl VarianceOracle<T>,
) -> Result<Partitioning<T>> {
    check_candidates(m, k, min_size, candidates)?;
    let min_size = min_size.max(1);
    let c = candidates.len();
    let inf = T::infinity();
    let mut table = DpTable {
        value: vec![vec![inf; c]; k],
        arg: vec![vec![0; c]; k],
    };
    for (i, &cut) in candidates.iter().enumerate().skip(1) {
        if cut >= min_size {
            table.value[0][i] = oracle.max_variance(0..cut).variance;
        }
    }
    for j in 1..k {
        // first candidate reachable with j buckets
        let Some(first) = (1..c).find(|&h| table.value[j - 1][h].is_finite()) else {
            break;
        };
        for i in first + 1..c {
            // last h leaving at least min_size points for the final bucket
            let hi = match candidates[..i].partition_point(|&x| x + min_size <= candidates[i]) {
                0 => continue,
                n => n - 1,
            };
            if hi < first {
                continue;
            }
            let cost = |h: usize| oracle.max_variance(candidates[h]..candidates[i]).variance;
            // first h in [first, hi] with A[h, j-1] >= M(h..i)
            let (mut lo, mut up) = (first, hi + 1);
            while lo < up {
                let mid = lo + (up - lo) / 2;
                if table.value[j - 1][mid] >= cost(mid) {
                    up = mid;
                } else {
                    lo = mid + 1;
                }
            }
            let mut best = (inf, 0);
            for h in [lo.wrapping_sub(1), lo] {
                if h < first || h > hi {
                    continue;
                }
                let v = table.value[j - 1][h].max_of(cost(h));
                if v < best.0 {
                    best = (v, h);
                }
            }
            table.value[j][i] = best.0;
            table.arg[j][i] = best.1;
        }
    }
    reconstruct(&table, candidates, k, oracle)
}

/// Sizes differing by at most one, larger buckets first.
pub fn equal_count_partition(n: usize, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > n {
        return Err(Error::Infeasible(format!("cannot split {n} items into {k} buckets")));
    }
    let (base, extra) = (n / k, n % k);
    let mut cuts = Vec::with_capacity(k + 1);
    cuts.push(0);
    for i in 0..k {
        let last = *cuts.last().unwrap();
        cuts.push(last + base + usize::from(i < extra));
    }
    Ok(cuts)
}

/// Equal-count cuts moved onto permitted positions: each cut goes to the
/// nearest candidate (lower on ties) after the previous cut.
fn snap_cuts(ideal: &[usize], candidates: &[usize]) -> Result<Vec<usize>> {
    let m = *candidates.last().unwrap();
    let mut out = vec![0];
    for &cut in &ideal[1..ideal.len() - 1] {
        let prev = *out.last().unwrap();
        let pos = candidates.partition_point(|&c| c < cut);
        let above = candidates[pos..].iter().copied().find(|&c| c > prev && c < m);
        let below = candidates[..pos].iter().rev().copied().find(|&c| c > prev);
        let pick = match (below, above) {
            (Some(b), Some(a)) => {
                if cut - b <= a - cut {
                    b
                } else {
                    a
                }
            }
            (Some(b), None) => b,
            (None, Some(a)) => a,
            (None, None) => {
                return Err(Error::Infeasible(
                    "too many equal predicate values for the requested k".into(),
                ))
            }
        };
        out.push(pick);
    }
    out.push(m);
    Ok(out)
}

/// Result of a 1-D optimization run.
#[derive(Debug, Clone)]
pub struct Optimized<T> {
    /// Leaf intervals in ascending order; they tile the real line.
    pub leaves: Vec<Rect<T>>,
    pub partitioning: Partitioning<T>,
    /// Sorted optimization sample coordinates.
    pub sample_coords: Vec<T>,
}

/// Draws the optimization sample along `dim`, runs the configured method and
/// maps sample cuts to domain boundaries halfway between neighbouring
/// distinct coordinates.
pub fn optimize<T: Scalar>(data: &Dataset<T>, dim: usize, cfg: &OptimizerConfig) -> Result<Optimized<T>> {
    if dim >= data.dimension() {
        return Err(Error::DimensionMismatch {
            expected: data.dimension(),
            actual: dim + 1,
        });
    }
    cfg.validate(data.len())?;
    let m = cfg.effective_m(data.len());
    let rows: Vec<usize> = if m == data.len() {
        (0..m).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        index::sample(&mut rng, data.len(), m).into_vec()
    };
    let mut pairs: Vec<(T, T)> = rows
        .iter()
        .map(|&r| (data.point(r)[dim], data.value(r)))
        .collect();
    pairs.sort_by(|a, b| a.0.order(&b.0).then(a.1.order(&b.1)));
    let coords: Vec<T> = pairs.iter().map(|p| p.0).collect();
    let prefix = PrefixSums::new(pairs.iter().map(|p| p.1).collect());

    let mut candidates = vec![0];
    candidates.extend((1..m).filter(|&i| coords[i - 1] < coords[i]));
    candidates.push(m);

    let d = cfg.delta_count(m);
    let min_size = cfg.min_bucket(m);
    let kind = cfg.objective;
    let partitioning = match cfg.method {
        Method::NaiveDp => dp_naive(m, cfg.k, min_size, &candidates, &ExhaustiveOracle { kind, prefix: &prefix, d })?,
        Method::MonotoneDp => dp_monotone(m, cfg.k, min_size, &candidates, &ExhaustiveOracle { kind, prefix: &prefix, d })?,
        Method::FastDp => dp_monotone(m, cfg.k, min_size, &candidates, &FastOracle::new(kind, &prefix, d))?,
        Method::EqualCount => {
            let cuts = snap_cuts(&equal_count_partition(m, cfg.k)?, &candidates)?;
            Partitioning::from_cuts(cuts, &FastOracle::new(kind, &prefix, d))
        }
        Method::KdGreedy => {
            return Err(Error::Config(
                "kd-greedy builds its own tree; use optimizer_kd".into(),
            ))
        }
    };
    let leaves = cut_rects(&coords, &partitioning.cuts);
    Ok(Optimized {
        leaves,
        partitioning,
        sample_coords: coords,
    })
}

/// Boundary strictly between `u < v`, at their midpoint when representable.
pub fn midpoint_cut<T: Scalar>(u: T, v: T) -> T {
    let mid = u + (v - u) / T::lit(2.0);
    if mid >= u && mid < v {
        mid
    } else {
        u
    }
}

/// Intervals `(-inf, c_1], [next_up(c_1), c_2], ..., [next_up(c_{k-1}), inf)`
/// for sample cuts at distinct neighbouring coordinates.
pub fn cut_rects<T: Scalar>(coords: &[T], cuts: &[usize]) -> Vec<Rect<T>> {
    let inner = &cuts[1..cuts.len() - 1];
    let bounds: Vec<T> = inner
        .iter()
        .map(|&c| midpoint_cut(coords[c - 1], coords[c]))
        .collect();
    let mut out = Vec::with_capacity(bounds.len() + 1);
    let mut lo = T::neg_infinity();
    for &b in &bounds {
        out.push(Rect::interval(lo, b).expect("ascending cuts"));
        lo = b.next_up();
    }
    out.push(Rect::interval(lo, T::infinity()).expect("ascending cuts"));
    out
}
