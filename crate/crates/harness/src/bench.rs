// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The PASS Authors

//! Accuracy benchmark: every method answers the same workload and the
//! answers are scored against full scans.

use std::time::{Duration, Instant};

use pass_core::{AggregateKind, Dataset, Error, Query};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::build::BuildConfig;
use crate::error::{HarnessError, Result};
use crate::methods::{AqpMethod, MethodSpec};
use crate::truth::ground_truth;
use crate::workload::{generate_workload, WorkloadSpec};

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "PASS_THREADS";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QueryRow {
    pub query: usize,
    pub method: String,
    pub kind: AggregateKind,
    /// `None` when no tuple matches an AVG/MIN/MAX query.
    pub truth: Option<f64>,
    pub estimate: Option<f64>,
    pub ci_half_width: Option<f64>,
    /// Finite hard bounds only.
    pub lb: Option<f64>,
    pub ub: Option<f64>,
    /// Defined for nonzero truth.
    pub relative_error: Option<f64>,
    pub absolute_error: Option<f64>,
    pub ci_ratio: Option<f64>,
    pub within_ci: Option<bool>,
    pub skip_rate: Option<f64>,
    pub partial_leaves: usize,
    pub sample_points_used: usize,
    pub error: Option<String>,
    pub latency_s: f64,
}

impl QueryRow {
    pub fn has_zero_truth(&self) -> bool {
        self.truth == Some(0.0)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    pub queries: usize,
    pub answered: usize,
    pub failed: usize,
    pub zero_truth: usize,
    pub median_relative_error: Option<f64>,
    pub median_ci_ratio: Option<f64>,
    /// Over zero-truth rows, which have no relative error.
    pub median_zero_truth_abs_error: Option<f64>,
    pub mean_skip_rate: Option<f64>,
    pub ci_coverage: Option<f64>,
    /// Mean sample tuples processed per answered query.
    pub effective_sample_size: f64,
    pub mean_latency_s: f64,
    pub build_time_s: f64,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

impl MethodSummary {
    /// Aggregates the detail rows of one method.
    pub fn from_rows(method: &str, rows: &[&QueryRow], build_time_s: f64) -> Self {
        let answered: Vec<&&QueryRow> = rows.iter().filter(|r| r.estimate.is_some()).collect();
        let scored: Vec<&&QueryRow> = answered.iter().copied().filter(|r| r.truth.is_some()).collect();
        Self {
            method: method.to_string(),
            queries: rows.len(),
            answered: answered.len(),
            failed: rows.len() - answered.len(),
            zero_truth: rows.iter().filter(|r| r.has_zero_truth()).count(),
            median_relative_error: median(scored.iter().filter_map(|r| r.relative_error).collect()),
            median_ci_ratio: median(scored.iter().filter_map(|r| r.ci_ratio).collect()),
            median_zero_truth_abs_error: median(
                scored
                    .iter()
                    .filter(|r| r.has_zero_truth())
                    .filter_map(|r| r.absolute_error)
                    .collect(),
            ),
            mean_skip_rate: mean(answered.iter().filter_map(|r| r.skip_rate)),
            ci_coverage: mean(
                scored
                    .iter()
                    .filter_map(|r| r.within_ci)
                    .map(|b| if b { 1.0 } else { 0.0 }),
            ),
            effective_sample_size: mean(answered.iter().map(|r| r.sample_points_used as f64))
                .unwrap_or(0.0),
            mean_latency_s: mean(rows.iter().map(|r| r.latency_s)).unwrap_or(0.0),
            build_time_s,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BenchReport {
    pub dataset_size: usize,
    pub dimension: usize,
    pub samples: usize,
    pub partitions: usize,
    pub seed: u64,
    pub methods: Vec<MethodSummary>,
    /// Sorted by method order, then query index.
    pub rows: Vec<QueryRow>,
}

const CSV_HEADER: [&str; 16] = [
    "query",
    "method",
    "kind",
    "truth",
    "estimate",
    "ci_half_width",
    "lb",
    "ub",
    "relative_error",
    "absolute_error",
    "ci_ratio",
    "within_ci",
    "skip_rate",
    "partial_leaves",
    "sample_points_used",
    "error",
];

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl BenchReport {
    pub fn rows_for<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a QueryRow> + 'a {
        self.rows.iter().filter(move |r| r.method == method)
    }

    pub fn summary(&self, method: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Per-query rows without timings, so equal seeds give equal bytes.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.query.to_string(),
                r.method.clone(),
                r.kind.to_string(),
                cell(r.truth),
                cell(r.estimate),
                cell(r.ci_half_width),
                cell(r.lb),
                cell(r.ub),
                cell(r.relative_error),
                cell(r.absolute_error),
                cell(r.ci_ratio),
                cell(r.within_ci),
                cell(r.skip_rate),
                r.partial_leaves.to_string(),
                r.sample_points_used.to_string(),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Recomputes every summary from the detail rows; build times are taken
    /// as reported.
    pub fn check_consistency(&self) -> Result<()> {
        for m in &self.methods {
            let rows: Vec<&QueryRow> = self.rows_for(&m.method).collect();
            let again = MethodSummary::from_rows(&m.method, &rows, m.build_time_s);
            if &again != m {
                return Err(HarnessError::Config(format!(
                    "summary of {} disagrees with its rows",
                    m.method
                )));
            }
        }
        Ok(())
    }
}

/// A method built and ready to answer.
pub struct Prepared {
    pub name: String,
    pub method: Box<dyn AqpMethod>,
    pub build_time: Duration,
}

impl Prepared {
    pub fn build(spec: MethodSpec, data: &Dataset, cfg: &BuildConfig) -> Result<Self> {
        let start = Instant::now();
        let method = spec.prepare(data, cfg)?;
        Ok(Self {
            name: spec.to_string(),
            method,
            build_time: start.elapsed(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub methods: Vec<MethodSpec>,
    /// Shared budget and PASS settings.
    pub build: BuildConfig,
    pub workload: WorkloadSpec,
    /// Worker threads; `None` reads `PASS_THREADS`, then uses every core.
    pub threads: Option<usize>,
}

pub fn thread_count(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok()))
        .unwrap_or(0)
}

fn in_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(threads))
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok(pool.install(f))
}

/// Tolerance for calling an interval hit: absorbs summation order
/// differences between aggregates and the reference scan.
fn tolerance(truth: f64) -> f64 {
    1e-9 * truth.abs().max(1.0)
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn score(
    query: usize,
    method: &str,
    q: &Query,
    truth: Option<f64>,
    n: usize,
    answered: pass_core::Result<pass_core::Estimate>,
    latency: Duration,
) -> QueryRow {
    let mut row = QueryRow {
        query,
        method: method.to_string(),
        kind: q.kind,
        truth,
        estimate: None,
        ci_half_width: None,
        lb: None,
        ub: None,
        relative_error: None,
        absolute_error: None,
        ci_ratio: None,
        within_ci: None,
        skip_rate: None,
        partial_leaves: 0,
        sample_points_used: 0,
        error: None,
        latency_s: latency.as_secs_f64(),
    };
    match answered {
        Ok(e) => {
            row.estimate = Some(e.value);
            row.ci_half_width = Some(e.ci_half_width);
            row.lb = finite(e.lb);
            row.ub = finite(e.ub);
            row.skip_rate = Some(e.skipped_population as f64 / n as f64);
            row.partial_leaves = e.partial_leaf_count;
            row.sample_points_used = e.sample_points_used;
            if let Some(t) = truth {
                let err = (e.value - t).abs();
                row.absolute_error = Some(err);
                if t != 0.0 {
                    row.relative_error = Some(err / t.abs());
                    row.ci_ratio = Some(e.ci_half_width / t.abs());
                }
                row.within_ci = Some(err <= e.ci_half_width + tolerance(t));
            }
        }
        Err(err) => {
            if let Error::NoMatchingSample { bounds: Some((lb, ub)) } = err {
                row.lb = finite(lb);
                row.ub = finite(ub);
            }
            row.error = Some(err.to_string());
        }
    }
    row
}

/// Answers `queries` with every prepared method. Per-query failures become
/// rows with an error message.
pub fn run_bench_with(
    data: &Dataset,
    methods: &[Prepared],
    queries: &[Query],
    build: &BuildConfig,
    threads: Option<usize>,
) -> Result<BenchReport> {
    for q in queries {
        q.check_dimension(data.dimension())?;
    }
    let n = data.len();
    let rows = in_pool(threads, || {
        let truths: Vec<Option<f64>> = queries
            .par_iter()
            .map(|q| ground_truth(data, q).ok())
            .collect();
        let mut rows = Vec::with_capacity(methods.len() * queries.len());
        for m in methods {
            let part: Vec<QueryRow> = queries
                .par_iter()
                .enumerate()
                .map(|(i, q)| {
                    let start = Instant::now();
                    let answered = m.method.answer(q);
                    let latency = start.elapsed();
                    score(i, &m.name, q, truths[i], n, answered, latency)
                })
                .collect();
            rows.extend(part);
        }
        rows
    })?;
    let methods = methods
        .iter()
        .map(|m| {
            let mine: Vec<&QueryRow> = rows.iter().filter(|r| r.method == m.name).collect();
            MethodSummary::from_rows(&m.name, &mine, m.build_time.as_secs_f64())
        })
        .collect();
    Ok(BenchReport {
        dataset_size: n,
        dimension: data.dimension(),
        samples: build.samples,
        partitions: build.k,
        seed: build.seed,
        methods,
        rows,
    })
}

pub fn run_bench(data: &Dataset, cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.methods.is_empty() {
        return Err(HarnessError::Config("no methods to benchmark".into()));
    }
    let queries = generate_workload(data, &cfg.workload)?;
    let prepared = cfg
        .methods
        .iter()
        .map(|&spec| Prepared::build(spec, data, &cfg.build))
        .collect::<Result<Vec<_>>>()?;
    run_bench_with(data, &prepared, &queries, &cfg.build, cfg.threads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use pass_core::{Rect, Tuple};

    fn data(n: usize) -> Dataset {
        let tuples = (0..n)
            .map(|i| Tuple::new(vec![i as f64], if i % 3 == 0 { 0.0 } else { (i % 17) as f64 }))
            .collect();
        Dataset::new(1, tuples).unwrap()
    }

    fn config(methods: Vec<MethodSpec>, count: usize) -> BenchConfig {
        BenchConfig {
            methods,
            build: BuildConfig { k: 8, samples: 200, m: 0, ..BuildConfig::default() },
            workload: WorkloadSpec::mixed(&AggregateKind::ALL, count, 4),
            threads: Some(2),
        }
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(vec![]), None);
        assert_eq!(median(vec![3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(vec![4.0, 1.0, 3.0, 2.0]), Some(2.5));
    }

    #[test]
    fn single_method_report() {
        let d = data(1_000);
        let r = run_bench(&d, &config(vec![MethodSpec::Uniform], 50)).unwrap();
        assert_eq!(r.methods.len(), 1);
        assert_eq!(r.rows.len(), 50);
        r.check_consistency().unwrap();
    }

    #[test]
    fn summaries_follow_rows() {
        let d = data(2_000);
        let cfg = config(vec![MethodSpec::Pass(None), MethodSpec::Uniform, MethodSpec::StratifiedEq], 120);
        let r = run_bench(&d, &cfg).unwrap();
        r.check_consistency().unwrap();
        assert_eq!(r.rows.len(), 360);
        for m in &r.methods {
            let rows: Vec<&QueryRow> = r.rows_for(&m.method).collect();
            assert!(rows.windows(2).all(|w| w[0].query < w[1].query));
        }
        let pass = r.summary("pass").unwrap();
        assert!(pass.mean_skip_rate.unwrap() > 0.5);
        assert_eq!(r.summary("uniform").unwrap().mean_skip_rate, Some(0.0));
        let mut tampered = r.clone();
        tampered.methods[0].median_relative_error = Some(123.0);
        assert!(tampered.check_consistency().is_err());
    }

    #[test]
    fn aligned_queries_have_zero_error() {
        let d = data(1_000);
        let build = BuildConfig { k: 8, samples: 100, m: 0, ..BuildConfig::default() };
        let pass = Prepared::build(MethodSpec::Pass(None), &d, &build).unwrap();
        let s = crate::build::build_synopsis(&d, &BuildConfig { method: pass_core::optimizer1d::Method::FastDp, ..build.clone() }).unwrap();
        let leaves: Vec<Rect> = s.leaves().iter().map(|&l| s.nodes()[l].rect.clone()).collect();
        let queries: Vec<Query> = (0..leaves.len())
            .flat_map(|a| (a..leaves.len()).map(move |b| (a, b)))
            .map(|(a, b)| Query::new(AggregateKind::Sum, Rect::interval(leaves[a].lo()[0], leaves[b].hi()[0]).unwrap()))
            .collect();
        let r = run_bench_with(&d, &[pass], &queries, &build, Some(1)).unwrap();
        assert_eq!(r.methods[0].median_relative_error, Some(0.0));
        assert!(r.rows.iter().all(|row| row.ci_half_width == Some(0.0)));
    }

    #[test]
    fn csv_is_deterministic_across_thread_counts() {
        let d = data(1_500);
        let mut cfg = config(vec![MethodSpec::Pass(None), MethodSpec::StratifiedEq], 80);
        let a = run_bench(&d, &cfg).unwrap().to_csv().unwrap();
        cfg.threads = Some(1);
        let b = run_bench(&d, &cfg).unwrap().to_csv().unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("query,method,kind,truth"));
        assert!(!a.contains("latency"));
    }

    #[test]
    fn failures_are_rows() {
        let d = data(100);
        let build = BuildConfig { k: 2, samples: 4, m: 0, ..BuildConfig::default() };
        let u = Prepared::build(MethodSpec::Uniform, &d, &build).unwrap();
        // narrow AVG queries mostly miss a 4-tuple sample
        let queries: Vec<Query> = (0..20)
            .map(|i| Query::new(AggregateKind::Avg, Rect::interval(i as f64 * 5.0, i as f64 * 5.0 + 0.5).unwrap()))
            .collect();
        let r = run_bench_with(&d, &[u], &queries, &build, Some(1)).unwrap();
        assert!(r.methods[0].failed > 0);
        assert!(r.rows.iter().any(|row| row.error.is_some()));
    }
}
