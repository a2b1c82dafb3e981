// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The PASS Authors

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pass_core::optimizer1d::Method;
use pass_core::optimizer_kd::Fanout;
use pass_core::{AggregateKind, EstimatorConfig, Query, Synopsis, DEFAULT_LAMBDA};
use pass_harness::bench::{run_bench, BenchConfig};
use pass_harness::build::{build_synopsis, BuildConfig};
use pass_harness::cli::{answer_json, query_rect, RangeArg};
use pass_harness::ingest::{ingest_csv, IngestOptions};
use pass_harness::methods::MethodSpec;
use pass_harness::workload::WorkloadSpec;
use pass_harness::{synth, HarnessError, Result};

#[derive(Parser)]
#[command(name = "pass", version, about = "Partitioned approximate aggregation synopses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Adversarial,
    Mixed,
}

#[derive(clap::Args)]
struct Input {
    #[arg(long)]
    input: PathBuf,
    /// Comma separated predicate column names.
    #[arg(long, value_delimiter = ',', required = true)]
    pred_cols: Vec<String>,
    #[arg(long)]
    agg_col: String,
    /// Skip rows with missing or non-finite fields.
    #[arg(long)]
    lenient: bool,
}

#[derive(clap::Args)]
struct Budget {
    /// Number of leaf partitions.
    #[arg(long, default_value_t = 32)]
    k: usize,
    /// Total sample budget; defaults to 0.5% of the rows (at least k).
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = pass_core::optimizer1d::DEFAULT_DELTA)]
    delta: f64,
    /// Optimization sample size; 0 optimizes over every row.
    #[arg(long, default_value_t = 10_000)]
    m: usize,
    #[arg(long, default_value = "sum")]
    objective: AggregateKind,
    /// Dimension split by the 1-D optimizers.
    #[arg(long, default_value_t = 0)]
    dim: usize,
    #[arg(long, value_enum, default_value = "binary")]
    fanout: FanoutArg,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long)]
    no_fpc: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum FanoutArg {
    Binary,
    Full,
}

impl Budget {
    fn config(&self, rows: usize, method: Method) -> BuildConfig {
        let samples = self
            .samples
            .unwrap_or_else(|| ((rows as f64 * 0.005).ceil() as usize).max(self.k));
        BuildConfig {
            method,
            k: self.k,
            samples,
            delta: self.delta,
            m: self.m,
            objective: self.objective,
            dim: self.dim,
            kd_fanout: match self.fanout {
                FanoutArg::Binary => Fanout::Binary,
                FanoutArg::Full => Fanout::Full,
            },
            estimator: EstimatorConfig {
                lambda: self.lambda,
                fpc_enabled: !self.no_fpc,
            },
            seed: self.seed,
            ..BuildConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a partitioning and write the synopsis as JSON.
    Build {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        budget: Budget,
        #[arg(long, default_value = "fast-dp")]
        method: Method,
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer one range query from a saved synopsis.
    Query {
        #[arg(long)]
        synopsis: PathBuf,
        #[arg(long)]
        kind: AggregateKind,
        /// DIM:LO:HI, repeatable; unrestricted dimensions are unbounded.
        #[arg(long = "range")]
        ranges: Vec<RangeArg>,
    },
    /// Compare methods on a random workload.
    Bench {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        budget: Budget,
        /// Comma separated: pass, pass:<optimizer>, uniform, stratified-eq.
        #[arg(long, value_delimiter = ',', default_value = "pass,stratified-eq,uniform")]
        methods: Vec<String>,
        #[arg(long, default_value_t = 2_000)]
        queries: usize,
        /// Comma separated query kinds.
        #[arg(long, value_delimiter = ',', default_value = "sum")]
        kinds: Vec<AggregateKind>,
        #[arg(long, default_value_t = 0.0)]
        min_selectivity: f64,
        /// Worker threads; overrides PASS_THREADS.
        #[arg(long)]
        threads: Option<usize>,
        /// JSON and CSV report paths, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1..=2)]
        report: Vec<PathBuf>,
    },
    /// Write a synthetic dataset as CSV.
    Synth {
        #[arg(long, value_enum, default_value = "adversarial")]
        kind: SynthKind,
        #[arg(long, default_value_t = 100_000)]
        rows: usize,
        /// Predicate dimensions (mixed only).
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Build {
            input,
            budget,
            method,
            out,
        } => {
            let ingested = ingest_csv(&input.input, &input.pred_cols, &input.agg_col, IngestOptions { lenient: input.lenient })?;
            if ingested.skipped > 0 {
                eprintln!("skipped {} rows", ingested.skipped);
            }
            let cfg = budget.config(ingested.dataset.len(), method);
            let synopsis = build_synopsis(&ingested.dataset, &cfg)?;
            write(&out, &synopsis.to_json()?)?;
            eprintln!(
                "{} leaves, {} sampled tuples, height {}",
                synopsis.leaf_count(),
                synopsis.total_sample_size(),
                synopsis.height()
            );
        }
        Command::Query {
            synopsis,
            kind,
            ranges,
        } => {
            let text = fs::read_to_string(&synopsis).map_err(|e| HarnessError::io(&synopsis, e))?;
            let s = Synopsis::from_json(&text)?;
            let query = Query::new(kind, query_rect(s.dimension(), &ranges)?);
            println!("{}", answer_json(&s, &query)?);
        }
        Command::Bench {
            input,
            budget,
            methods,
            queries,
            kinds,
            min_selectivity,
            threads,
            report,
        } => {
            let ingested = ingest_csv(&input.input, &input.pred_cols, &input.agg_col, IngestOptions { lenient: input.lenient })?;
            let data = ingested.dataset;
            let methods = methods
                .iter()
                .map(|m| m.parse::<MethodSpec>())
                .collect::<Result<Vec<_>>>()?;
            let cfg = BenchConfig {
                methods,
                build: budget.config(data.len(), Method::FastDp),
                workload: WorkloadSpec {
                    min_selectivity,
                    ..WorkloadSpec::mixed(&kinds, queries, budget.seed)
                },
                threads,
            };
            let r = run_bench(&data, &cfg)?;
            for m in &r.methods {
                println!(
                    "{:<20} median_rel_err={:<12} median_ci_ratio={:<12} skip={:<8} ess={:.1} failed={}",
                    m.method,
                    fmt_opt(m.median_relative_error),
                    fmt_opt(m.median_ci_ratio),
                    fmt_opt(m.mean_skip_rate),
                    m.effective_sample_size,
                    m.failed
                );
            }
            for path in &report {
                let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
                write(path, &if is_csv { r.to_csv()? } else { r.to_json()? })?;
            }
        }
        Command::Synth {
            kind,
            rows,
            d,
            seed,
            out,
        } => {
            let data = match kind {
                SynthKind::Adversarial => synth::adversarial(rows, seed)?,
                SynthKind::Mixed => synth::mixed(rows, d, 1_000, seed)?,
            };
            let file = fs::File::create(&out).map_err(|e| HarnessError::io(&out, e))?;
            synth::write_csv(&data, std::io::BufWriter::new(file))?;
        }
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
