//! Command-line interface.
//!
//! Four entry points: `run` executes a batch experiment from a JSON config,
//! `design` solves a single sampling design, `benchmark` evaluates the oracle
//! sample-complexity bound for an instance, and `bai run` runs one algorithm
//! on one instance. All commands write their artifacts to disk and print a
//! short confirmation; exit code 0 means success, 2 a configuration problem,
//! 3 a partially failed batch.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use semibai_core::solvers::Certificates;
use semibai_core::{
    g_opt_semiparametric, solve_g_optimal_linear, solve_xy_linear, tau_lin_star, xor_design,
    FeatureSet, Policy, SolverConfig,
};

use crate::harness::{self, AlgoSpec, ExperimentConfig, InstanceSpec};
use crate::io;
use crate::{Error, Result};

#[derive(Parser)]
#[command(name = "semibai", version, about = "Best-arm identification toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch experiment described by a JSON config file.
    Run(RunArgs),
    /// Solve a sampling design over a feature CSV and write it as JSON.
    Design(DesignArgs),
    /// Evaluate the oracle sample-complexity benchmark for an instance.
    Benchmark(BenchmarkArgs),
    /// Single-algorithm best-arm identification.
    #[command(subcommand)]
    Bai(BaiCommand),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Override the number of runs per algorithm.
    #[arg(long)]
    runs: Option<usize>,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the worker count.
    #[arg(long)]
    parallel: Option<usize>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum DesignKind {
    /// Contrast design over the pairwise differences of the active set.
    Xy,
    /// Minimax-variance design over the source arms.
    G,
    /// Anchored contrast design for shift-robust sampling.
    Xor,
    /// Anchored minimax-variance design for shift-robust sampling.
    Gsemi,
}

#[derive(Args)]
struct DesignArgs {
    /// Source arm features (CSV with header f0..f{d-1}).
    #[arg(long)]
    source: PathBuf,
    /// Active target features (CSV, same format); required for xy and xor.
    #[arg(long)]
    active: Option<PathBuf>,
    /// Which design to solve.
    #[arg(long, value_enum)]
    kind: DesignKind,
    /// Anchor arm index for the anchored designs.
    #[arg(long, default_value_t = 0)]
    anchor: usize,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Instance JSON document.
    #[arg(long)]
    instance: PathBuf,
    /// Anchor arm index.
    #[arg(long, default_value_t = 0)]
    anchor: usize,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum BaiCommand {
    /// Run one algorithm repeatedly on one instance.
    Run(BaiRunArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum AlgoKind {
    Spbai,
    Sbe,
    Gopt,
    Rage,
    Lucb,
    Ae,
}

#[derive(Args)]
struct BaiRunArgs {
    /// Instance file: `.csv` is read as a rating matrix, anything else as
    /// instance JSON.
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum)]
    algo: AlgoKind,
    /// Failure probability.
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Noise scale handed to the confidence-interval baselines.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Gap knowledge for the one-shot baseline (defaults to the oracle gap).
    #[arg(long)]
    known_gap: Option<f64>,
    #[arg(long, default_value_t = 20)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    #[arg(long, default_value = "out")]
    out: String,
    /// Rating value that marks a missing entry (rating CSVs only).
    #[arg(long, default_value_t = 99.0)]
    missing_marker: f64,
    /// Treat the first rating CSV column as a user id, not an item.
    #[arg(long)]
    user_col: bool,
}

/// What `design` writes: the policy plus its certificate block.
#[derive(Serialize)]
struct DesignReport {
    policy: Policy,
    objective: f64,
    duality_gap: f64,
    certificates: Certificates,
}

/// Parse argv and execute. Returns normally on success; argument-syntax
/// errors exit with code 2 via clap.
pub fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Design(args) => cmd_design(args),
        Command::Benchmark(args) => cmd_benchmark(args),
        Command::Bai(BaiCommand::Run(args)) => cmd_bai_run(args),
    }
}

fn print_summary(rows: &[harness::SummaryRow], out_dir: &str) {
    println!("algorithm avg_tau std_tau error_prob runs");
    for row in rows {
        println!(
            "{} {:.1} {:.1} {:.3} {}",
            row.algorithm, row.avg_tau, row.std_tau, row.error_prob, row.runs
        );
    }
    println!("artifacts written to {out_dir}");
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut cfg = harness::load_config(&args.config)?;
    if let Some(runs) = args.runs {
        cfg.runs = runs;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(parallel) = args.parallel {
        cfg.parallelism = parallel;
    }
    if let Some(out) = args.out {
        cfg.out_dir = out;
    }
    let rows = harness::run_experiment(&cfg)?;
    print_summary(&rows, &cfg.out_dir);
    Ok(())
}

/// Pairwise differences of the active rows, dropping exact duplicates.
fn pairwise_contrasts(active: &FeatureSet) -> Result<Vec<Vec<f64>>> {
    let mut contrasts = Vec::new();
    for i in 0..active.len() {
        for j in (i + 1)..active.len() {
            let c: Vec<f64> = active
                .get(i)
                .iter()
                .zip(active.get(j))
                .map(|(a, b)| a - b)
                .collect();
            if c.iter().any(|&v| v != 0.0) {
                contrasts.push(c);
            }
        }
    }
    if contrasts.is_empty() {
        return Err(Error::config("active set contains no distinct pair of arms"));
    }
    Ok(contrasts)
}

fn cmd_design(args: DesignArgs) -> Result<()> {
    let source = io::load_features_csv(&args.source)?;
    let needs_active = matches!(args.kind, DesignKind::Xy | DesignKind::Xor);
    if needs_active != args.active.is_some() {
        return Err(Error::config(if needs_active {
            "this design kind requires --active"
        } else {
            "--active is only meaningful for the xy and xor designs"
        }));
    }
    let cfg = SolverConfig::default();
    let solution = match args.kind {
        DesignKind::Xy => {
            let active = io::load_features_csv(args.active.as_ref().unwrap())?;
            solve_xy_linear(&source, &pairwise_contrasts(&active)?, &cfg)?
        }
        DesignKind::G => solve_g_optimal_linear(&source, &cfg)?,
        DesignKind::Xor => {
            let active = io::load_features_csv(args.active.as_ref().unwrap())?;
            xor_design(&active, &source, args.anchor, &cfg)?
        }
        DesignKind::Gsemi => g_opt_semiparametric(&source, args.anchor, &cfg)?,
    };
    let report = DesignReport {
        policy: solution.policy,
        objective: solution.objective,
        duality_gap: solution.duality_gap,
        certificates: solution.certificates,
    };
    write_json(&args.out, &report)?;
    println!(
        "objective {} (duality gap {}); design written to {}",
        report.objective,
        report.duality_gap,
        args.out.display()
    );
    Ok(())
}

fn cmd_benchmark(args: BenchmarkArgs) -> Result<()> {
    let file = io::load_instance_json(&args.instance)?;
    let result = tau_lin_star(
        &file.targets,
        &file.source,
        &file.theta_star,
        args.anchor,
        &SolverConfig::default(),
    )?;
    write_json(&args.out, &result)?;
    println!("tau_star {} at anchor {}; written to {}", result.tau_star, result.anchor, args.out.display());
    Ok(())
}

fn cmd_bai_run(args: BaiRunArgs) -> Result<()> {
    let path = args.instance.to_string_lossy().into_owned();
    let is_csv = args
        .instance
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let instance = if is_csv {
        InstanceSpec::Ratings {
            path,
            missing_marker: args.missing_marker,
            user_id_column: args.user_col,
        }
    } else {
        InstanceSpec::File { path }
    };
    let algorithm = match args.algo {
        AlgoKind::Spbai => AlgoSpec::Spbai,
        AlgoKind::Sbe => AlgoSpec::Sbe,
        AlgoKind::Gopt => AlgoSpec::Gopt { known_gap: args.known_gap },
        AlgoKind::Rage => AlgoSpec::Rage { sigma: args.sigma },
        AlgoKind::Lucb => AlgoSpec::Lucb { sigma: args.sigma },
        AlgoKind::Ae => AlgoSpec::Ae { sigma: args.sigma },
    };
    let cfg = ExperimentConfig {
        instance,
        algorithms: vec![algorithm],
        delta: args.delta,
        runs: args.runs,
        seed: args.seed,
        parallelism: args.parallel,
        out_dir: args.out.clone(),
        enforce_unit_ball: false,
        shift: semibai_core::ShiftKind::Constant { value: 0.0 },
        noise_std: 1.0,
    };
    let rows = harness::run_experiment(&cfg)?;
    print_summary(&rows, &cfg.out_dir);
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    io::ensure_parent(path)?;
    let text = serde_json::to_string_pretty(value)
        .map_err(|source| Error::Json { path: path.to_path_buf(), source })?;
    fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}
