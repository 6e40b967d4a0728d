//! Batch experiment orchestration.
//!
//! [`run_experiment`] builds one instance, runs every configured algorithm
//! `runs` times with per-run isolated seeds, judges each recommendation
//! against the oracle best, writes one JSONL log per run plus `summary.csv`
//! and `plotdata.csv`, and returns the summary rows. Serial and parallel
//! execution produce byte-identical summaries, and the CSVs are pure
//! functions of the logs.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use semibai_core::baselines::{self, BaselineConfig};
use semibai_core::envs::{
    make_small_gap_instance, make_uniform_sphere_instance, one_hot_features, BanditEnv,
    Environment, RatingMatrix, RatingReplayEnv, ShiftKind,
};
use semibai_core::estimator;
use semibai_core::spbai::{run_sp_bai, BaiConfig, PhaseRecord, RunResult};
use semibai_core::{g_opt_semiparametric, FeatureSet, SolverConfig};

use crate::io;
use crate::{Error, Result};

/// Failure probability used by the one-shot ranking experiment's estimator.
const RANKING_DELTA: f64 = 0.1;

/// Where the instance comes from: a named generator or a file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceSpec {
    /// Standard basis plus one extra arm at angle `alpha` from the best.
    SmallGap { d: usize, alpha: f64 },
    /// `k` arms drawn uniformly on the unit sphere.
    UniformSphere { d: usize, k: usize, seed: u64 },
    /// Instance JSON document (see [`io::InstanceFile`]).
    File { path: String },
    /// Rating-matrix CSV replayed as a bandit.
    Ratings {
        path: String,
        #[serde(default = "default_missing_marker")]
        missing_marker: f64,
        #[serde(default)]
        user_id_column: bool,
    },
}

fn default_missing_marker() -> f64 {
    99.0
}

/// One algorithm entry in a config; the parameters that vary per entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algo", rename_all = "snake_case")]
pub enum AlgoSpec {
    Spbai,
    Sbe,
    Gopt {
        /// Smallest-gap oracle knowledge; defaults to the instance's true
        /// minimum gap.
        #[serde(default)]
        known_gap: Option<f64>,
    },
    Rage { sigma: f64 },
    Lucb { sigma: f64 },
    Ae { sigma: f64 },
}

impl AlgoSpec {
    /// Stable label used in summaries and log paths.
    pub fn label(&self) -> String {
        match self {
            AlgoSpec::Spbai => "spbai".to_string(),
            AlgoSpec::Sbe => "sbe".to_string(),
            AlgoSpec::Gopt { .. } => "gopt".to_string(),
            AlgoSpec::Rage { sigma } => format!("rage_sigma_{sigma}"),
            AlgoSpec::Lucb { sigma } => format!("lucb_sigma_{sigma}"),
            AlgoSpec::Ae { sigma } => format!("ae_sigma_{sigma}"),
        }
    }
}

/// A full batch-experiment description. The `shift`/`noise_std` fields apply
/// to generated instances; `File` instances carry their own environment and
/// `Ratings` instances replay recorded rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub instance: InstanceSpec,
    pub algorithms: Vec<AlgoSpec>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
    #[serde(default)]
    pub enforce_unit_ball: bool,
    #[serde(default = "default_shift")]
    pub shift: ShiftKind,
    #[serde(default = "default_noise_std")]
    pub noise_std: f64,
}

fn default_delta() -> f64 {
    0.1
}

/// Desk-scale default; full-fidelity studies typically use 100.
fn default_runs() -> usize {
    20
}

fn default_parallelism() -> usize {
    1
}

fn default_out_dir() -> String {
    "out".to_string()
}

fn default_shift() -> ShiftKind {
    ShiftKind::Constant { value: 0.0 }
}

fn default_noise_std() -> f64 {
    1.0
}

/// One summary table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub avg_tau: f64,
    pub std_tau: f64,
    pub error_prob: f64,
    pub runs: usize,
}

/// Load a config JSON document.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.to_path_buf(), source })
}

/// SplitMix64 finalizer; decorrelates the per-run seeds handed to the
/// environment and the algorithm.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// The instance, built once per experiment.
enum BuiltInstance {
    Simulated {
        source: FeatureSet,
        targets: FeatureSet,
        theta_star: Vec<f64>,
        shift: ShiftKind,
        noise_std: f64,
        best: usize,
        min_gap: f64,
    },
    Replay {
        matrix: RatingMatrix,
        features: FeatureSet,
        best: usize,
        min_gap: f64,
    },
}

impl BuiltInstance {
    fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let simulated = |source: FeatureSet,
                         targets: FeatureSet,
                         theta_star: Vec<f64>,
                         shift: ShiftKind,
                         noise_std: f64|
         -> Result<BuiltInstance> {
            let inst = semibai_core::Instance {
                source: source.clone(),
                targets: targets.clone(),
                theta_star: theta_star.clone(),
            };
            let best = inst.best_target()?;
            // A singleton candidate set has no runner-up; the infinite gap is
            // only ever consumed by the one-shot baseline's accuracy clamp.
            let min_gap = if targets.len() < 2 { f64::INFINITY } else { inst.min_gap()? };
            Ok(BuiltInstance::Simulated { source, targets, theta_star, shift, noise_std, best, min_gap })
        };
        match &cfg.instance {
            InstanceSpec::SmallGap { d, alpha } => {
                let inst = make_small_gap_instance(*d, *alpha)?;
                simulated(inst.source, inst.targets, inst.theta_star, cfg.shift.clone(), cfg.noise_std)
            }
            InstanceSpec::UniformSphere { d, k, seed } => {
                let inst = make_uniform_sphere_instance(*d, *k, *seed)?;
                simulated(inst.source, inst.targets, inst.theta_star, cfg.shift.clone(), cfg.noise_std)
            }
            InstanceSpec::File { path } => {
                let file = io::load_instance_json(Path::new(path))?;
                simulated(file.source, file.targets, file.theta_star, file.shift, file.noise_std)
            }
            InstanceSpec::Ratings { path, missing_marker, user_id_column } => {
                let matrix =
                    io::load_ratings_csv(Path::new(path), *missing_marker, *user_id_column)?;
                // A probe replay computes the oracle once; every run re-seeds
                // its own copy.
                let probe = RatingReplayEnv::new(&matrix, 0)?;
                let best = probe.best_item();
                let means = probe.item_means();
                let second = means
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != best)
                    .map(|(_, &m)| m)
                    .fold(f64::NEG_INFINITY, f64::max);
                let min_gap = means[best] - second;
                let features = one_hot_features(means.len());
                Ok(BuiltInstance::Replay { matrix, features, best, min_gap })
            }
        }
    }

    fn source(&self) -> &FeatureSet {
        match self {
            BuiltInstance::Simulated { source, .. } => source,
            BuiltInstance::Replay { features, .. } => features,
        }
    }

    fn targets(&self) -> &FeatureSet {
        match self {
            BuiltInstance::Simulated { targets, .. } => targets,
            BuiltInstance::Replay { features, .. } => features,
        }
    }

    fn best(&self) -> usize {
        match self {
            BuiltInstance::Simulated { best, .. } => *best,
            BuiltInstance::Replay { best, .. } => *best,
        }
    }

    fn min_gap(&self) -> f64 {
        match self {
            BuiltInstance::Simulated { min_gap, .. } => *min_gap,
            BuiltInstance::Replay { min_gap, .. } => *min_gap,
        }
    }

    fn make_env(&self, seed: u64, enforce_unit_ball: bool) -> Result<Box<dyn BanditEnv>> {
        match self {
            BuiltInstance::Simulated { source, theta_star, shift, noise_std, .. } => {
                Ok(Box::new(Environment::new(
                    source.clone(),
                    theta_star.clone(),
                    shift.clone(),
                    *noise_std,
                    seed,
                    enforce_unit_ball,
                )?))
            }
            BuiltInstance::Replay { matrix, .. } => Ok(Box::new(RatingReplayEnv::new(matrix, seed)?)),
        }
    }
}

/// Execute one (algorithm, run index) cell.
fn run_one(
    algo: &AlgoSpec,
    built: &BuiltInstance,
    cfg: &ExperimentConfig,
    run_index: usize,
) -> Result<RunResult> {
    let base = cfg.seed ^ run_index as u64;
    let env_seed = splitmix64(base);
    let algo_seed = splitmix64(base ^ 0x9E37_79B9_7F4A_7C15);
    let mut env = built.make_env(env_seed, cfg.enforce_unit_ball)?;
    let source = built.source();
    let targets = built.targets();

    let start = Instant::now();
    let mut result = match algo {
        AlgoSpec::Spbai => {
            let mut c = BaiConfig::new(cfg.delta);
            c.rng_seed = algo_seed;
            run_sp_bai(source, targets, env.as_mut(), &c)?
        }
        AlgoSpec::Sbe => {
            let mut c = BaselineConfig::new(cfg.delta);
            c.seed = algo_seed;
            baselines::run_sbe(source, targets, env.as_mut(), &c)?
        }
        AlgoSpec::Gopt { known_gap } => {
            let mut c = BaselineConfig::new(cfg.delta);
            c.seed = algo_seed;
            c.known_gap = Some(known_gap.unwrap_or_else(|| built.min_gap()));
            baselines::run_g_opt_oneshot(source, targets, env.as_mut(), &c)?
        }
        AlgoSpec::Rage { sigma } => {
            let mut c = BaselineConfig::new(cfg.delta);
            c.seed = algo_seed;
            c.sigma = *sigma;
            baselines::run_rage(source, targets, env.as_mut(), &c)?
        }
        AlgoSpec::Lucb { sigma } => {
            let mut c = BaselineConfig::new(cfg.delta);
            c.seed = algo_seed;
            c.sigma = *sigma;
            baselines::run_lucb(env.as_mut(), &c)?
        }
        AlgoSpec::Ae { sigma } => {
            let mut c = BaselineConfig::new(cfg.delta);
            c.seed = algo_seed;
            c.sigma = *sigma;
            baselines::run_ae(env.as_mut(), &c)?
        }
    };
    result.wall_time = start.elapsed().as_secs_f64();
    result.correct = Some(result.recommended == built.best());
    Ok(result)
}

/// One line of a per-run JSONL log.
#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LogLine {
    Phase(PhaseRecord),
    Result {
        recommended: usize,
        tau: u64,
        correct: bool,
        wall_time: f64,
        budget_exhausted: bool,
    },
}

fn render_log(result: &RunResult) -> String {
    let mut out = String::new();
    for phase in &result.phases {
        out.push_str(&serde_json::to_string(&LogLine::Phase(phase.clone())).expect("serializable"));
        out.push('\n');
    }
    let tail = LogLine::Result {
        recommended: result.recommended,
        tau: result.tau,
        correct: result.correct.unwrap_or(false),
        wall_time: result.wall_time,
        budget_exhausted: result.budget_exhausted,
    };
    out.push_str(&serde_json::to_string(&tail).expect("serializable"));
    out.push('\n');
    out
}

fn validate_config(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.runs < 1 {
        return Err(Error::config("runs must be at least 1"));
    }
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return Err(Error::config("delta must lie in (0, 1)"));
    }
    if cfg.parallelism < 1 {
        return Err(Error::config("parallelism must be at least 1"));
    }
    if cfg.algorithms.is_empty() {
        return Err(Error::config("at least one algorithm is required"));
    }
    let mut labels: Vec<String> = cfg.algorithms.iter().map(AlgoSpec::label).collect();
    labels.sort();
    labels.dedup();
    if labels.len() != cfg.algorithms.len() {
        return Err(Error::config("algorithm labels must be unique"));
    }
    Ok(())
}

/// Sample standard deviation (0 for fewer than two observations).
fn sample_std(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Nearest-rank quantile of a sorted slice.
fn quantile_nearest_rank(sorted: &[u64], q: f64) -> u64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    let rank = (q * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

const PLOT_QUANTILES: [f64; 7] = [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0];

/// Reduce one algorithm's ordered run results to a summary row.
fn summarize(label: &str, results: &[RunResult]) -> SummaryRow {
    let taus: Vec<f64> = results.iter().map(|r| r.tau as f64).collect();
    let avg_tau = taus.iter().sum::<f64>() / taus.len() as f64;
    let std_tau = sample_std(&taus, avg_tau);
    let errors = results.iter().filter(|r| r.correct != Some(true)).count();
    SummaryRow {
        algorithm: label.to_string(),
        avg_tau,
        std_tau,
        error_prob: errors as f64 / results.len() as f64,
        runs: results.len(),
    }
}

fn render_summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("algorithm,avg_tau,std_tau,error_prob,runs\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.algorithm, row.avg_tau, row.std_tau, row.error_prob, row.runs
        ));
    }
    out
}

fn render_plotdata_csv(per_algo: &[(String, Vec<u64>)]) -> String {
    let mut out = String::from("algorithm,quantile,tau\n");
    for (label, taus) in per_algo {
        let mut sorted = taus.clone();
        sorted.sort_unstable();
        for q in PLOT_QUANTILES {
            out.push_str(&format!("{label},{q},{}\n", quantile_nearest_rank(&sorted, q)));
        }
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    io::ensure_parent(path)?;
    fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Run the whole batch. Artifacts land in `cfg.out_dir`:
/// `runs/<algo>/<k>.jsonl` per run, then `summary.csv` and `plotdata.csv`.
/// Any crashing run aborts the batch with a `PARTIAL` marker on disk.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<SummaryRow>> {
    validate_config(cfg)?;
    let built = BuiltInstance::from_config(cfg)?;
    let out_dir = PathBuf::from(&cfg.out_dir);
    for algo in &cfg.algorithms {
        fs::create_dir_all(out_dir.join("runs").join(algo.label()))
            .map_err(|source| Error::Io { path: out_dir.clone(), source })?;
    }

    let jobs: Vec<(usize, usize)> = (0..cfg.algorithms.len())
        .flat_map(|a| (0..cfg.runs).map(move |r| (a, r)))
        .collect();

    let execute = |&(algo_index, run_index): &(usize, usize)| -> (usize, usize, Result<RunResult>) {
        let algo = &cfg.algorithms[algo_index];
        let outcome = catch_unwind(AssertUnwindSafe(|| run_one(algo, &built, cfg, run_index)));
        let outcome = match outcome {
            Ok(res) => res,
            Err(panic) => {
                let msg = panic
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| panic.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "panic".to_string());
                Err(Error::config(format!(
                    "run {run_index} of {} panicked: {msg}",
                    algo.label()
                )))
            }
        };
        (algo_index, run_index, outcome)
    };

    let mut cells: Vec<(usize, usize, Result<RunResult>)> = if cfg.parallelism > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.parallelism)
            .build()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(execute).collect())
    } else {
        jobs.iter().map(execute).collect()
    };
    // Restore the deterministic (algorithm, run) order regardless of how the
    // pool interleaved the work.
    cells.sort_by_key(|&(a, r, _)| (a, r));

    let mut per_algo: Vec<Vec<RunResult>> = vec![Vec::new(); cfg.algorithms.len()];
    let mut failures: Vec<String> = Vec::new();
    for (algo_index, run_index, outcome) in cells {
        let label = cfg.algorithms[algo_index].label();
        match outcome {
            Ok(result) => {
                let log_path = out_dir.join("runs").join(&label).join(format!("{run_index}.jsonl"));
                write_text(&log_path, &render_log(&result))?;
                per_algo[algo_index].push(result);
            }
            Err(e) => failures.push(format!("{label} run {run_index}: {e}")),
        }
    }
    if !failures.is_empty() {
        let marker = failures.join("\n") + "\n";
        write_text(&out_dir.join("PARTIAL"), &marker)?;
        return Err(Error::Partial {
            failed: failures.len(),
            total: jobs.len(),
            out_dir,
        });
    }

    let rows: Vec<SummaryRow> = cfg
        .algorithms
        .iter()
        .zip(&per_algo)
        .map(|(algo, results)| summarize(&algo.label(), results))
        .collect();
    let tau_lists: Vec<(String, Vec<u64>)> = cfg
        .algorithms
        .iter()
        .zip(&per_algo)
        .map(|(algo, results)| (algo.label(), results.iter().map(|r| r.tau).collect()))
        .collect();
    write_text(&out_dir.join("summary.csv"), &render_summary_csv(&rows))?;
    write_text(&out_dir.join("plotdata.csv"), &render_plotdata_csv(&tau_lists))?;
    Ok(rows)
}

/// Recompute the summary rows from the JSONL logs under `out_dir`, in the
/// order given by `labels`. The result is identical to what
/// [`run_experiment`] returned, making the CSV a pure function of the logs.
pub fn summarize_from_logs(out_dir: &Path, labels: &[String]) -> Result<Vec<SummaryRow>> {
    let mut rows = Vec::with_capacity(labels.len());
    for label in labels {
        let dir = out_dir.join("runs").join(label);
        let mut indexed: Vec<(usize, RunResult)> = Vec::new();
        let entries =
            fs::read_dir(&dir).map_err(|source| Error::Io { path: dir.clone(), source })?;
        for entry in entries {
            let entry = entry.map_err(|source| Error::Io { path: dir.clone(), source })?;
            let path = entry.path();
            if path.extension().and_then(|e| e.to_str()) != Some("jsonl") {
                continue;
            }
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| Error::config(format!("unexpected log file {}", path.display())))?;
            let text = fs::read_to_string(&path)
                .map_err(|source| Error::Io { path: path.clone(), source })?;
            let mut result: Option<RunResult> = None;
            let mut phases = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let parsed: LogLine = serde_json::from_str(line).map_err(|e| Error::Parse {
                    path: path.clone(),
                    line: i + 1,
                    msg: e.to_string(),
                })?;
                match parsed {
                    LogLine::Phase(p) => phases.push(p),
                    LogLine::Result { recommended, tau, correct, wall_time, budget_exhausted } => {
                        result = Some(RunResult {
                            recommended,
                            tau,
                            correct: Some(correct),
                            phases: core::mem::take(&mut phases),
                            wall_time,
                            budget_exhausted,
                        });
                    }
                }
            }
            let result = result
                .ok_or_else(|| Error::config(format!("no result line in {}", path.display())))?;
            indexed.push((stem, result));
        }
        indexed.sort_by_key(|&(i, _)| i);
        let results: Vec<RunResult> = indexed.into_iter().map(|(_, r)| r).collect();
        if results.is_empty() {
            return Err(Error::config(format!("no logs for algorithm {label}")));
        }
        rows.push(summarize(label, &results));
    }
    Ok(rows)
}

/// How the one-shot ranking experiment spends its budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingMethod {
    /// Equal pulls per item; rank by sample means.
    Uniform,
    /// Sample the anchored minimax-variance design; rank by the centered
    /// ridge fit.
    Deo,
}

/// Spend `budget` replay pulls ranking the items of `matrix`; report whether
/// the top-ranked item is the oracle best (highest complete-case mean).
pub fn ranking_experiment(
    matrix: &RatingMatrix,
    budget: u64,
    method: RankingMethod,
    seed: u64,
) -> Result<bool> {
    let mut env = RatingReplayEnv::new(matrix, splitmix64(seed))?;
    let k = env.item_means().len();
    if budget < k as u64 {
        return Err(Error::config("budget must cover at least one pull per item"));
    }
    let oracle = env.best_item();

    let top = match method {
        RankingMethod::Uniform => {
            let per_arm = budget / k as u64;
            let mut means = vec![0.0_f64; k];
            for (arm, mean) in means.iter_mut().enumerate() {
                let mut sum = 0.0;
                for _ in 0..per_arm {
                    sum += env.pull(arm)?;
                }
                *mean = sum / per_arm as f64;
            }
            argmax(&means)
        }
        RankingMethod::Deo => {
            let features = one_hot_features(k);
            let design = g_opt_semiparametric(&features, 0, &SolverConfig::default())?;
            let beta = (budget as f64 / RANKING_DELTA).ln();
            let mut state = estimator::init_state(&features, &design.policy, beta)?;
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x9E37_79B9_7F4A_7C15));
            for _ in 0..budget {
                let u: f64 = rng.random();
                let arm = design.policy.sample_with(u);
                let reward = env.pull(arm)?;
                estimator::update(&mut state, arm, reward)?;
            }
            let est = estimator::fit(&state)?;
            argmax(&est.theta_hat)
        }
    };
    Ok(top == oracle)
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
