//! Reference algorithms the identification experiments compare against.
//!
//! Four families, in decreasing order of structure they exploit:
//!
//! * [`run_sbe`] — phase elimination that always samples the anchored
//!   minimax-variance design instead of adapting to the surviving contrasts;
//! * [`run_g_opt_oneshot`] — a one-shot oracle that is told the smallest gap
//!   and spends its entire budget on a single minimax-design phase;
//! * [`run_rage`] — classical linear-bandit phase elimination on the raw
//!   (uncentered) features, which is blind to a shared per-round shift;
//! * [`run_lucb`] / [`run_ae`] — finite-arm confidence-interval methods that
//!   ignore features entirely and treat the noise level as a tunable proxy.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::envs::BanditEnv;
use crate::error::{contract, invalid, Error, Result};
use crate::estimator::{self, Estimate};
use crate::features::{FeatureSet, Policy};
use crate::linalg;
use crate::math;
use crate::solvers::{self, SolverConfig};
use crate::spbai::{
    check_identifiability, eliminate, phase_length, PhaseRecord, RunResult,
};

/// Ridge added to the raw least-squares system of [`run_rage`].
const RAW_RIDGE: f64 = 1.0;

/// Union-bound constant inside the LUCB/AE confidence width.
const WIDTH_UNION_CONSTANT: f64 = 4.0;

/// Shared knobs for the reference algorithms. Not every field applies to
/// every algorithm: `sigma` drives the linear-elimination schedule and the
/// finite-arm confidence widths, `known_gap` is consumed only by the one-shot
/// oracle, and `pull_cap` bounds the open-ended finite-arm methods.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BaselineConfig {
    /// Noise scale the algorithm plans with (a proxy; the environment's true
    /// scale may differ).
    pub sigma: f64,
    /// Target error probability, in (0, 1).
    pub delta: f64,
    /// Smallest oracle gap, required by [`run_g_opt_oneshot`] only.
    pub known_gap: Option<f64>,
    /// Seed of the algorithm's own sampling stream.
    pub seed: u64,
    /// Multiplier on the variance-driven phase-length term.
    pub r1: f64,
    /// Multiplier on the stability-driven phase-length term.
    pub r2: f64,
    pub solver: SolverConfig,
    /// Safety cap on the number of phases; reaching it flags the result.
    pub max_phases: usize,
    /// Hard budget for [`run_lucb`] and [`run_ae`], which otherwise have no
    /// a-priori stopping bound (identical arms would never separate).
    pub pull_cap: u64,
}

impl BaselineConfig {
    pub fn new(delta: f64) -> Self {
        BaselineConfig {
            sigma: 1.0,
            delta,
            known_gap: None,
            seed: 0,
            r1: 1.0 / 3.0,
            r2: 1.0 / 3.0,
            solver: SolverConfig::default(),
            max_phases: 60,
            pull_cap: 100_000_000,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("delta must lie in (0, 1)"));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(invalid("sigma must be finite and positive"));
        }
        if !(self.r1 > 0.0) || !(self.r2 > 0.0) {
            return Err(invalid("phase-length multipliers must be positive"));
        }
        if self.max_phases < 1 {
            return Err(invalid("max_phases must be at least 1"));
        }
        if self.pull_cap < 1 {
            return Err(invalid("pull_cap must be at least 1"));
        }
        Ok(())
    }
}

/// Result for degenerate single-candidate inputs: nothing to learn.
fn singleton_result() -> RunResult {
    RunResult {
        recommended: 0,
        tau: 0,
        correct: None,
        phases: Vec::new(),
        wall_time: 0.0,
        budget_exhausted: false,
    }
}

fn check_env_arms(env: &dyn BanditEnv, source: &FeatureSet) -> Result<()> {
    if env.num_arms() != source.len() {
        return Err(contract(format!(
            "environment has {} arms but the source set has {}",
            env.num_arms(),
            source.len()
        )));
    }
    Ok(())
}

/// Draw `n_samples` arms i.i.d. from `policy`, feed the rewards to the
/// centered ridge estimator, and fit.
fn fit_centered_phase(
    source: &FeatureSet,
    policy: &Policy,
    n_samples: u64,
    beta: f64,
    env: &mut dyn BanditEnv,
    rng: &mut ChaCha8Rng,
) -> Result<Estimate> {
    let mut state = estimator::init_state(source, policy, beta)?;
    for _ in 0..n_samples {
        let u: f64 = rng.random();
        let arm = policy.sample_with(u);
        let reward = env.pull(arm)?;
        estimator::update(&mut state, arm, reward)?;
    }
    estimator::fit(&state)
}

/// Phase elimination on the anchored minimax-variance design alone.
///
/// Identical skeleton to the main algorithm — same resolution and failure
/// schedule, same centered estimator, same elimination rule — but every phase
/// samples the *same* minimax-variance design (no contrast-adapted
/// component), and the schedule replaces the measured design value with its
/// worst-case bound `4 d`. Requires the candidates to be the pullable arms
/// themselves.
pub fn run_sbe(
    source: &FeatureSet,
    targets: &FeatureSet,
    env: &mut dyn BanditEnv,
    cfg: &BaselineConfig,
) -> Result<RunResult> {
    cfg.validate()?;
    source.validate()?;
    targets.validate()?;
    if source != targets {
        return Err(invalid(
            "the elimination baseline requires the candidates to be the source arms themselves",
        ));
    }
    check_env_arms(env, source)?;
    if targets.len() == 1 {
        return Ok(singleton_result());
    }
    check_identifiability(source, targets)?;

    let d = source.dim;
    let v_sched = 4.0 * d as f64;
    let p_g = solvers::g_opt_semiparametric(source, 0, &cfg.solver)?.policy;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut active: Vec<usize> = (0..targets.len()).collect();
    let mut phases: Vec<PhaseRecord> = Vec::new();
    let mut tau: u64 = 0;
    let mut prev_best: Option<usize> = None;
    let mut budget_exhausted = false;

    let mut ell = 0usize;
    while active.len() > 1 {
        ell += 1;
        if ell > cfg.max_phases {
            budget_exhausted = true;
            break;
        }
        let epsilon = math::exp2_neg(ell as u32);
        let a_sq = (active.len() * active.len()) as f64;
        let delta_phase = cfg.delta / (a_sq * (ell as f64) * (ell as f64 + 1.0));

        let n_samples = phase_length(v_sched, epsilon, delta_phase, d, cfg.r1, cfg.r2)?;
        let beta = math::ln(n_samples as f64 / delta_phase);
        let est = fit_centered_phase(source, &p_g, n_samples, beta, env, &mut rng)?;
        tau += n_samples;
        let (best, survivors) = eliminate(&active, &est, targets, epsilon)?;

        phases.push(PhaseRecord {
            phase_index: ell,
            epsilon,
            delta_phase,
            active_before: active.clone(),
            active_after: survivors.clone(),
            policy: p_g.clone(),
            v_cov: v_sched,
            n_samples,
            anchor_used: 0,
            empirical_best: best,
        });
        active = survivors;
        prev_best = Some(best);
    }

    let recommended = if active.len() == 1 { active[0] } else { prev_best.unwrap_or(active[0]) };
    Ok(RunResult {
        recommended,
        tau,
        correct: None,
        phases,
        wall_time: 0.0,
        budget_exhausted,
    })
}

/// One-shot oracle baseline: told the smallest gap `known_gap`, it runs a
/// single phase of the anchored minimax-variance design sized to resolve
/// every candidate to accuracy `known_gap / 2`, fits the centered estimator
/// once, and recommends the empirical argmax.
pub fn run_g_opt_oneshot(
    source: &FeatureSet,
    targets: &FeatureSet,
    env: &mut dyn BanditEnv,
    cfg: &BaselineConfig,
) -> Result<RunResult> {
    cfg.validate()?;
    source.validate()?;
    targets.validate()?;
    if source.dim != targets.dim {
        return Err(contract("source and target dimensions differ"));
    }
    check_env_arms(env, source)?;
    if targets.len() == 1 {
        return Ok(singleton_result());
    }
    let gap = cfg
        .known_gap
        .ok_or_else(|| invalid("the one-shot baseline requires known_gap"))?;
    if !(gap > 0.0) || !gap.is_finite() {
        return Err(invalid("known_gap must be finite and positive"));
    }
    check_identifiability(source, targets)?;

    let d = source.dim;
    let v_sched = 4.0 * d as f64;
    // Gaps can reach 2 on the unit ball; the schedule's resolution argument
    // lives in (0, 1].
    let epsilon = (gap / 2.0).min(1.0);
    let n_samples = phase_length(v_sched, epsilon, cfg.delta, d, cfg.r1, cfg.r2)?;
    let beta = math::ln(n_samples as f64 / cfg.delta);

    let p_g = solvers::g_opt_semiparametric(source, 0, &cfg.solver)?.policy;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let est = fit_centered_phase(source, &p_g, n_samples, beta, env, &mut rng)?;

    let active: Vec<usize> = (0..targets.len()).collect();
    let (best, _) = eliminate(&active, &est, targets, f64::INFINITY)?;
    let record = PhaseRecord {
        phase_index: 1,
        epsilon,
        delta_phase: cfg.delta,
        active_before: active,
        active_after: vec![best],
        policy: p_g,
        v_cov: v_sched,
        n_samples,
        anchor_used: 0,
        empirical_best: best,
    };
    Ok(RunResult {
        recommended: best,
        tau: n_samples,
        correct: None,
        phases: vec![record],
        wall_time: 0.0,
        budget_exhausted: false,
    })
}

/// Classical linear-bandit phase elimination on the raw features.
///
/// Each phase computes the minimax contrast design over the surviving
/// pairwise contrasts (no anchoring, no centering), samples
/// `ceil(8 sigma^2 v / eps^2 * ln(|active|^2 / delta_phase))` arms from it,
/// fits ordinary ridge least squares on the raw features, and eliminates with
/// the shared rule. A shared per-round reward shift enters the raw regression
/// as signal, so this baseline is only sound when no such shift exists.
pub fn run_rage(
    source: &FeatureSet,
    targets: &FeatureSet,
    env: &mut dyn BanditEnv,
    cfg: &BaselineConfig,
) -> Result<RunResult> {
    cfg.validate()?;
    source.validate()?;
    targets.validate()?;
    if source.dim != targets.dim {
        return Err(contract("source and target dimensions differ"));
    }
    check_env_arms(env, source)?;
    if targets.len() == 1 {
        return Ok(singleton_result());
    }

    let d = source.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut active: Vec<usize> = (0..targets.len()).collect();
    let mut phases: Vec<PhaseRecord> = Vec::new();
    let mut tau: u64 = 0;
    let mut prev_best: Option<usize> = None;
    let mut budget_exhausted = false;

    let mut ell = 0usize;
    while active.len() > 1 {
        ell += 1;
        if ell > cfg.max_phases {
            budget_exhausted = true;
            break;
        }
        let epsilon = math::exp2_neg(ell as u32);
        let delta_phase = cfg.delta / ((ell as f64) * (ell as f64 + 1.0));

        let mut contrasts: Vec<Vec<f64>> = Vec::new();
        for (i, &a) in active.iter().enumerate() {
            for &b in &active[i + 1..] {
                let diff: Vec<f64> = targets
                    .get(a)
                    .iter()
                    .zip(targets.get(b).iter())
                    .map(|(u, v)| u - v)
                    .collect();
                if diff.iter().any(|&c| c != 0.0) {
                    contrasts.push(diff);
                }
            }
        }
        if contrasts.is_empty() {
            // All survivors share one feature vector; they are exchangeable.
            active.truncate(1);
            break;
        }
        let sol = solvers::solve_xy_linear(source, &contrasts, &cfg.solver)?;
        if !sol.objective.is_finite() {
            return Err(Error::NotIdentifiable { contrast: active[0] });
        }
        let v = sol.objective.max(f64::MIN_POSITIVE);
        let a_sq = (active.len() * active.len()) as f64;
        let count = 8.0 * cfg.sigma * cfg.sigma * v / (epsilon * epsilon)
            * math::ln(a_sq / delta_phase);
        let n_samples = (math::ceil(count) as u64).max(1);

        let mut b_mat = vec![0.0; d * d];
        for i in 0..d {
            b_mat[i * d + i] = RAW_RIDGE;
        }
        let mut b_vec = vec![0.0; d];
        for _ in 0..n_samples {
            let u: f64 = rng.random();
            let arm = sol.policy.sample_with(u);
            let reward = env.pull(arm)?;
            let x = source.get(arm);
            linalg::add_outer(&mut b_mat, d, x, 1.0);
            for j in 0..d {
                b_vec[j] += x[j] * reward;
            }
        }
        tau += n_samples;
        let chol = linalg::cholesky(&b_mat, d)
            .ok_or_else(|| contract("raw ridge system is not positive definite"))?;
        let est = Estimate { theta_hat: chol.solve(&b_vec) };
        let (best, survivors) = eliminate(&active, &est, targets, epsilon)?;

        phases.push(PhaseRecord {
            phase_index: ell,
            epsilon,
            delta_phase,
            active_before: active.clone(),
            active_after: survivors.clone(),
            policy: sol.policy,
            v_cov: v,
            n_samples,
            anchor_used: 0,
            empirical_best: best,
        });
        active = survivors;
        prev_best = Some(best);
    }

    let recommended = if active.len() == 1 { active[0] } else { prev_best.unwrap_or(active[0]) };
    Ok(RunResult {
        recommended,
        tau,
        correct: None,
        phases,
        wall_time: 0.0,
        budget_exhausted,
    })
}

/// Anytime confidence radius for an arm mean after `n` pulls.
fn confidence_width(sigma: f64, k: usize, delta: f64, n: u64) -> f64 {
    let n = n as f64;
    sigma * math::sqrt(2.0 * math::ln(WIDTH_UNION_CONSTANT * k as f64 * n * n / delta) / n)
}

/// Summarize a finite-arm run as a single phase record so the run-result
/// invariants (total pulls equal the sum over phases) hold for these
/// round-based methods too.
fn finite_arm_result(
    k: usize,
    counts: &[u64],
    pulls: u64,
    recommended: usize,
    survivors: Vec<usize>,
    delta: f64,
    budget_exhausted: bool,
) -> RunResult {
    let weights: Vec<f64> = counts.iter().map(|&c| c as f64 / pulls as f64).collect();
    let record = PhaseRecord {
        phase_index: 1,
        epsilon: 0.0,
        delta_phase: delta,
        active_before: (0..k).collect(),
        active_after: survivors,
        policy: Policy { weights },
        v_cov: 0.0,
        n_samples: pulls,
        anchor_used: 0,
        empirical_best: recommended,
    };
    RunResult {
        recommended,
        tau: pulls,
        correct: None,
        phases: vec![record],
        wall_time: 0.0,
        budget_exhausted,
    }
}

/// Index of the largest value, lowest index on ties.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Finite-arm identification by sampling the empirical leader and its best
/// challenger each round; stops once the leader's lower confidence bound
/// clears every other arm's upper bound. Features are ignored.
pub fn run_lucb(env: &mut dyn BanditEnv, cfg: &BaselineConfig) -> Result<RunResult> {
    cfg.validate()?;
    let k = env.num_arms();
    if k == 0 {
        return Err(invalid("environment has no arms"));
    }
    if k == 1 {
        return Ok(singleton_result());
    }

    let mut sums = vec![0.0_f64; k];
    let mut counts = vec![0_u64; k];
    let mut pulls: u64 = 0;
    for arm in 0..k {
        sums[arm] += env.pull(arm)?;
        counts[arm] += 1;
        pulls += 1;
    }

    let mut budget_exhausted = false;
    let recommended = loop {
        let means: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
        let leader = argmax(&means);
        let mut challenger = usize::MAX;
        let mut challenger_ucb = f64::NEG_INFINITY;
        for j in 0..k {
            if j == leader {
                continue;
            }
            let ucb = means[j] + confidence_width(cfg.sigma, k, cfg.delta, counts[j]);
            if ucb > challenger_ucb {
                challenger = j;
                challenger_ucb = ucb;
            }
        }
        let leader_lcb = means[leader] - confidence_width(cfg.sigma, k, cfg.delta, counts[leader]);
        if leader_lcb > challenger_ucb {
            break leader;
        }
        if pulls + 2 > cfg.pull_cap {
            budget_exhausted = true;
            break leader;
        }
        for arm in [leader, challenger] {
            sums[arm] += env.pull(arm)?;
            counts[arm] += 1;
            pulls += 1;
        }
    };

    let survivors = vec![recommended];
    Ok(finite_arm_result(k, &counts, pulls, recommended, survivors, cfg.delta, budget_exhausted))
}

/// Finite-arm identification by uniform rounds over the survivors,
/// eliminating every arm whose upper confidence bound falls below the
/// empirical best's lower bound. Features are ignored.
pub fn run_ae(env: &mut dyn BanditEnv, cfg: &BaselineConfig) -> Result<RunResult> {
    cfg.validate()?;
    let k = env.num_arms();
    if k == 0 {
        return Err(invalid("environment has no arms"));
    }
    if k == 1 {
        return Ok(singleton_result());
    }

    let mut sums = vec![0.0_f64; k];
    let mut counts = vec![0_u64; k];
    let mut pulls: u64 = 0;
    let mut survivors: Vec<usize> = (0..k).collect();
    let mut budget_exhausted = false;

    while survivors.len() > 1 {
        if pulls + survivors.len() as u64 > cfg.pull_cap {
            budget_exhausted = true;
            break;
        }
        for &arm in &survivors {
            sums[arm] += env.pull(arm)?;
            counts[arm] += 1;
            pulls += 1;
        }
        let mean = |a: usize| sums[a] / counts[a] as f64;
        let width = |a: usize| confidence_width(cfg.sigma, k, cfg.delta, counts[a]);
        let best = survivors
            .iter()
            .copied()
            .fold(survivors[0], |acc, a| if mean(a) > mean(acc) { a } else { acc });
        let floor = mean(best) - width(best);
        survivors.retain(|&a| a == best || floor <= mean(a) + width(a));
    }

    let recommended = survivors
        .iter()
        .copied()
        .fold(survivors[0], |acc, a| {
            if sums[a] / counts[a] as f64 > sums[acc] / counts[acc] as f64 {
                a
            } else {
                acc
            }
        });
    Ok(finite_arm_result(k, &counts, pulls, recommended, survivors, cfg.delta, budget_exhausted))
}
