//! Phase-elimination best-arm identification with anchored designs and the
//! centered ridge estimator.
//!
//! Each phase halves a resolution `epsilon`, computes a sampling policy as an
//! even mixture of the anchored contrast design (for the surviving targets)
//! and the anchored minimax-variance design (for stability), draws the
//! scheduled number of i.i.d. arms from it, fits the centered ridge
//! estimator, and eliminates every target whose estimated deficit to the
//! empirical best reaches `epsilon`. The per-phase failure probabilities
//! `delta / (|active|^2 l (l+1))` telescope to at most `delta` overall.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::covariance::v_cov_eval;
use crate::error::{contract, invalid, Error, Result};
use crate::estimator::{self, Estimate};
use crate::features::{FeatureSet, Policy};
use crate::math;
use crate::solvers::{self, SolverConfig};

/// How the anchor arm is chosen each phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "rule", rename_all = "snake_case"))]
pub enum AnchorRule {
    /// Always anchor on one fixed source arm.
    Fixed { index: usize },
    /// Anchor on the previous phase's empirical best (valid when targets and
    /// source coincide, so the target index is a source index); falls back to
    /// source arm 0 on the first phase and for transductive instances.
    EmpiricalBest,
}

/// Configuration for a single identification run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BaiConfig {
    /// Target error probability, in (0, 1).
    pub delta: f64,
    /// Multiplier on the variance-driven phase-length term.
    pub r1: f64,
    /// Multiplier on the stability-driven phase-length term.
    pub r2: f64,
    pub solver: SolverConfig,
    pub anchor_rule: AnchorRule,
    /// Safety cap on the number of phases; reaching it flags the result.
    pub max_phases: usize,
    /// Seed of the algorithm's own sampling stream (independent of the
    /// environment's noise stream).
    pub rng_seed: u64,
}

impl BaiConfig {
    pub fn new(delta: f64) -> Self {
        BaiConfig {
            delta,
            r1: 1.0 / 3.0,
            r2: 1.0 / 3.0,
            solver: SolverConfig::default(),
            anchor_rule: AnchorRule::EmpiricalBest,
            max_phases: 60,
            rng_seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("delta must lie in (0, 1)"));
        }
        if !(self.r1 > 0.0) || !(self.r2 > 0.0) {
            return Err(invalid("phase-length multipliers must be positive"));
        }
        if self.max_phases < 1 {
            return Err(invalid("max_phases must be at least 1"));
        }
        Ok(())
    }
}

/// Everything observable about one phase.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhaseRecord {
    pub phase_index: usize,
    pub epsilon: f64,
    pub delta_phase: f64,
    pub active_before: Vec<usize>,
    pub active_after: Vec<usize>,
    pub policy: Policy,
    pub v_cov: f64,
    pub n_samples: u64,
    pub anchor_used: usize,
    pub empirical_best: usize,
}

/// Outcome of a run: the recommended target and the full phase log.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunResult {
    pub recommended: usize,
    /// Total samples drawn (sum of phase lengths).
    pub tau: u64,
    /// Whether the recommendation matched the oracle best, when known.
    pub correct: Option<bool>,
    pub phases: Vec<PhaseRecord>,
    /// Filled by the experiment harness; the core algorithm reports 0.
    pub wall_time: f64,
    /// True when the phase cap was reached before a single target survived.
    pub budget_exhausted: bool,
}

/// Natural log clamped below at 1 (arguments below `e` saturate).
fn ln_clamped(x: f64) -> f64 {
    if x > core::f64::consts::E {
        math::ln(x)
    } else {
        1.0
    }
}

/// Scheduled sample count for one phase:
/// `ceil(r1 (v/eps^2) ln(v/(eps delta)) + r2 (32 d sqrt(v)/eps) ln(d/delta))`,
/// with both logarithms clamped below at 1 and the result clamped below at 1.
pub fn phase_length(
    v_cov: f64,
    epsilon: f64,
    delta_phase: f64,
    d: usize,
    r1: f64,
    r2: f64,
) -> Result<u64> {
    if !(v_cov > 0.0) || !v_cov.is_finite() {
        return Err(contract(format!("v_cov must be finite and positive, got {v_cov}")));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(contract(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    if !(delta_phase > 0.0 && delta_phase < 1.0) {
        return Err(contract(format!("delta_phase must lie in (0, 1), got {delta_phase}")));
    }
    if !(r1 > 0.0) || !(r2 > 0.0) {
        return Err(contract("phase-length multipliers must be positive"));
    }
    let d = d as f64;
    let variance_term = r1 * (v_cov / (epsilon * epsilon))
        * ln_clamped(v_cov / (epsilon * delta_phase));
    let stability_term = r2 * (32.0 * d * math::sqrt(v_cov) / epsilon)
        * ln_clamped(d / delta_phase);
    let n = math::ceil(variance_term + stability_term);
    Ok((n as u64).max(1))
}

/// Empirical best and survivors: targets whose estimated deficit to the best
/// reaches `epsilon` are dropped (strict comparison — a deficit of exactly
/// `epsilon` eliminates). The empirical best always survives; ties for best
/// resolve to the lowest index.
pub fn eliminate(
    active: &[usize],
    theta_hat: &Estimate,
    targets: &FeatureSet,
    epsilon: f64,
) -> Result<(usize, Vec<usize>)> {
    if active.is_empty() {
        return Err(contract("active set must be nonempty"));
    }
    let score = |z: usize| -> f64 {
        let v = targets.get(z);
        let mut s = 0.0;
        for j in 0..targets.dim {
            s += v[j] * theta_hat.theta_hat[j];
        }
        s
    };
    let mut best = active[0];
    let mut best_score = score(best);
    for &z in &active[1..] {
        let s = score(z);
        if s > best_score {
            best = z;
            best_score = s;
        }
    }
    let survivors: Vec<usize> = active
        .iter()
        .copied()
        .filter(|&z| z == best || best_score - score(z) < epsilon)
        .collect();
    Ok((best, survivors))
}

/// Check that every pairwise target contrast is identifiable from the
/// source's difference span; returns the index of an offending target.
pub(crate) fn check_identifiability(source: &FeatureSet, targets: &FeatureSet) -> Result<()> {
    let uniform = Policy::uniform(source.len());
    let cov = crate::covariance::sigma_cov(source, &uniform)?;
    let d = source.dim;
    let mut diff = alloc::vec![0.0; d];
    for i in 0..targets.len() {
        for j in (i + 1)..targets.len() {
            for k in 0..d {
                diff[k] = targets.get(i)[k] - targets.get(j)[k];
            }
            let n = crate::covariance::inv_norm_sq(&cov, &diff);
            if !n.in_column_space {
                return Err(Error::NotIdentifiable { contrast: j });
            }
        }
    }
    Ok(())
}

/// Run the full phase-elimination loop against an environment.
///
/// `source` are the pullable arms (must match the environment's arm count),
/// `targets` the candidates to rank. The result's `correct` field is left
/// `None` — the caller compares against an oracle when one exists.
pub fn run_sp_bai(
    source: &FeatureSet,
    targets: &FeatureSet,
    env: &mut dyn crate::envs::BanditEnv,
    cfg: &BaiConfig,
) -> Result<RunResult> {
    cfg.validate()?;
    source.validate()?;
    targets.validate()?;
    if source.dim != targets.dim {
        return Err(contract("source and target dimensions differ"));
    }
    if env.num_arms() != source.len() {
        return Err(contract(format!(
            "environment has {} arms but the source set has {}",
            env.num_arms(),
            source.len()
        )));
    }
    if let AnchorRule::Fixed { index } = cfg.anchor_rule {
        if index >= source.len() {
            return Err(Error::ArmOutOfRange { arm: index, arms: source.len() });
        }
    }
    if targets.len() == 1 {
        return Ok(RunResult {
            recommended: 0,
            tau: 0,
            correct: None,
            phases: Vec::new(),
            wall_time: 0.0,
            budget_exhausted: false,
        });
    }
    check_identifiability(source, targets)?;
    // Anchoring on the previous winner only makes sense when a target index
    // is a source index.
    let shared_arm_sets = source == targets;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut active: Vec<usize> = (0..targets.len()).collect();
    let mut phases: Vec<PhaseRecord> = Vec::new();
    let mut tau: u64 = 0;
    let mut prev_best: Option<usize> = None;
    let mut g_cache: BTreeMap<usize, Policy> = BTreeMap::new();
    let mut budget_exhausted = false;
    let mut delta_spent = 0.0_f64;

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
        delta_spent += delta_phase * a_sq;
        debug_assert!(delta_spent <= cfg.delta);

        let anchor = match cfg.anchor_rule {
            AnchorRule::Fixed { index } => index,
            AnchorRule::EmpiricalBest => match prev_best {
                Some(b) if shared_arm_sets => b,
                _ => 0,
            },
        };

        let active_features = FeatureSet {
            dim: targets.dim,
            vectors: active.iter().map(|&z| targets.get(z).to_vec()).collect(),
        };
        let xor = solvers::xor_design(&active_features, source, anchor, &cfg.solver)?;
        if !xor.objective.is_finite() {
            return Err(Error::NotIdentifiable { contrast: active[0] });
        }
        let p_g = match g_cache.get(&anchor) {
            Some(p) => p.clone(),
            None => {
                let sol = solvers::g_opt_semiparametric(source, anchor, &cfg.solver)?;
                g_cache.insert(anchor, sol.policy.clone());
                sol.policy
            }
        };
        let policy = solvers::mixture_policy(&xor.policy, &p_g)?;
        let v_cov = v_cov_eval(&active_features, source, &policy)?;
        if !v_cov.is_finite() {
            return Err(Error::NotIdentifiable { contrast: active[0] });
        }
        let n_samples =
            phase_length(v_cov.max(f64::MIN_POSITIVE), epsilon, delta_phase, source.dim, cfg.r1, cfg.r2)?;

        let beta = math::ln(n_samples as f64 / delta_phase);
        let mut state = estimator::init_state(source, &policy, beta)?;
        for _ in 0..n_samples {
            let u: f64 = rng.random();
            let arm = policy.sample_with(u);
            let reward = env.pull(arm)?;
            estimator::update(&mut state, arm, reward)?;
        }
        tau += n_samples;
        let est = estimator::fit(&state)?;
        let (best, survivors) = eliminate(&active, &est, targets, epsilon)?;

        phases.push(PhaseRecord {
            phase_index: ell,
            epsilon,
            delta_phase,
            active_before: active.clone(),
            active_after: survivors.clone(),
            policy,
            v_cov,
            n_samples,
            anchor_used: anchor,
            empirical_best: best,
        });
        active = survivors;
        prev_best = Some(best);
    }

    let recommended = if active.len() == 1 {
        active[0]
    } else {
        prev_best.unwrap_or(active[0])
    };
    Ok(RunResult {
        recommended,
        tau,
        correct: None,
        phases,
        wall_time: 0.0,
        budget_exhausted,
    })
}
