//! End-to-end acceptance suite.
//!
//! Each test checks one numbered contract of the toolkit and prints a single
//! `ACCEPTANCE <n> (<name>): PASS/FAIL` line (visible under
//! `cargo test --test acceptance -- --nocapture`). Tolerances are pinned in
//! the constants below; the heavy full-fidelity replications are `#[ignore]`
//! opt-ins.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semibai::harness::{
    ranking_experiment, run_experiment, AlgoSpec, ExperimentConfig, InstanceSpec, RankingMethod,
    SummaryRow,
};
use semibai_core::benchmark::{anchor_compat_check, oracle_gaps, tau_lin_star};
use semibai_core::covariance::{inv_norm_sq, sigma_cov, v_cov_eval, PsdMatrix};
use semibai_core::envs::{
    make_surrogate_ratings, make_uniform_sphere_instance, BanditEnv, Environment, ShiftKind,
};
use semibai_core::solvers::{g_opt_semiparametric, solve_xy_linear, xor_design, SolverConfig};
use semibai_core::{estimator, linalg, FeatureSet, Policy};

/// Print the verdict line for one numbered check, then enforce it.
fn report(number: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {number} ({name}): {verdict} — {detail}");
    assert!(pass, "ACCEPTANCE {number} ({name}): FAIL — {detail}");
}

// ---------------------------------------------------------------------------
// Shared battery of random identification instances
// ---------------------------------------------------------------------------

struct BatteryInstance {
    source: FeatureSet,
    targets: FeatureSet,
    theta_star: Vec<f64>,
}

fn unit_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = linalg::dot(&v, &v).sqrt();
        if norm > 1e-3 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}

/// 100 seeded instances with d in 2..=8, K in 3..=20 source arms on the unit
/// sphere, and 2..=10 candidate targets drawn from the source arms (so every
/// contrast is identifiable from every anchor). The hidden parameter is a
/// unit vector redrawn until the best target is unique with a gap of at
/// least 0.05.
fn battery() -> Vec<BatteryInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(4117);
    let mut out = Vec::new();
    while out.len() < 100 {
        let d = rng.random_range(2..=8);
        let k = rng.random_range(3..=20);
        let a = rng.random_range(2..=10.min(k));
        let vectors: Vec<Vec<f64>> = (0..k).map(|_| unit_vec(&mut rng, d)).collect();
        let source = FeatureSet::new(d, vectors).unwrap();
        let mut idx: Vec<usize> = (0..k).collect();
        for i in 0..a {
            let j = rng.random_range(i..k);
            idx.swap(i, j);
        }
        let target_vectors: Vec<Vec<f64>> =
            idx[..a].iter().map(|&i| source.vectors[i].clone()).collect();
        let targets = FeatureSet::new(d, target_vectors).unwrap();
        let mut theta_star = None;
        for _ in 0..64 {
            let theta = unit_vec(&mut rng, d);
            if let Ok((_, gaps)) = oracle_gaps(&targets, &theta) {
                let min_gap = gaps
                    .iter()
                    .copied()
                    .filter(|&g| g > 0.0)
                    .fold(f64::INFINITY, f64::min);
                if min_gap >= 0.05 {
                    theta_star = Some(theta);
                    break;
                }
            }
        }
        let Some(theta_star) = theta_star else { continue };
        out.push(BatteryInstance { source, targets, theta_star });
    }
    out
}

// ---------------------------------------------------------------------------
// 1. The anchored reduction is a 4-approximation of the linear design value
// ---------------------------------------------------------------------------

#[test]
fn anchored_reduction_stays_within_factor_four() {
    const SLACK: f64 = 1e-3;
    const TIME_LIMIT_SECS: f64 = 60.0;
    let start = Instant::now();
    let cfg = SolverConfig::default();
    let mut worst_ratio = 0.0_f64;
    let mut failures = 0usize;
    for inst in battery() {
        let sol = xor_design(&inst.targets, &inst.source, 0, &cfg).unwrap();
        let achieved = v_cov_eval(&inst.targets, &inst.source, &sol.policy).unwrap();
        let linear = sol.certificates.linear_value.unwrap();
        worst_ratio = worst_ratio.max(achieved / linear);
        if achieved > 4.0 * (1.0 + SLACK) * linear {
            failures += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        "anchored reduction factor 4",
        failures == 0 && secs < TIME_LIMIT_SECS,
        &format!(
            "{failures}/100 violations, worst ratio {worst_ratio:.4} (bound {}), {secs:.1}s",
            4.0 * (1.0 + SLACK)
        ),
    );
}

// ---------------------------------------------------------------------------
// 2. The benchmark is anchor-compatible up to a factor 4
// ---------------------------------------------------------------------------

#[test]
fn benchmark_is_anchor_compatible() {
    const BOUND: f64 = 4.0 * 1.01 * 1.01;
    const TIME_LIMIT_SECS: f64 = 120.0;
    let start = Instant::now();
    let cfg = SolverConfig::default();
    let mut worst_ratio = 0.0_f64;
    let mut failures = 0usize;
    for inst in battery() {
        let values: Vec<f64> = (0..inst.source.len())
            .map(|anchor| {
                tau_lin_star(&inst.targets, &inst.source, &inst.theta_star, anchor, &cfg)
                    .unwrap()
                    .tau_star
            })
            .collect();
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        // max over all anchor pairs of tau(i)/tau(j)
        let ratio = hi / lo;
        worst_ratio = worst_ratio.max(ratio);
        if ratio > BOUND {
            failures += 1;
        }
        // Cross-check the dedicated pair API on the extreme pair.
        let i_hi = values.iter().position(|&v| v == hi).unwrap();
        let i_lo = values.iter().position(|&v| v == lo).unwrap();
        if i_hi != i_lo {
            let api =
                anchor_compat_check(&inst.targets, &inst.source, &inst.theta_star, i_hi, i_lo, &cfg)
                    .unwrap();
            assert!((api - ratio).abs() <= 1e-9 * ratio.max(1.0));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        2,
        "anchor compatibility",
        failures == 0 && secs < TIME_LIMIT_SECS,
        &format!("{failures}/100 violations, worst pair ratio {worst_ratio:.4} (bound {BOUND}), {secs:.1}s"),
    );
}

// ---------------------------------------------------------------------------
// 3. The anchored minimax-variance design certifies bounded stability
// ---------------------------------------------------------------------------

#[test]
fn stability_certificate_holds_on_the_battery() {
    let cfg = SolverConfig::default();
    let mut worst_margin = 0.0_f64;
    let mut failures = 0usize;
    for inst in battery() {
        let sol = g_opt_semiparametric(&inst.source, 0, &cfg).unwrap();
        let m_hat = sol.certificates.m_hat.unwrap();
        let bound = 32.0 * inst.source.dim as f64;
        worst_margin = worst_margin.max(m_hat / bound);
        if m_hat > bound {
            failures += 1;
        }
    }
    report(
        3,
        "bounded stability certificate",
        failures == 0,
        &format!("{failures}/100 violations, worst m_hat/32d = {worst_margin:.4}"),
    );
}

// ---------------------------------------------------------------------------
// 4. Solvers agree with brute-force simplex grid search
// ---------------------------------------------------------------------------

/// All grid points of the 3-simplex at resolution 1/200.
fn simplex_grid_3(steps: u32) -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    for i in 0..=steps {
        for j in 0..=(steps - i) {
            let k = steps - i - j;
            let s = steps as f64;
            out.push([i as f64 / s, j as f64 / s, k as f64 / s]);
        }
    }
    out
}

/// Minimize `max_row w_r ||y_r||^2` over the grid, where the moment is
/// built from `vectors` at each grid point.
fn grid_min(vectors: &[Vec<f64>], rows: &[(Vec<f64>, f64)], grid: &[[f64; 3]]) -> f64 {
    let d = vectors[0].len();
    let mut best = f64::INFINITY;
    for p in grid {
        let mut m = vec![0.0; d * d];
        for (v, &w) in vectors.iter().zip(p.iter()) {
            if w > 0.0 {
                linalg::add_outer(&mut m, d, v, w);
            }
        }
        let psd = PsdMatrix::new(m, d).unwrap();
        let mut value = 0.0_f64;
        let mut feasible = true;
        for (y, w) in rows {
            let norm = inv_norm_sq(&psd, y);
            if !norm.is_finite() {
                feasible = false;
                break;
            }
            value = value.max(w * norm.value);
        }
        if feasible && value < best {
            best = value;
        }
    }
    best
}

#[test]
fn solvers_match_grid_search_on_small_instances() {
    const REL_TOL: f64 = 0.02;
    const TIME_LIMIT_SECS: f64 = 60.0;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(515);
    let cfg = SolverConfig::default();
    let grid = simplex_grid_3(200);
    let mut worst_xy = 0.0_f64;
    let mut worst_tau = 0.0_f64;
    for _ in 0..20 {
        // d = 2, K = 3, targets = source, unique best with a workable gap.
        let (source, theta_star) = loop {
            let vectors: Vec<Vec<f64>> = (0..3).map(|_| unit_vec(&mut rng, 2)).collect();
            let source = FeatureSet::new(2, vectors).unwrap();
            let theta = unit_vec(&mut rng, 2);
            if let Ok((_, gaps)) = oracle_gaps(&source, &theta) {
                let min_gap = gaps
                    .iter()
                    .copied()
                    .filter(|&g| g > 0.0)
                    .fold(f64::INFINITY, f64::min);
                if min_gap >= 0.1 {
                    break (source, theta);
                }
            }
        };

        // Unweighted pairwise-contrast design on the raw features.
        let mut contrasts = Vec::new();
        for i in 0..3 {
            for j in (i + 1)..3 {
                let c: Vec<f64> = source.vectors[i]
                    .iter()
                    .zip(&source.vectors[j])
                    .map(|(a, b)| a - b)
                    .collect();
                contrasts.push(c);
            }
        }
        let xy = solve_xy_linear(&source, &contrasts, &cfg).unwrap();
        let rows: Vec<(Vec<f64>, f64)> = contrasts.iter().map(|c| (c.clone(), 1.0)).collect();
        let xy_grid = grid_min(&source.vectors, &rows, &grid);
        let dev = (xy.objective - xy_grid).abs() / xy_grid;
        worst_xy = worst_xy.max(dev);

        // Gap-weighted benchmark at anchor 0 against the same grid.
        let bench = tau_lin_star(&source, &source, &theta_star, 0, &cfg).unwrap();
        let (best, gaps) = oracle_gaps(&source, &theta_star).unwrap();
        let shifted: Vec<Vec<f64>> = source
            .vectors
            .iter()
            .map(|v| v.iter().zip(&source.vectors[0]).map(|(a, b)| a - b).collect())
            .collect();
        let tau_rows: Vec<(Vec<f64>, f64)> = (0..3)
            .filter(|&z| z != best)
            .map(|z| {
                let c: Vec<f64> = source.vectors[best]
                    .iter()
                    .zip(&source.vectors[z])
                    .map(|(a, b)| a - b)
                    .collect();
                (c, 1.0 / (gaps[z] * gaps[z]))
            })
            .collect();
        let tau_grid = grid_min(&shifted, &tau_rows, &grid);
        worst_tau = worst_tau.max((bench.tau_star - tau_grid).abs() / tau_grid);
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        4,
        "solver vs grid search",
        worst_xy <= REL_TOL && worst_tau <= REL_TOL && secs < TIME_LIMIT_SECS,
        &format!(
            "worst relative deviation: contrast design {worst_xy:.4}, benchmark {worst_tau:.4} (tol {REL_TOL}), {secs:.1}s"
        ),
    );
}

// ---------------------------------------------------------------------------
// 5. Centering cancels an adversarial shared shift; naive ridge does not
// ---------------------------------------------------------------------------

#[test]
fn centered_estimator_cancels_an_adversarial_shift() {
    const SEEDS: u64 = 20;
    const SAMPLES: u64 = 2_000;
    const RIDGE: f64 = 1.0;
    let source = FeatureSet::new(
        2,
        vec![vec![0.6, 0.7], vec![0.1, -0.25], vec![0.2, 0.9]],
    )
    .unwrap();
    let theta_star = vec![1.5, 1.0];
    let uniform = Policy::new(vec![1.0 / 3.0; 3]).unwrap();
    let contrast: Vec<f64> = source.vectors[0]
        .iter()
        .zip(&source.vectors[1])
        .map(|(a, b)| a - b)
        .collect();
    let truth = linalg::dot(&contrast, &theta_star);

    // Nominal standard errors of the contrast under each estimator's own
    // geometry (noise_std = 1).
    let centered_moment = sigma_cov(&source, &uniform).unwrap();
    let se_centered =
        (inv_norm_sq(&centered_moment, &contrast).value / SAMPLES as f64).sqrt();
    let mut raw = vec![0.0; 4];
    for v in &source.vectors {
        linalg::add_outer(&mut raw, 2, v, 1.0 / 3.0);
    }
    let raw_moment = PsdMatrix::new(raw, 2).unwrap();
    let se_naive = (inv_norm_sq(&raw_moment, &contrast).value / SAMPLES as f64).sqrt();

    let mut centered_ok = 0u32;
    let mut naive_failed = 0u32;
    for seed in 0..SEEDS {
        let mut env = Environment::new(
            source.clone(),
            theta_star.clone(),
            ShiftKind::AnchorAdversarial { anchor: 0 },
            1.0,
            seed,
            false,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1_000 + seed);
        let mut state = estimator::init_state(&source, &uniform, RIDGE).unwrap();
        let mut a_raw = vec![0.0; 4];
        a_raw[0] = RIDGE;
        a_raw[3] = RIDGE;
        let mut b_raw = vec![0.0; 2];
        for _ in 0..SAMPLES {
            let arm = rng.random_range(0..3);
            let r = env.pull(arm).unwrap();
            estimator::update(&mut state, arm, r).unwrap();
            let x = &source.vectors[arm];
            linalg::add_outer(&mut a_raw, 2, x, 1.0);
            b_raw[0] += x[0] * r;
            b_raw[1] += x[1] * r;
        }
        let centered = estimator::fit(&state).unwrap().theta_hat;
        let naive = linalg::cholesky(&a_raw, 2).unwrap().solve(&b_raw);
        let err_centered = (linalg::dot(&contrast, &centered) - truth).abs();
        let err_naive = (linalg::dot(&contrast, &naive) - truth).abs();
        if err_centered <= 5.0 * se_centered {
            centered_ok += 1;
        }
        if err_naive > 5.0 * se_naive {
            naive_failed += 1;
        }
    }
    report(
        5,
        "shift cancellation",
        centered_ok >= 19 && naive_failed >= 10,
        &format!(
            "centered within 5 SE in {centered_ok}/20 seeds (need >= 19); naive outside 5 SE in {naive_failed}/20 (need >= 10)"
        ),
    );
}

// ---------------------------------------------------------------------------
// 6. The main algorithm is delta-correct, pooled across instance families
// ---------------------------------------------------------------------------

/// First sphere seed whose smallest target gap is workable at desk scale.
fn sphere_seed(d: usize, k: usize, min_gap: f64) -> u64 {
    (0..200)
        .find(|&s| {
            make_uniform_sphere_instance(d, k, s)
                .ok()
                .and_then(|inst| inst.min_gap().ok())
                .is_some_and(|g| g >= min_gap)
        })
        .expect("no sphere draw with a workable gap")
}

fn spbai_errors(instance: InstanceSpec, shift: ShiftKind, runs: usize, seed: u64) -> usize {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        instance,
        algorithms: vec![AlgoSpec::Spbai],
        delta: 0.1,
        runs,
        seed,
        parallelism: 4,
        out_dir: dir.path().join("out").to_string_lossy().into_owned(),
        enforce_unit_ball: false,
        shift,
        noise_std: 1.0,
    };
    let rows = run_experiment(&cfg).unwrap();
    (rows[0].error_prob * rows[0].runs as f64).round() as usize
}

fn delta_correctness(alpha: f64, sphere_k: usize, sphere_min_gap: f64) -> (usize, usize) {
    let runs_per_family = 70usize;
    let sinus = ShiftKind::Sinusoidal { amplitude: 1.0, frequency: 2.0, offset: 1.0 };
    let mut errors = 0usize;
    errors += spbai_errors(
        InstanceSpec::SmallGap { d: 10, alpha },
        sinus.clone(),
        runs_per_family,
        101,
    );
    errors += spbai_errors(
        InstanceSpec::UniformSphere { d: 10, k: sphere_k, seed: sphere_seed(10, sphere_k, sphere_min_gap) },
        sinus,
        runs_per_family,
        202,
    );
    errors += spbai_errors(
        InstanceSpec::SmallGap { d: 4, alpha: 1.0 },
        ShiftKind::AnchorAdversarial { anchor: 0 },
        runs_per_family,
        303,
    );
    (errors, 3 * runs_per_family)
}

#[test]
fn delta_correctness_pools_across_families() {
    let bound = 0.1 + 3.0 * (0.09_f64 / 200.0).sqrt();
    let (errors, total) = delta_correctness(0.6, 30, 0.1);
    let rate = errors as f64 / total as f64;
    report(
        6,
        "delta-correctness (desk scale)",
        rate <= bound,
        &format!("{errors}/{total} errors (rate {rate:.4}, bound {bound:.4})"),
    );
}

/// Full-fidelity variant of the pooled correctness check; takes many minutes.
#[test]
#[ignore]
fn delta_correctness_full_scale() {
    let bound = 0.1 + 3.0 * (0.09_f64 / 200.0).sqrt();
    let (errors, total) = delta_correctness(0.2, 100, 0.02);
    let rate = errors as f64 / total as f64;
    report(
        6,
        "delta-correctness (full scale)",
        rate <= bound,
        &format!("{errors}/{total} errors (rate {rate:.4}, bound {bound:.4})"),
    );
}

// ---------------------------------------------------------------------------
// 7. Relative cost and soundness orderings on the hard small-gap instance
// ---------------------------------------------------------------------------

/// Full-fidelity comparison on the d=10, alpha=0.2 instance; tens of minutes.
#[test]
#[ignore]
fn algorithm_orderings_on_the_hard_instance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        instance: InstanceSpec::SmallGap { d: 10, alpha: 0.2 },
        algorithms: vec![
            AlgoSpec::Spbai,
            AlgoSpec::Sbe,
            AlgoSpec::Gopt { known_gap: None },
            AlgoSpec::Rage { sigma: 1.0 },
            AlgoSpec::Rage { sigma: 3.0 },
        ],
        delta: 0.1,
        runs: 20,
        seed: 7_777,
        parallelism: 4,
        out_dir: dir.path().join("out").to_string_lossy().into_owned(),
        enforce_unit_ball: false,
        shift: ShiftKind::Sinusoidal { amplitude: 1.0, frequency: 2.0, offset: 1.0 },
        noise_std: 1.0,
    };
    let rows = run_experiment(&cfg).unwrap();
    let get = |label: &str| -> &SummaryRow {
        rows.iter().find(|r| r.algorithm == label).unwrap()
    };
    let spbai = get("spbai");
    let sbe = get("sbe");
    let gopt = get("gopt");
    let rage1 = get("rage_sigma_1");
    let rage3 = get("rage_sigma_3");
    let pass = spbai.avg_tau < sbe.avg_tau
        && spbai.avg_tau < gopt.avg_tau
        && spbai.error_prob == 0.0
        && rage1.error_prob >= 0.9
        && rage3.error_prob >= 0.9;
    report(
        7,
        "algorithm orderings",
        pass,
        &format!(
            "avg tau: main {:.0} vs static {:.0} vs one-shot {:.0}; errors: main {:.2}, contrast baseline {:.2}/{:.2} at sigma 1/3",
            spbai.avg_tau, sbe.avg_tau, gopt.avg_tau, spbai.error_prob, rage1.error_prob, rage3.error_prob
        ),
    );
}

// ---------------------------------------------------------------------------
// 8. Design-based ranking beats uniform ranking on the replay surrogate
// ---------------------------------------------------------------------------

#[test]
fn design_ranking_margin_on_the_surrogate() {
    const BUDGET: u64 = 3_000;
    const RUNS: u64 = 100;
    const MARGIN: f64 = 0.03;
    // Top gap 0.1 against a contrast noise floor of ~0.15 keeps both
    // methods' hit rates in the informative mid-range instead of at 1.0.
    let matrix = make_surrogate_ratings(
        400,
        &[1.5, 1.4, 0.9, 0.5, 0.0, -0.3, -0.8, -1.2],
        2.0,
        0.5,
        11,
    )
    .unwrap();
    let mut deo_hits = 0u64;
    let mut uniform_hits = 0u64;
    for seed in 0..RUNS {
        if ranking_experiment(&matrix, BUDGET, RankingMethod::Deo, seed).unwrap() {
            deo_hits += 1;
        }
        if ranking_experiment(&matrix, BUDGET, RankingMethod::Uniform, seed).unwrap() {
            uniform_hits += 1;
        }
    }
    let deo = deo_hits as f64 / RUNS as f64;
    let uniform = uniform_hits as f64 / RUNS as f64;
    report(
        8,
        "design-based ranking margin",
        deo >= uniform + MARGIN,
        &format!(
            "design-based top-1 rate {deo:.2} vs uniform {uniform:.2} at budget {BUDGET} over {RUNS} runs (need margin {MARGIN})"
        ),
    );
}

// ---------------------------------------------------------------------------
// 9. Byte-identical reruns, serial or parallel
// ---------------------------------------------------------------------------

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        instance: InstanceSpec::SmallGap { d: 2, alpha: 1.0 },
        algorithms: vec![AlgoSpec::Spbai, AlgoSpec::Lucb { sigma: 1.5 }],
        delta: 0.1,
        runs: 4,
        seed: 7,
        parallelism: 1,
        out_dir: String::new(),
        enforce_unit_ball: false,
        shift: ShiftKind::Sinusoidal { amplitude: 1.0, frequency: 2.0, offset: 1.0 },
        noise_std: 1.0,
    };
    let cfg_path = dir.path().join("config.json");
    std::fs::write(&cfg_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();

    let run = |out: &Path, parallel: &str| {
        let status = Command::new(env!("CARGO_BIN_EXE_semibai"))
            .args([
                "run",
                "--config",
                cfg_path.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--parallel",
                parallel,
            ])
            .status()
            .unwrap();
        assert!(status.success(), "run into {} failed", out.display());
        std::fs::read(out.join("summary.csv")).unwrap()
    };
    let first = run(&dir.path().join("a"), "1");
    let second = run(&dir.path().join("b"), "1");
    let parallel = run(&dir.path().join("c"), "4");
    report(
        9,
        "byte-identical reruns",
        first == second && first == parallel,
        &format!(
            "summary.csv of {} bytes identical across serial rerun and 4-thread run: {}",
            first.len(),
            first == second && first == parallel
        ),
    );
}
