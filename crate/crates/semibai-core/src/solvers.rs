//! Optimal-design solvers.
//!
//! Two convex programs over the probability simplex are solved, both
//! deterministic (fixed evaluation order, no internal randomness) and both
//! certified by an explicit duality gap:
//!
//! * a transductive design: minimize the worst weighted inverse-moment norm
//!   `max_y w_y ||y||^2_{A(p)^{-1}}` over a list of contrast vectors, where
//!   `A(p) = sum_i p_i v_i v_i^T`, solved through its concave dual (a
//!   mixture over contrasts) with multiplicative inner updates;
//! * the classical minimax-variance design: minimize
//!   `max_i v_i^T A(p)^{-1} v_i`, whose optimum equals the rank of the span,
//!   solved by Frank-Wolfe vertex steps with closed-form line search.
//!
//! On top of these sit the anchored reductions used by the elimination loop:
//! shift all features by an anchor arm, solve the linear problem on the
//! shifted set, then mix half the mass back onto the anchor. The mixture
//! guarantee is geometric: the centered covariance of the anchored mixture
//! dominates a quarter of the shifted design moment, so worst-case contrast
//! variances are at most four times the linear objective.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::covariance::{self, inv_norm_sq, sigma_cov, PsdMatrix};
use crate::error::{contract, invalid, Error, Result};
use crate::features::{FeatureSet, Policy};
use crate::linalg;

/// Largest active-set size accepted by the pairwise-contrast enumeration.
pub const MAX_ACTIVE: usize = 2_000;

/// Tuning knobs shared by the design solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolverConfig {
    /// Iteration cap per solve.
    pub max_iters: usize,
    /// Relative duality-gap target; the solver stops once certified.
    pub target_gap: f64,
    /// Relative ridge added to the design matrix during iterations (scaled by
    /// the largest squared vector norm). The reported objective is always
    /// re-evaluated ridge-free through the rank-aware pseudo-inverse.
    pub ridge: f64,
    /// Weights below this are zeroed (and the policy renormalized) on output.
    pub min_weight_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { max_iters: 10_000, target_gap: 1e-3, ridge: 1e-9, min_weight_floor: 0.0 }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(invalid("solver max_iters must be at least 1"));
        }
        if !(self.target_gap > 0.0) {
            return Err(invalid("solver target_gap must be positive"));
        }
        Ok(())
    }
}

/// Certificates attached to anchored designs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Certificates {
    /// Worst centered-feature norm `max_i ||x_i - mean||^2` in the inverse
    /// covariance geometry (finite by construction of anchored mixtures).
    pub m_hat: Option<f64>,
    /// Worst raw-feature norm `max_i ||x_i||^2` in the same geometry, when
    /// finite; `None` when some feature leaves the covariance column space.
    pub g_hat: Option<f64>,
    /// Objective of the underlying linear design the reduction was built on.
    pub linear_value: Option<f64>,
}

/// A solved design: the policy, its certified objective, and convergence
/// telemetry. `objective` is always the exact criterion re-evaluated at
/// `policy` without ridge; `converged` implies the relative duality gap met
/// the configured target.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DesignSolution {
    pub policy: Policy,
    pub objective: f64,
    pub duality_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub certificates: Certificates,
}

// ---------------------------------------------------------------------------
// Shared engine plumbing
// ---------------------------------------------------------------------------

fn squared_norms(vectors: &[Vec<f64>]) -> Vec<f64> {
    vectors.iter().map(|v| linalg::dot(v, v)).collect()
}

/// Indices of vectors with nonzero norm; all-zero vectors never receive mass.
fn support(norms_sq: &[f64]) -> Vec<usize> {
    norms_sq
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0.0)
        .map(|(i, _)| i)
        .collect()
}

fn uniform_on(indices: &[usize], k: usize) -> Vec<f64> {
    let mut p = vec![0.0; k];
    let w = 1.0 / indices.len() as f64;
    for &i in indices {
        p[i] = w;
    }
    p
}

/// `sum_i p_i v_i v_i^T + lam I`, row-major.
fn design_matrix(vectors: &[Vec<f64>], p: &[f64], d: usize, lam: f64) -> Vec<f64> {
    let mut a = vec![0.0; d * d];
    for (v, &w) in vectors.iter().zip(p.iter()) {
        if w > 0.0 {
            linalg::add_outer(&mut a, d, v, w);
        }
    }
    for i in 0..d {
        a[i * d + i] += lam;
    }
    a
}

/// Invert an SPD matrix via Cholesky column solves.
fn invert_spd(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let ch = linalg::cholesky(a, d)?;
    let mut inv = vec![0.0; d * d];
    let mut e = vec![0.0; d];
    for j in 0..d {
        e[j] = 1.0;
        let col = ch.solve(&e);
        e[j] = 0.0;
        for i in 0..d {
            inv[i * d + j] = col[i];
        }
    }
    Some(inv)
}

/// Zero out weights below the floor and renormalize.
fn apply_floor(p: &mut [f64], floor: f64) {
    if floor <= 0.0 {
        return;
    }
    for w in p.iter_mut() {
        if *w < floor {
            *w = 0.0;
        }
    }
    let sum: f64 = p.iter().sum();
    if sum > 0.0 {
        for w in p.iter_mut() {
            *w /= sum;
        }
    }
}

// ---------------------------------------------------------------------------
// Transductive (contrast-norm) design
// ---------------------------------------------------------------------------

struct XyOutcome {
    policy: Vec<f64>,
    objective: f64,
    duality_gap: f64,
    iterations: usize,
    converged: bool,
}

/// Minimize `f(p) = max_y w_y ||y||^2_{A(p)^{-1}}` over the simplex.
///
/// The minimax program is solved through its concave dual. A mixture `mu`
/// over contrasts has moment `M(mu) = sum_j mu_j w_j y_j y_j^T`, and the
/// weighted-trace design value `phi(mu) = min_q tr(A(q)^{-1} M(mu))` lower
/// bounds the minimax optimum, with equality at the optimal mixture. Each
/// round:
///
/// * the inner minimum is tracked by multiplicative reweighting
///   (`q_i <- q_i sqrt(s_i)` with `s_i = x_i^T B M B x_i`), warm-started
///   across rounds; its linearization `phi + <q, s> - max_i s_i` is a valid
///   lower bound at any state, tight once the scores equalize;
/// * the mixture takes a fixed-share exponentiated-gradient step on its
///   supergradient, the contrast values at the inner solution, steering the
///   weight toward the contrasts that stay hard.
///
/// Unlike subgradient steps on the raw max objective, which stall where
/// contrasts tie, the dual iteration resolves ties by splitting weight
/// across the tied contrasts in the proportion that maximizes the bound.
/// The best exact objective and the best bound seen are both monotone, so
/// the reported duality gap only shrinks.
fn xy_engine(
    vectors: &[Vec<f64>],
    d: usize,
    contrasts: &[Vec<f64>],
    weights: &[f64],
    cfg: &SolverConfig,
) -> Result<XyOutcome> {
    cfg.validate()?;
    let k = vectors.len();
    let norms_sq = squared_norms(vectors);
    let supp = support(&norms_sq);
    if supp.is_empty() {
        return Err(contract("design problem has no nonzero vectors"));
    }
    let scale = norms_sq.iter().fold(0.0_f64, |a, &b| a.max(b));
    let lam = cfg.ridge * scale;

    // Keep only nonzero contrasts; zero contrasts contribute nothing.
    let mut ys: Vec<&[f64]> = Vec::new();
    let mut ws: Vec<f64> = Vec::new();
    for (y, &w) in contrasts.iter().zip(weights.iter()) {
        if !(w > 0.0) || !w.is_finite() {
            return Err(invalid("contrast weights must be positive and finite"));
        }
        if linalg::dot(y, y) > 0.0 {
            ys.push(y);
            ws.push(w);
        }
    }
    if ys.is_empty() {
        // Every contrast is the zero vector: any policy attains objective 0.
        return Ok(XyOutcome {
            policy: uniform_on(&supp, k),
            objective: 0.0,
            duality_gap: 0.0,
            iterations: 0,
            converged: true,
        });
    }

    // Identifiability: every contrast must lie in the span of the vectors.
    let span_check = {
        let uni = uniform_on(&supp, k);
        PsdMatrix::new(design_matrix(vectors, &uni, d, 0.0), d)?
    };
    for y in &ys {
        if !inv_norm_sq(&span_check, y).in_column_space {
            return Ok(XyOutcome {
                policy: uniform_on(&supp, k),
                objective: f64::INFINITY,
                duality_gap: f64::INFINITY,
                iterations: 0,
                converged: false,
            });
        }
    }

    let m = ys.len();
    // Hedge rate and fixed-share floor for the dual mixture; the remix keeps
    // arms revivable after the inner solver zeroes them out, and the inner
    // loop stops on score equalization (or at the cap, whichever comes first).
    const ETA: f64 = 0.5;
    const SHARE: f64 = 1e-4;
    const REMIX: f64 = 1e-3;
    const INNER_TOL: f64 = 1e-8;
    const INNER_CAP: usize = 60;

    let mut mu = vec![1.0 / m as f64; m];
    let mut q = uniform_on(&supp, k);
    let mut q_eval = q.clone();
    let mut p_best = q.clone();
    // The certificate pairs the best objective seen with the best lower
    // bound seen; both improve monotonically, so their gap only shrinks.
    let mut val_best = f64::INFINITY;
    let mut lb_best = f64::NEG_INFINITY;
    let mut best_gap = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let mut stall = 0usize;

    let mut m_mat = vec![0.0; d * d];
    let mut s = vec![0.0; k];
    let mut vals = vec![0.0; m];
    let mut b_cur: Vec<f64> = Vec::new();
    let u_mix = 1.0 / supp.len() as f64;

    for t in 0..cfg.max_iters {
        iterations = t + 1;

        // Dual moment M(mu).
        m_mat.fill(0.0);
        for (j, y) in ys.iter().enumerate() {
            linalg::add_outer(&mut m_mat, d, y, mu[j] * ws[j]);
        }

        // Inner weighted-trace design, warm-started from the last round.
        for &i in &supp {
            q[i] = (1.0 - REMIX) * q[i] + REMIX * u_mix;
        }
        let mut phi = 0.0;
        let mut s_max = 0.0;
        let mut qs = 0.0;
        let mut have_eval = false;
        for it in 0..INNER_CAP {
            let a = design_matrix(vectors, &q, d, lam);
            let Some(b) = invert_spd(&a, d) else { break };
            phi = 0.0;
            for r in 0..d {
                for c in 0..d {
                    phi += b[r * d + c] * m_mat[c * d + r];
                }
            }
            s_max = 0.0;
            qs = 0.0;
            for &i in &supp {
                let bx = linalg::mat_vec(&b, d, &vectors[i]);
                let mbx = linalg::mat_vec(&m_mat, d, &bx);
                s[i] = linalg::dot(&bx, &mbx);
                if s[i] > s_max {
                    s_max = s[i];
                }
                qs += q[i] * s[i];
            }
            b_cur = b;
            q_eval.copy_from_slice(&q);
            have_eval = true;
            if s_max - phi <= INNER_TOL * phi || it + 1 == INNER_CAP {
                break;
            }
            let mut z = 0.0;
            for &i in &supp {
                q[i] *= crate::math::sqrt(s[i].max(0.0));
                z += q[i];
            }
            if z <= 0.0 {
                break;
            }
            for &i in &supp {
                q[i] /= z;
            }
        }
        if !have_eval {
            // Singular geometry despite the ridge; keep the best state found.
            break;
        }

        // Valid bound from the inner linearization, and the exact (ridged)
        // objective at the evaluated inner state, which doubles as the
        // hedge payoff vector.
        let lb = phi + qs - s_max;
        let mut fq = 0.0_f64;
        for (j, y) in ys.iter().enumerate() {
            let by = linalg::mat_vec(&b_cur, d, y);
            vals[j] = ws[j] * linalg::dot(y, &by);
            if vals[j] > fq {
                fq = vals[j];
            }
        }

        let tol = 1e-12 * fq.max(f64::MIN_POSITIVE);
        let mut moved = false;
        if lb > lb_best {
            moved |= lb > lb_best + tol;
            lb_best = lb;
        }
        if fq < val_best {
            moved |= fq < val_best - tol;
            val_best = fq;
            p_best.copy_from_slice(&q_eval);
        }
        best_gap = ((val_best - lb_best) / val_best.max(f64::MIN_POSITIVE)).max(0.0);
        if moved {
            stall = 0;
        } else {
            stall += 1;
        }
        if best_gap <= cfg.target_gap {
            converged = true;
            break;
        }
        if stall > 200 {
            // Neither bound has budged for a long while; stop cycling.
            break;
        }

        // Fixed-share hedge step on the dual mixture.
        let share = SHARE / m as f64;
        for w in mu.iter_mut() {
            *w = (1.0 - SHARE) * *w + share;
        }
        let mut z = 0.0;
        for (j, w) in mu.iter_mut().enumerate() {
            *w *= crate::math::exp(ETA * (vals[j] - fq) / fq.max(f64::MIN_POSITIVE));
            z += *w;
        }
        for w in mu.iter_mut() {
            *w /= z;
        }
    }

    apply_floor(&mut p_best, cfg.min_weight_floor);

    // Ridge-free objective at the returned policy.
    let final_moment = PsdMatrix::new(design_matrix(vectors, &p_best, d, 0.0), d)?;
    let mut objective = 0.0_f64;
    let mut finite = true;
    for (j, y) in ys.iter().enumerate() {
        let n = inv_norm_sq(&final_moment, y);
        if !n.in_column_space {
            finite = false;
            break;
        }
        objective = objective.max(ws[j] * n.value);
    }
    if !finite {
        objective = f64::INFINITY;
        converged = false;
    }
    Ok(XyOutcome { policy: p_best, objective, duality_gap: best_gap, iterations, converged })
}

/// Minimize the worst squared contrast norm `max_y ||y||^2_{A(p)^{-1}}` over
/// policies on `source_vectors`. Contrasts outside the span of the vectors
/// make the problem infeasible: the returned solution then carries the
/// `+inf` objective and `converged = false`.
pub fn solve_xy_linear(
    source_vectors: &FeatureSet,
    contrasts: &[Vec<f64>],
    cfg: &SolverConfig,
) -> Result<DesignSolution> {
    let weights = vec![1.0; contrasts.len()];
    solve_xy_weighted(source_vectors, contrasts, &weights, cfg)
}

/// Weighted variant: minimize `max_y w_y ||y||^2_{A(p)^{-1}}`.
pub fn solve_xy_weighted(
    source_vectors: &FeatureSet,
    contrasts: &[Vec<f64>],
    weights: &[f64],
    cfg: &SolverConfig,
) -> Result<DesignSolution> {
    source_vectors.validate()?;
    if contrasts.is_empty() {
        return Err(contract("contrast list must be nonempty"));
    }
    if contrasts.len() != weights.len() {
        return Err(contract("contrasts and weights must have equal length"));
    }
    for y in contrasts {
        if y.len() != source_vectors.dim {
            return Err(contract(format!(
                "contrast has length {}, expected {}",
                y.len(),
                source_vectors.dim
            )));
        }
    }
    let out = xy_engine(&source_vectors.vectors, source_vectors.dim, contrasts, weights, cfg)?;
    Ok(DesignSolution {
        policy: Policy { weights: normalized(out.policy) },
        objective: out.objective,
        duality_gap: out.duality_gap,
        iterations: out.iterations,
        converged: out.converged,
        certificates: Certificates::default(),
    })
}

fn normalized(mut p: Vec<f64>) -> Vec<f64> {
    let sum: f64 = p.iter().sum();
    if sum > 0.0 {
        for w in p.iter_mut() {
            *w /= sum;
        }
    }
    p
}

// ---------------------------------------------------------------------------
// Minimax-variance design
// ---------------------------------------------------------------------------

struct GOutcome {
    policy: Vec<f64>,
    objective: f64,
    duality_gap: f64,
    iterations: usize,
    converged: bool,
}

/// Frank-Wolfe on the log-determinant criterion with the closed-form step.
/// The minimax value `max_i v_i^T A(p)^{-1} v_i` certifies optimality: its
/// minimum over the simplex equals the rank of the span exactly, so
/// `s_max / rank - 1` is a true relative suboptimality bound.
fn g_engine(vectors: &[Vec<f64>], d: usize, cfg: &SolverConfig) -> Result<GOutcome> {
    cfg.validate()?;
    let k = vectors.len();
    let norms_sq = squared_norms(vectors);
    let supp = support(&norms_sq);
    if supp.is_empty() {
        return Err(contract("design problem has no nonzero vectors"));
    }
    let scale = norms_sq.iter().fold(0.0_f64, |a, &b| a.max(b));
    let lam = cfg.ridge * scale;

    // Rank of the span, from the uniform moment's spectrum.
    let rank = {
        let uni = uniform_on(&supp, k);
        let moment = PsdMatrix::new(design_matrix(vectors, &uni, d, 0.0), d)?;
        let lmax = moment.lambda_max().max(f64::MIN_POSITIVE);
        moment
            .eigen()
            .values
            .iter()
            .filter(|&&v| v > covariance::RANK_TOL * lmax)
            .count()
    };
    let rank_f = rank as f64;

    let mut p = uniform_on(&supp, k);
    let mut p_best = p.clone();
    let mut best_gap = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    const GAMMA_MAX: f64 = 0.9999;

    for t in 0..cfg.max_iters {
        iterations = t + 1;
        let a = design_matrix(vectors, &p, d, lam);
        let Some(b) = invert_spd(&a, d) else { break };
        let mut s_max = f64::NEG_INFINITY;
        let mut vertex = supp[0];
        for &i in &supp {
            let bv = linalg::mat_vec(&b, d, &vectors[i]);
            let s = linalg::dot(&vectors[i], &bv);
            if s > s_max {
                s_max = s;
                vertex = i;
            }
        }
        let rel_gap = (s_max / rank_f - 1.0).max(0.0);
        if rel_gap < best_gap {
            best_gap = rel_gap;
            p_best.copy_from_slice(&p);
        }
        if best_gap <= cfg.target_gap {
            converged = true;
            break;
        }
        // Closed-form step for the log-det line search.
        let gamma = if s_max > 1.0 + 1e-12 {
            ((s_max - rank_f) / (rank_f * (s_max - 1.0))).clamp(0.0, GAMMA_MAX)
        } else {
            0.0
        };
        if gamma <= 0.0 {
            let _ = t;
            break;
        }
        for w in p.iter_mut() {
            *w *= 1.0 - gamma;
        }
        p[vertex] += gamma;
    }

    apply_floor(&mut p_best, cfg.min_weight_floor);
    let final_moment = PsdMatrix::new(design_matrix(vectors, &p_best, d, 0.0), d)?;
    let mut objective = 0.0_f64;
    let mut finite = true;
    for &i in &supp {
        let n = inv_norm_sq(&final_moment, &vectors[i]);
        if !n.in_column_space {
            finite = false;
            break;
        }
        objective = objective.max(n.value);
    }
    if !finite {
        objective = f64::INFINITY;
        converged = false;
    }
    Ok(GOutcome { policy: p_best, objective, duality_gap: best_gap, iterations, converged })
}

/// Classical minimax-variance design: minimize `max_i v_i^T A(p)^{-1} v_i`.
/// The optimum equals the rank of the span, so the returned objective is
/// certified to be at most `(1 + target_gap) * rank` on convergence.
/// All-zero vectors are ignored (and receive zero weight).
pub fn solve_g_optimal_linear(vectors: &FeatureSet, cfg: &SolverConfig) -> Result<DesignSolution> {
    vectors.validate()?;
    let out = g_engine(&vectors.vectors, vectors.dim, cfg)?;
    Ok(DesignSolution {
        policy: Policy { weights: normalized(out.policy) },
        objective: out.objective,
        duality_gap: out.duality_gap,
        iterations: out.iterations,
        converged: out.converged,
        certificates: Certificates::default(),
    })
}

// ---------------------------------------------------------------------------
// Anchored reductions
// ---------------------------------------------------------------------------

fn check_anchor(features: &FeatureSet, anchor: usize) -> Result<()> {
    if anchor >= features.len() {
        return Err(Error::ArmOutOfRange { arm: anchor, arms: features.len() });
    }
    Ok(())
}

/// Half-anchor mixture: `1/2` on the anchor plus `1/2 q`.
fn anchor_mixture(q: &[f64], anchor: usize) -> Vec<f64> {
    let mut p: Vec<f64> = q.iter().map(|w| 0.5 * w).collect();
    p[anchor] += 0.5;
    p
}

/// Worst centered-feature norm in the inverse covariance geometry, plus the
/// raw-feature variant (`None` when some raw feature leaves the column space).
fn stability_certificates(
    source: &FeatureSet,
    policy: &Policy,
) -> Result<(f64, Option<f64>)> {
    let cov = sigma_cov(source, policy)?;
    let mean = covariance::policy_mean(source, policy)?;
    let d = source.dim;
    let mut m_hat = 0.0_f64;
    let mut g_hat = Some(0.0_f64);
    let mut centered = vec![0.0; d];
    for v in &source.vectors {
        for j in 0..d {
            centered[j] = v[j] - mean[j];
        }
        let n = inv_norm_sq(&cov, &centered);
        m_hat = m_hat.max(if n.in_column_space { n.value } else { f64::INFINITY });
        if let Some(g) = g_hat {
            let raw = inv_norm_sq(&cov, v);
            g_hat = raw.in_column_space.then_some(g.max(raw.value));
        }
    }
    Ok((m_hat, g_hat))
}

/// Anchored minimax-variance policy: solve the linear design on the
/// anchor-shifted features, then put half the mass back on the anchor. The
/// mixture keeps every centered feature inside a bounded inverse-covariance
/// ball: the certificate `m_hat` is checked against `32 d` and the solution
/// is flagged unconverged if it ever exceeded that bound.
pub fn g_opt_semiparametric(
    source: &FeatureSet,
    anchor: usize,
    cfg: &SolverConfig,
) -> Result<DesignSolution> {
    source.validate()?;
    check_anchor(source, anchor)?;
    if source.len() < 2 {
        return Err(invalid("anchored design needs at least two arms"));
    }
    let shifted = FeatureSet { dim: source.dim, vectors: source.shifted(anchor) };
    let inner = g_engine(&shifted.vectors, shifted.dim, cfg)?;
    let policy = Policy { weights: normalized(anchor_mixture(&inner.policy, anchor)) };
    let (m_hat, g_hat) = stability_certificates(source, &policy)?;
    let bound = 32.0 * source.dim as f64;
    let converged = inner.converged && m_hat <= bound;
    Ok(DesignSolution {
        policy,
        objective: m_hat,
        duality_gap: inner.duality_gap,
        iterations: inner.iterations,
        converged,
        certificates: Certificates {
            m_hat: Some(m_hat),
            g_hat,
            linear_value: Some(inner.objective),
        },
    })
}

/// All pairwise differences (i < j) of the active vectors, zero pairs skipped.
fn pairwise_contrasts(active: &FeatureSet) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..active.len() {
        for j in (i + 1)..active.len() {
            let diff: Vec<f64> = active
                .get(i)
                .iter()
                .zip(active.get(j))
                .map(|(a, b)| a - b)
                .collect();
            if linalg::dot(&diff, &diff) > 0.0 {
                out.push(diff);
            }
        }
    }
    out
}

/// Anchored transductive design for an active set of candidate arms.
///
/// Solves the linear contrast design on the anchor-shifted source (the anchor
/// itself becomes the zero vector and receives no linear mass), then returns
/// the half-anchor mixture. The reported objective is the worst pairwise
/// contrast norm of the active set in the mixture's inverse covariance
/// geometry; it is at most four times the linear value, and `+inf` exactly
/// when some active contrast is not identifiable from the shifted span.
pub fn xor_design(
    active: &FeatureSet,
    source: &FeatureSet,
    anchor: usize,
    cfg: &SolverConfig,
) -> Result<DesignSolution> {
    active.validate()?;
    source.validate()?;
    check_anchor(source, anchor)?;
    if active.len() < 2 {
        return Err(invalid("active set must contain at least two arms"));
    }
    if active.len() > MAX_ACTIVE {
        return Err(invalid(format!(
            "active set of {} arms exceeds the pairwise-contrast cap of {MAX_ACTIVE}",
            active.len()
        )));
    }
    if active.dim != source.dim {
        return Err(contract("active and source dimensions differ"));
    }
    let shifted = source.shifted(anchor);
    let contrasts = pairwise_contrasts(active);
    let weights = vec![1.0; contrasts.len().max(1)];
    let inner = if contrasts.is_empty() {
        // Active set collapsed to one distinct point: nothing to estimate.
        XyOutcome {
            policy: uniform_on(&support(&squared_norms(&shifted)), source.len()),
            objective: 0.0,
            duality_gap: 0.0,
            iterations: 0,
            converged: true,
        }
    } else {
        xy_engine(&shifted, source.dim, &contrasts, &weights[..contrasts.len()], cfg)?
    };
    if inner.objective.is_infinite() {
        return Ok(DesignSolution {
            policy: Policy { weights: normalized(anchor_mixture(&inner.policy, anchor)) },
            objective: f64::INFINITY,
            duality_gap: f64::INFINITY,
            iterations: inner.iterations,
            converged: false,
            certificates: Certificates {
                m_hat: None,
                g_hat: None,
                linear_value: Some(f64::INFINITY),
            },
        });
    }
    let policy = Policy { weights: normalized(anchor_mixture(&inner.policy, anchor)) };
    let objective = covariance::v_cov_eval(active, source, &policy)?;
    Ok(DesignSolution {
        policy,
        objective,
        duality_gap: inner.duality_gap,
        iterations: inner.iterations,
        converged: inner.converged && objective.is_finite(),
        certificates: Certificates {
            m_hat: None,
            g_hat: None,
            linear_value: Some(inner.objective),
        },
    })
}

/// Elementwise average of two policies over the same arm set.
pub fn mixture_policy(p_a: &Policy, p_b: &Policy) -> Result<Policy> {
    if p_a.len() != p_b.len() {
        return Err(contract(format!(
            "policy lengths differ: {} vs {}",
            p_a.len(),
            p_b.len()
        )));
    }
    Policy::new(
        p_a.weights
            .iter()
            .zip(p_b.weights.iter())
            .map(|(a, b)| 0.5 * (a + b))
            .collect(),
    )
}
