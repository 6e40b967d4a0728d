//! Reward environments.
//!
//! Rewards follow `r_t = x_arm^T theta + nu_t + eta_t`: a linear arm effect,
//! a round-indexed bounded shift shared by every arm, and Gaussian noise.
//! The shift at round `t` is a function of `t` alone — it is fixed before the
//! arm choice is seen, which is exactly what the centered estimator exploits.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Error, Result};
use crate::features::FeatureSet;
use crate::linalg;
use crate::math;

/// Round-indexed shift sequence (`t` is 1-based).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum ShiftKind {
    /// `nu_t = value` for all rounds.
    Constant { value: f64 },
    /// `nu_t = offset + amplitude * sin(frequency * t)`.
    Sinusoidal { amplitude: f64, frequency: f64, offset: f64 },
    /// `nu_t = -x_anchor^T theta`, resolved against the environment's
    /// parameter at construction: the anchor arm's reward collapses to pure
    /// noise, the worst case for uncentered estimators.
    AnchorAdversarial { anchor: usize },
    /// Explicit table, cycled when the horizon exceeds its length.
    Custom { values: Vec<f64> },
}

/// Shift with any anchor reference resolved to a concrete constant.
#[derive(Debug, Clone)]
enum ResolvedShift {
    Constant(f64),
    Sinusoidal { amplitude: f64, frequency: f64, offset: f64 },
    Custom(Vec<f64>),
}

impl ResolvedShift {
    fn value(&self, t: u64) -> f64 {
        match self {
            ResolvedShift::Constant(v) => *v,
            ResolvedShift::Sinusoidal { amplitude, frequency, offset } => {
                offset + amplitude * math::sin(frequency * t as f64)
            }
            ResolvedShift::Custom(values) => values[((t - 1) % values.len() as u64) as usize],
        }
    }

    fn sup_abs(&self) -> f64 {
        match self {
            ResolvedShift::Constant(v) => math::abs(*v),
            ResolvedShift::Sinusoidal { amplitude, offset, .. } => {
                math::abs(*offset) + math::abs(*amplitude)
            }
            ResolvedShift::Custom(values) => {
                values.iter().fold(0.0_f64, |m, &v| m.max(math::abs(v)))
            }
        }
    }
}

/// Anything an identification algorithm can pull from.
pub trait BanditEnv {
    fn num_arms(&self) -> usize;
    /// Draw one reward; advances the environment's round counter.
    fn pull(&mut self, arm: usize) -> Result<f64>;
    /// Total pulls served so far.
    fn pulls(&self) -> u64;
}

/// Synthetic semiparametric simulator.
#[derive(Debug, Clone)]
pub struct Environment {
    source: FeatureSet,
    theta_star: Vec<f64>,
    shift: ResolvedShift,
    noise: Normal<f64>,
    noise_std: f64,
    t: u64,
    rng: ChaCha8Rng,
}

impl Environment {
    /// Build a simulator. With `enforce_unit_ball` the construction rejects
    /// inputs that break the normalization `||x|| <= 1`, `||theta|| <= 1`,
    /// `sup |nu_t| <= 1`; by default nothing is rejected, since several
    /// standard test instances deliberately exceed those bounds.
    pub fn new(
        source: FeatureSet,
        theta_star: Vec<f64>,
        shift: ShiftKind,
        noise_std: f64,
        seed: u64,
        enforce_unit_ball: bool,
    ) -> Result<Self> {
        source.validate()?;
        if theta_star.len() != source.dim {
            return Err(invalid(format!(
                "theta has length {}, expected {}",
                theta_star.len(),
                source.dim
            )));
        }
        if !(noise_std >= 0.0) || !noise_std.is_finite() {
            return Err(invalid("noise_std must be finite and nonnegative"));
        }
        let resolved = match &shift {
            ShiftKind::Constant { value } => ResolvedShift::Constant(*value),
            ShiftKind::Sinusoidal { amplitude, frequency, offset } => {
                ResolvedShift::Sinusoidal {
                    amplitude: *amplitude,
                    frequency: *frequency,
                    offset: *offset,
                }
            }
            ShiftKind::AnchorAdversarial { anchor } => {
                if *anchor >= source.len() {
                    return Err(Error::ArmOutOfRange { arm: *anchor, arms: source.len() });
                }
                ResolvedShift::Constant(-linalg::dot(source.get(*anchor), &theta_star))
            }
            ShiftKind::Custom { values } => {
                if values.is_empty() {
                    return Err(invalid("custom shift table must be nonempty"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("custom shift table contains non-finite values"));
                }
                ResolvedShift::Custom(values.clone())
            }
        };
        if enforce_unit_ball {
            source.check_norm_bound()?;
            let tn = math::hypot_many(&theta_star);
            if tn > 1.0 + 1e-9 {
                return Err(Error::AssumptionViolated(format!(
                    "parameter norm {tn:.6} exceeds the unit bound"
                )));
            }
            let s = resolved.sup_abs();
            if s > 1.0 + 1e-9 {
                return Err(Error::AssumptionViolated(format!(
                    "shift magnitude {s:.6} exceeds the unit bound"
                )));
            }
        }
        let noise = Normal::new(0.0, noise_std)
            .map_err(|_| invalid("invalid noise distribution parameters"))?;
        Ok(Environment {
            source,
            theta_star,
            shift: resolved,
            noise,
            noise_std,
            t: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn source(&self) -> &FeatureSet {
        &self.source
    }

    /// Hidden parameter; for the oracle/benchmark layer only.
    pub fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    /// Shift value at a given (1-based) round, for replay-style inspection.
    pub fn shift_at(&self, t: u64) -> f64 {
        self.shift.value(t)
    }
}

impl BanditEnv for Environment {
    fn num_arms(&self) -> usize {
        self.source.len()
    }

    fn pull(&mut self, arm: usize) -> Result<f64> {
        if arm >= self.source.len() {
            return Err(Error::ArmOutOfRange { arm, arms: self.source.len() });
        }
        self.t += 1;
        let nu = self.shift.value(self.t);
        let eta = if self.noise_std > 0.0 { self.noise.sample(&mut self.rng) } else { 0.0 };
        Ok(linalg::dot(self.source.get(arm), &self.theta_star) + nu + eta)
    }

    fn pulls(&self) -> u64 {
        self.t
    }
}

// ---------------------------------------------------------------------------
// Instances
// ---------------------------------------------------------------------------

/// A best-arm-identification problem: source arms to pull, target arms to
/// rank, and the hidden linear parameter.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Instance {
    pub source: FeatureSet,
    pub targets: FeatureSet,
    pub theta_star: Vec<f64>,
}

impl Instance {
    /// True mean of each target under the hidden parameter.
    pub fn target_means(&self) -> Vec<f64> {
        self.targets
            .vectors
            .iter()
            .map(|z| linalg::dot(z, &self.theta_star))
            .collect()
    }

    /// Oracle best target; requires the argmax to be unique.
    pub fn best_target(&self) -> Result<usize> {
        let means = self.target_means();
        let mut best = 0usize;
        for (i, &m) in means.iter().enumerate() {
            if m > means[best] {
                best = i;
            }
        }
        let ties = means.iter().filter(|&&m| m == means[best]).count();
        if ties > 1 {
            return Err(invalid("oracle best target is not unique"));
        }
        Ok(best)
    }

    /// True suboptimality gap of each target (0 for the best).
    pub fn gaps(&self) -> Result<Vec<f64>> {
        let means = self.target_means();
        let best = self.best_target()?;
        Ok(means.iter().map(|&m| means[best] - m).collect())
    }

    /// Smallest nonzero gap.
    pub fn min_gap(&self) -> Result<f64> {
        let gaps = self.gaps()?;
        gaps.iter()
            .copied()
            .filter(|&g| g > 0.0)
            .fold(None, |acc: Option<f64>, g| Some(acc.map_or(g, |a| a.min(g))))
            .ok_or_else(|| invalid("instance has no suboptimal target"))
    }
}

/// Hard small-gap instance: standard basis arms plus one near-duplicate of
/// the best arm rotated by `alpha` in the (e1, e2) plane, with parameter
/// `2 e1`. The runner-up gap is `2 (1 - cos alpha)`.
pub fn make_small_gap_instance(d: usize, alpha: f64) -> Result<Instance> {
    if d < 2 {
        return Err(invalid("small-gap instance needs dimension at least 2"));
    }
    let gap = 2.0 * (1.0 - math::cos(alpha));
    if !(gap > 0.0) {
        return Err(invalid("alpha produces a duplicate best arm (zero gap)"));
    }
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        vectors.push(e);
    }
    let mut z = vec![0.0; d];
    z[0] = math::cos(alpha);
    z[1] = math::sin(alpha);
    vectors.push(z);
    let source = FeatureSet::new(d, vectors)?;
    let mut theta = vec![0.0; d];
    theta[0] = 2.0;
    Ok(Instance { source: source.clone(), targets: source, theta_star: theta })
}

/// Arms drawn uniformly from the unit sphere, parameter `2 e1`. Instances
/// whose top-two gap is below 1e-6 are resampled (bounded retries).
pub fn make_uniform_sphere_instance(d: usize, k: usize, seed: u64) -> Result<Instance> {
    if d < 2 || k < 2 {
        return Err(invalid("sphere instance needs d >= 2 and K >= 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = Normal::new(0.0, 1.0).expect("unit normal");
    for _ in 0..100 {
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
        for _ in 0..k {
            loop {
                let v: Vec<f64> = (0..d).map(|_| gauss.sample(&mut rng)).collect();
                let norm = math::hypot_many(&v);
                if norm > 1e-12 {
                    vectors.push(v.iter().map(|x| x / norm).collect());
                    break;
                }
            }
        }
        let source = FeatureSet::new(d, vectors)?;
        let mut theta = vec![0.0; d];
        theta[0] = 2.0;
        let instance =
            Instance { source: source.clone(), targets: source, theta_star: theta };
        match instance.min_gap() {
            Ok(g) if g >= 1e-6 => return Ok(instance),
            _ => continue,
        }
    }
    Err(invalid("could not draw a sphere instance with a usable top-two gap"))
}

/// One-hot feature set `e_1, ..., e_k` (used for tabular/rating arms).
pub fn one_hot_features(k: usize) -> FeatureSet {
    let mut vectors = Vec::with_capacity(k);
    for i in 0..k {
        let mut e = vec![0.0; k];
        e[i] = 1.0;
        vectors.push(e);
    }
    FeatureSet { dim: k, vectors }
}

// ---------------------------------------------------------------------------
// Rating-matrix replay
// ---------------------------------------------------------------------------

/// User-by-item ratings with missing entries, restricted to the items under
/// study. Column order defines the arm order.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingMatrix {
    pub ratings: Vec<Vec<Option<f64>>>,
    pub item_labels: Vec<String>,
}

impl RatingMatrix {
    pub fn new(ratings: Vec<Vec<Option<f64>>>, item_labels: Vec<String>) -> Result<Self> {
        let k = item_labels.len();
        if k == 0 {
            return Err(invalid("rating matrix needs at least one item"));
        }
        for (u, row) in ratings.iter().enumerate() {
            if row.len() != k {
                return Err(invalid(format!(
                    "user row {u} has {} entries, expected {k}",
                    row.len()
                )));
            }
        }
        Ok(RatingMatrix { ratings, item_labels })
    }

    pub fn num_items(&self) -> usize {
        self.item_labels.len()
    }

    pub fn num_users(&self) -> usize {
        self.ratings.len()
    }

    /// Rows where every selected item was rated.
    pub fn complete_cases(&self) -> Vec<Vec<f64>> {
        self.ratings
            .iter()
            .filter_map(|row| row.iter().copied().collect::<Option<Vec<f64>>>())
            .collect()
    }
}

/// Replay oracle over the complete-case users: each pull samples a user
/// uniformly with replacement and returns that user's rating of the arm.
pub struct RatingReplayEnv {
    rows: Vec<Vec<f64>>,
    item_means: Vec<f64>,
    best_item: usize,
    t: u64,
    rng: ChaCha8Rng,
}

impl RatingReplayEnv {
    pub fn new(matrix: &RatingMatrix, seed: u64) -> Result<Self> {
        let rows = matrix.complete_cases();
        if rows.is_empty() {
            return Err(invalid("complete-case filter left no users"));
        }
        let k = matrix.num_items();
        let n = rows.len() as f64;
        let mut item_means = vec![0.0; k];
        for row in &rows {
            for (j, &r) in row.iter().enumerate() {
                item_means[j] += r;
            }
        }
        for m in item_means.iter_mut() {
            *m /= n;
        }
        let mut best = 0usize;
        for (j, &m) in item_means.iter().enumerate() {
            if m > item_means[best] {
                best = j;
            }
        }
        if item_means.iter().filter(|&&m| m == item_means[best]).count() > 1 {
            return Err(invalid("empirical best item is not unique"));
        }
        Ok(RatingReplayEnv {
            rows,
            item_means,
            best_item: best,
            t: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn complete_case_count(&self) -> usize {
        self.rows.len()
    }

    /// Empirical item means over the full complete-case subset (the replay
    /// ground truth).
    pub fn item_means(&self) -> &[f64] {
        &self.item_means
    }

    pub fn best_item(&self) -> usize {
        self.best_item
    }
}

impl BanditEnv for RatingReplayEnv {
    fn num_arms(&self) -> usize {
        self.item_means.len()
    }

    fn pull(&mut self, arm: usize) -> Result<f64> {
        if arm >= self.item_means.len() {
            return Err(Error::ArmOutOfRange { arm, arms: self.item_means.len() });
        }
        self.t += 1;
        let u = self.rng.random_range(0..self.rows.len());
        Ok(self.rows[u][arm])
    }

    fn pulls(&self) -> u64 {
        self.t
    }
}

/// Synthetic stand-in for a ratings dataset: `rating(u, i) = item_mean_i +
/// user_baseline_u + noise`. The additive user baseline mimics the shared
/// per-row shift that motivates the centered estimator.
pub fn make_surrogate_ratings(
    num_users: usize,
    item_means: &[f64],
    user_baseline_std: f64,
    noise_std: f64,
    seed: u64,
) -> Result<RatingMatrix> {
    if num_users == 0 || item_means.is_empty() {
        return Err(invalid("surrogate generator needs users and items"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let baseline = Normal::new(0.0, user_baseline_std)
        .map_err(|_| invalid("invalid baseline std"))?;
    let noise = Normal::new(0.0, noise_std).map_err(|_| invalid("invalid noise std"))?;
    let mut rows = Vec::with_capacity(num_users);
    for _ in 0..num_users {
        let b = baseline.sample(&mut rng);
        rows.push(
            item_means
                .iter()
                .map(|&m| Some(m + b + noise.sample(&mut rng)))
                .collect(),
        );
    }
    let labels = (0..item_means.len()).map(|i| format!("item{i}")).collect();
    RatingMatrix::new(rows, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(d: usize) -> FeatureSet {
        one_hot_features(d)
    }

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn constant_shift_noiseless_pull() {
        let mut env = Environment::new(
            basis(2),
            vec![1.0, 0.0],
            ShiftKind::Constant { value: 0.3 },
            0.0,
            1,
            false,
        )
        .unwrap();
        assert_eq!(env.pull(0).unwrap(), 1.3);
        assert_eq!(env.pull(1).unwrap(), 0.3);
        assert_eq!(env.pulls(), 2);
    }

    #[test]
    fn adversarial_anchor_collapses_to_noise() {
        let mut env = Environment::new(
            basis(2),
            vec![1.0, 0.5],
            ShiftKind::AnchorAdversarial { anchor: 0 },
            0.0,
            1,
            false,
        )
        .unwrap();
        assert_eq!(env.pull(0).unwrap(), 0.0);
        assert_eq!(env.pull(1).unwrap(), -0.5);
    }

    #[test]
    fn sinusoidal_shift_third_round() {
        let mut env = Environment::new(
            basis(2),
            vec![0.0, 0.0],
            ShiftKind::Sinusoidal { amplitude: 1.0, frequency: 2.0, offset: 1.0 },
            0.0,
            1,
            false,
        )
        .unwrap();
        env.pull(0).unwrap();
        env.pull(0).unwrap();
        let r3 = env.pull(0).unwrap();
        assert_close(r3, 0.7205845018010741, 1e-15); // 1 + sin(6)
    }

    #[test]
    fn custom_shift_cycles() {
        let mut env = Environment::new(
            basis(2),
            vec![0.0, 0.0],
            ShiftKind::Custom { values: vec![1.0, 2.0] },
            0.0,
            1,
            false,
        )
        .unwrap();
        assert_eq!(env.pull(0).unwrap(), 1.0);
        assert_eq!(env.pull(0).unwrap(), 2.0);
        assert_eq!(env.pull(0).unwrap(), 1.0);
    }

    #[test]
    fn shift_and_noise_do_not_depend_on_the_arm() {
        // Paired replay with identical seeds but different arm sequences:
        // per-round reward differences must equal the feature-mean
        // differences exactly.
        let theta = vec![0.7, -0.3];
        let mk = || {
            Environment::new(
                basis(2),
                theta.clone(),
                ShiftKind::Sinusoidal { amplitude: 1.0, frequency: 2.0, offset: 1.0 },
                1.5,
                42,
                false,
            )
            .unwrap()
        };
        let (mut a, mut b) = (mk(), mk());
        for t in 0..50 {
            let (arm_a, arm_b) = (t % 2, (t + 1) % 2);
            let ra = a.pull(arm_a).unwrap();
            let rb = b.pull(arm_b).unwrap();
            let want = theta[arm_a] - theta[arm_b];
            assert_close(ra - rb, want, 1e-12);
        }
    }

    #[test]
    fn reward_stream_is_reproducible() {
        let mk = || {
            Environment::new(
                basis(3),
                vec![0.1, 0.2, 0.3],
                ShiftKind::Constant { value: 0.0 },
                1.0,
                7,
                false,
            )
            .unwrap()
        };
        let (mut a, mut b) = (mk(), mk());
        for t in 0..100 {
            assert_eq!(a.pull(t % 3).unwrap(), b.pull(t % 3).unwrap());
        }
    }

    #[test]
    fn enforcement_flags_oversized_inputs() {
        // The sinusoidal shift used in the hard instances peaks at 2.
        let err = Environment::new(
            basis(2),
            vec![0.5, 0.0],
            ShiftKind::Sinusoidal { amplitude: 1.0, frequency: 2.0, offset: 1.0 },
            1.0,
            1,
            true,
        )
        .unwrap_err();
        assert!(matches!(err, Error::AssumptionViolated(_)));
        // Within bounds, enforcement passes.
        Environment::new(
            basis(2),
            vec![0.5, 0.0],
            ShiftKind::Constant { value: 0.9 },
            1.0,
            1,
            true,
        )
        .unwrap();
    }

    #[test]
    fn small_gap_instance_geometry() {
        let inst = make_small_gap_instance(10, 0.2).unwrap();
        assert_eq!(inst.source.len(), 11);
        assert_eq!(inst.best_target().unwrap(), 0);
        assert_close(inst.min_gap().unwrap(), 0.03986684431751675, 1e-15);
        assert!(make_small_gap_instance(10, 0.0).is_err());
        let right_angle = make_small_gap_instance(4, core::f64::consts::FRAC_PI_2).unwrap();
        assert_close(right_angle.min_gap().unwrap(), 2.0, 1e-12);
    }

    #[test]
    fn sphere_instance_properties() {
        let a = make_uniform_sphere_instance(10, 100, 5).unwrap();
        let b = make_uniform_sphere_instance(10, 100, 5).unwrap();
        assert_eq!(a, b);
        for v in &a.source.vectors {
            assert_close(math::hypot_many(v), 1.0, 1e-12);
        }
        // theta = 2 e1 makes the best arm the first-coordinate argmax.
        let mut best = 0;
        for (i, v) in a.source.vectors.iter().enumerate() {
            if v[0] > a.source.vectors[best][0] {
                best = i;
            }
        }
        assert_eq!(a.best_target().unwrap(), best);
        assert!(a.min_gap().unwrap() >= 1e-6);
    }

    #[test]
    fn complete_case_filter() {
        let m = RatingMatrix::new(
            vec![
                vec![Some(1.0), Some(2.0)],
                vec![Some(1.0), None],
                vec![Some(3.0), Some(0.0)],
            ],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let cc = m.complete_cases();
        assert_eq!(cc.len(), 2);
        assert_eq!(cc[0], vec![1.0, 2.0]);
        assert_eq!(cc[1], vec![3.0, 0.0]);
    }

    #[test]
    fn single_user_replay_is_deterministic() {
        let m = RatingMatrix::new(
            vec![vec![Some(4.0), Some(-2.0)]],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let mut env = RatingReplayEnv::new(&m, 3).unwrap();
        for _ in 0..10 {
            assert_eq!(env.pull(0).unwrap(), 4.0);
            assert_eq!(env.pull(1).unwrap(), -2.0);
        }
    }

    #[test]
    fn surrogate_matrix_is_complete_and_replay_means_converge() {
        let item_means = [1.0, 0.2, -0.5];
        let m = make_surrogate_ratings(500, &item_means, 2.0, 0.5, 9).unwrap();
        assert_eq!(m.complete_cases().len(), 500);
        let mut env = RatingReplayEnv::new(&m, 17).unwrap();
        assert_eq!(env.best_item(), 0);

        // Long-run replay mean per item vs the dataset's empirical mean.
        let truth = env.item_means().to_vec();
        let n_pulls = 1_000_000u64;
        for arm in 0..3 {
            let mut sum = 0.0;
            for _ in 0..n_pulls {
                sum += env.pull(arm).unwrap();
            }
            let replay_mean = sum / n_pulls as f64;
            // Row std is about sqrt(2^2 + 0.5^2); four standard errors.
            let se = 2.1 / (n_pulls as f64).sqrt();
            assert_close(replay_mean, truth[arm], 4.0 * se);
        }
    }

    #[test]
    fn replay_requires_complete_cases() {
        let m = RatingMatrix::new(
            vec![vec![Some(1.0), None], vec![None, Some(2.0)]],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        assert!(RatingReplayEnv::new(&m, 1).is_err());
    }
}
