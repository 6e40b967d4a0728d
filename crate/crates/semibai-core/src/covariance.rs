//! Policy-induced covariance geometry: centered and anchor-shifted second
//! moments, and the generalized inverse-weighted norm that drives every
//! design objective in this crate.
//!
//! The norm `||y||^2_{A^{-1}}` is defined as the limit of ridged norms
//! `y^T (A + lam I)^{-1} y` as `lam -> 0+`: finite exactly when `y` lies in
//! the column space of `A`, `+inf` otherwise. We realize it by eigenvalue
//! thresholding, which is the stable finite-precision reading of that limit.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{contract, invalid, Error, Result};
use crate::features::{FeatureSet, Policy};
use crate::linalg::{self, SymEigen};
use crate::math;

/// Relative eigenvalue cutoff separating column space from null space.
pub const RANK_TOL: f64 = 1e-10;
/// Relative residual tolerance for "y lies in the column space".
pub const TOL_SPACE: f64 = 1e-7;

/// Symmetric positive-semidefinite matrix with a cached eigendecomposition
/// and rank-aware pseudo-inversion. Immutable after construction.
#[derive(Debug, Clone)]
pub struct PsdMatrix {
    entries: Vec<f64>,
    dim: usize,
    rank_tol: f64,
    eigen: SymEigen,
}

impl PsdMatrix {
    /// Wrap a row-major symmetric matrix, verifying symmetry and numerical
    /// positive semidefiniteness, and precomputing its eigendecomposition.
    pub fn new(entries: Vec<f64>, dim: usize) -> Result<Self> {
        Self::with_rank_tol(entries, dim, RANK_TOL)
    }

    pub fn with_rank_tol(entries: Vec<f64>, dim: usize, rank_tol: f64) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(contract(format!(
                "matrix buffer has {} entries, expected {}",
                entries.len(),
                dim * dim
            )));
        }
        let scale = entries.iter().fold(0.0_f64, |m, &x| m.max(math::abs(x)));
        for i in 0..dim {
            for j in (i + 1)..dim {
                let skew = math::abs(entries[i * dim + j] - entries[j * dim + i]);
                if skew > 1e-10 * scale.max(1.0) {
                    return Err(contract(format!(
                        "matrix is not symmetric at ({i},{j}): skew {skew:e}"
                    )));
                }
            }
        }
        let eigen = linalg::sym_eigen(&entries, dim);
        let lambda_max = eigen.values.first().copied().unwrap_or(0.0).max(0.0);
        let lambda_min = eigen.values.last().copied().unwrap_or(0.0);
        if lambda_min < -1e-8 * lambda_max.max(1e-300) {
            return Err(contract(format!(
                "matrix has eigenvalue {lambda_min:e}, below the PSD tolerance"
            )));
        }
        Ok(PsdMatrix { entries, dim, rank_tol, eigen })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn eigen(&self) -> &SymEigen {
        &self.eigen
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigen.values.first().copied().unwrap_or(0.0).max(0.0)
    }
}

/// Result of a generalized inverse-weighted norm query.
///
/// `value` is finite exactly when `in_column_space` is true; otherwise it is
/// the `+inf` sentinel and `residual` carries the Euclidean norm of the
/// component of the queried vector outside the matrix column space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormValue {
    pub value: f64,
    pub in_column_space: bool,
    pub residual: f64,
}

impl NormValue {
    pub fn is_finite(&self) -> bool {
        self.in_column_space
    }
}

/// Squared generalized inverse-weighted norm `||y||^2_{A^{-1}}`.
pub fn inv_norm_sq(a: &PsdMatrix, y: &[f64]) -> NormValue {
    debug_assert_eq!(y.len(), a.dim());
    let cutoff = (a.rank_tol * a.lambda_max()).max(f64::MIN_POSITIVE);
    let coeffs = a.eigen.coefficients(y);
    let mut value = 0.0;
    let mut residual_sq = 0.0;
    for (k, &c) in coeffs.iter().enumerate() {
        let lam = a.eigen.values[k];
        if lam > cutoff {
            value += c * c / lam;
        } else {
            residual_sq += c * c;
        }
    }
    let residual = math::sqrt(residual_sq);
    let y_norm = math::hypot_many(y);
    if residual > TOL_SPACE * y_norm {
        NormValue { value: f64::INFINITY, in_column_space: false, residual }
    } else {
        NormValue { value, in_column_space: true, residual }
    }
}

fn check_policy_match(features: &FeatureSet, p: &Policy) -> Result<()> {
    if features.len() != p.len() {
        return Err(contract(format!(
            "feature set has {} arms but policy has {} weights",
            features.len(),
            p.len()
        )));
    }
    Ok(())
}

/// Policy mean `sum_i p_i x_i`.
pub fn policy_mean(features: &FeatureSet, p: &Policy) -> Result<Vec<f64>> {
    check_policy_match(features, p)?;
    let d = features.dim;
    let mut mean = vec![0.0; d];
    for (v, &w) in features.vectors.iter().zip(p.weights.iter()) {
        for j in 0..d {
            mean[j] += w * v[j];
        }
    }
    Ok(mean)
}

/// Centered second moment `sum_i p_i (x_i - mean)(x_i - mean)^T`.
pub fn sigma_cov(features: &FeatureSet, p: &Policy) -> Result<PsdMatrix> {
    let mean = policy_mean(features, p)?;
    let d = features.dim;
    let mut m = vec![0.0; d * d];
    let mut centered = vec![0.0; d];
    for (v, &w) in features.vectors.iter().zip(p.weights.iter()) {
        if w == 0.0 {
            continue;
        }
        for j in 0..d {
            centered[j] = v[j] - mean[j];
        }
        linalg::add_outer(&mut m, d, &centered, w);
    }
    PsdMatrix::new(m, d)
}

/// Anchor-shifted second moment `sum_i p_i (x_i - x_anchor)(x_i - x_anchor)^T`.
pub fn sigma_shifted(features: &FeatureSet, p: &Policy, anchor: usize) -> Result<PsdMatrix> {
    check_policy_match(features, p)?;
    if anchor >= features.len() {
        return Err(Error::ArmOutOfRange { arm: anchor, arms: features.len() });
    }
    let d = features.dim;
    let mut m = vec![0.0; d * d];
    let mut shifted = vec![0.0; d];
    let xa = features.get(anchor).to_vec();
    for (v, &w) in features.vectors.iter().zip(p.weights.iter()) {
        if w == 0.0 {
            continue;
        }
        for j in 0..d {
            shifted[j] = v[j] - xa[j];
        }
        linalg::add_outer(&mut m, d, &shifted, w);
    }
    PsdMatrix::new(m, d)
}

/// Worst pairwise inverse-covariance norm over the active set:
/// `max_{u,u' in active} ||u - u'||^2` in the `sigma_cov(source, p)` geometry.
/// Returns `+inf` when some difference leaves the covariance column space.
pub fn v_cov_eval(active: &FeatureSet, source: &FeatureSet, p: &Policy) -> Result<f64> {
    if active.len() < 2 {
        return Err(invalid("active set must contain at least two vectors"));
    }
    if active.dim != source.dim {
        return Err(contract(format!(
            "active dim {} differs from source dim {}",
            active.dim, source.dim
        )));
    }
    let cov = sigma_cov(source, p)?;
    let d = active.dim;
    let mut worst = 0.0_f64;
    let mut diff = vec![0.0; d];
    for i in 0..active.len() {
        for j in (i + 1)..active.len() {
            let (u, v) = (active.get(i), active.get(j));
            let mut same = true;
            for k in 0..d {
                diff[k] = u[k] - v[k];
                if diff[k] != 0.0 {
                    same = false;
                }
            }
            if same {
                continue;
            }
            let n = inv_norm_sq(&cov, &diff);
            if !n.in_column_space {
                return Ok(f64::INFINITY);
            }
            if n.value > worst {
                worst = n.value;
            }
        }
    }
    Ok(worst)
}
