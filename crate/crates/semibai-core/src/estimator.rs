//! Centered ridge regression.
//!
//! Rewards contain an arbitrary bounded shift shared by all arms at each
//! round. Centering every pulled feature by the sampling policy's mean makes
//! the shift enter only through the zero-mean factor `x_arm - mean`, so it
//! cancels in expectation and contrasts of the fitted coefficients stay
//! unbiased — unlike a naive uncentered fit, whose coefficient vector absorbs
//! the shift.

use alloc::vec;
use alloc::vec::Vec;

use crate::covariance::policy_mean;
use crate::error::{contract, invalid, Error, Result};
use crate::features::{FeatureSet, Policy};
use crate::linalg;

/// Streaming accumulator for the centered ridge fit.
///
/// `b_mat` is the centered Gram matrix `sum (x - center)(x - center)^T`,
/// `b_vec` the centered response sum `sum (x - center) r`. The ridge level
/// `beta` is fixed at construction, before any data arrives.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionState {
    features: FeatureSet,
    b_mat: Vec<f64>,
    b_vec: Vec<f64>,
    n: u64,
    center: Vec<f64>,
    beta: f64,
}

/// Fitted coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub theta_hat: Vec<f64>,
}

/// Fresh accumulator centered at the mean of `p` over `source`.
pub fn init_state(source: &FeatureSet, p: &Policy, beta: f64) -> Result<RegressionState> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(invalid("ridge parameter beta must be finite and nonnegative"));
    }
    let center = policy_mean(source, p)?;
    let d = source.dim;
    Ok(RegressionState {
        features: source.clone(),
        b_mat: vec![0.0; d * d],
        b_vec: vec![0.0; d],
        n: 0,
        center,
        beta,
    })
}

/// Absorb one observation: `(x_arm - center)` rank-one update of the Gram
/// matrix, response accumulated against the same centered feature.
pub fn update(state: &mut RegressionState, arm: usize, reward: f64) -> Result<()> {
    if arm >= state.features.len() {
        return Err(Error::ArmOutOfRange { arm, arms: state.features.len() });
    }
    let d = state.features.dim;
    let x = state.features.get(arm);
    let mut centered = vec![0.0; d];
    for j in 0..d {
        centered[j] = x[j] - state.center[j];
    }
    linalg::add_outer(&mut state.b_mat, d, &centered, 1.0);
    for j in 0..d {
        state.b_vec[j] += centered[j] * reward;
    }
    state.n += 1;
    Ok(())
}

/// Solve `(B + beta I) theta = b`. With `beta = 0` the Gram matrix must be
/// full rank; a singular system is an error rather than a garbage estimate.
pub fn fit(state: &RegressionState) -> Result<Estimate> {
    let d = state.features.dim;
    let mut a = state.b_mat.clone();
    for i in 0..d {
        a[i * d + i] += state.beta;
    }
    let ch = linalg::cholesky(&a, d).ok_or_else(|| {
        contract("regression system is singular; a positive ridge is required")
    })?;
    let theta_hat = ch.solve(&state.b_vec);
    if theta_hat.iter().any(|x| !x.is_finite()) {
        return Err(contract("regression produced non-finite coefficients"));
    }
    Ok(Estimate { theta_hat })
}

/// Exact sum-merge of two accumulators over the same design (same features,
/// center, and ridge). Lets the harness shard updates across workers.
pub fn merge(a: &RegressionState, b: &RegressionState) -> Result<RegressionState> {
    if a.features != b.features || a.center != b.center || a.beta != b.beta {
        return Err(contract("cannot merge regression states with different designs"));
    }
    let mut out = a.clone();
    for (x, y) in out.b_mat.iter_mut().zip(b.b_mat.iter()) {
        *x += y;
    }
    for (x, y) in out.b_vec.iter_mut().zip(b.b_vec.iter()) {
        *x += y;
    }
    out.n += b.n;
    Ok(out)
}

impl RegressionState {
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gram(&self) -> &[f64] {
        &self.b_mat
    }

    pub fn response(&self) -> &[f64] {
        &self.b_vec
    }
}
