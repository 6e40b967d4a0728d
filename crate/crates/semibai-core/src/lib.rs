//! Fixed-confidence best-arm identification for semiparametric linear bandits.
//!
//! The reward model is `r_t = x_{a_t}^T theta + nu_t + eta_t` where `nu_t` is an
//! arbitrary bounded shift chosen before the arm is revealed and `eta_t` is
//! sub-Gaussian noise. Identification works on *contrasts* `(z - z')^T theta`,
//! which the shift cannot touch once features are centered at the sampling
//! policy's mean. The crate provides:
//!
//! - covariance/design primitives with pseudo-inverse norms ([`covariance`]),
//! - duality-certified design solvers for XY, G-optimal, anchored and mixed
//!   policies ([`solvers`]),
//! - the orthogonalized (policy-centered) ridge estimator ([`estimator`]),
//! - the phase-elimination identification algorithm ([`spbai`]) and oracle
//!   baselines ([`baselines`]),
//! - simulated and replay reward environments ([`envs`]),
//! - instance-complexity benchmarks ([`benchmark`]).
//!
//! The crate is `no_std`-compatible (with `alloc`); disable default features to
//! drop `std`. File formats, the CLI, and the experiment harness live in the
//! companion `semibai` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod baselines;
pub mod benchmark;
pub mod covariance;
pub mod envs;
pub mod error;
pub mod estimator;
pub mod features;
pub mod linalg;
pub(crate) mod math;
pub mod solvers;
pub mod spbai;

pub use baselines::BaselineConfig;
pub use benchmark::{anchor_compat_check, oracle_gaps, tau_lin_star, BenchmarkResult};
pub use covariance::{inv_norm_sq, policy_mean, sigma_cov, sigma_shifted, v_cov_eval, NormValue, PsdMatrix};
pub use envs::{BanditEnv, Environment, Instance, RatingReplayEnv, ShiftKind};
pub use error::Error;
pub use estimator::{Estimate, RegressionState};
pub use features::{FeatureSet, Policy};
pub use solvers::{
    g_opt_semiparametric, mixture_policy, solve_g_optimal_linear, solve_xy_linear, xor_design,
    DesignSolution, SolverConfig,
};
pub use spbai::{run_sp_bai, AnchorRule, BaiConfig, PhaseRecord, RunResult};
