use alloc::string::String;

/// Errors surfaced by construction, validation, and the identification loops.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Structural problem with an input (dimension mismatch, empty set,
    /// non-finite entry, weight vector off the simplex, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// An argument violated a documented precondition (nonpositive variance
    /// bound, anchor out of range, zero gap, ...).
    #[error("contract violation: {0}")]
    Contract(String),
    /// A target contrast is not identifiable from the source arms: it lies
    /// outside the span of pairwise source differences.
    #[error("target contrast {contrast} lies outside the span of source differences")]
    NotIdentifiable { contrast: usize },
    /// Arm index out of range for the environment or feature set.
    #[error("arm index {arm} out of range (have {arms} arms)")]
    ArmOutOfRange { arm: usize, arms: usize },
    /// Assumption-enforcement was requested and the instance breaks a bound.
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
