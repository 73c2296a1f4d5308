//! Crate-wide error type.

use crate::mdp::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Structural problem with tensor shapes or index sets.
    #[error("shape error: {0}")]
    Shape(String),

    /// Discount factor outside the open interval (0, 1).
    #[error("gamma must lie in (0, 1), got {0}")]
    InvalidGamma(f64),

    /// A scalar argument that must be finite was not.
    #[error("{what} must be finite, got {value}")]
    NonFinite { what: &'static str, value: f64 },

    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The MDP failed its invariant checks.
    #[error("MDP validation failed: {0}")]
    Validation(ValidationReport),

    /// Deterministic-policy enumeration would exceed the configured cap.
    #[error("enumeration infeasible: {policies} policies exceed cap {cap}")]
    EnumerationInfeasible { policies: f64, cap: u64 },

    /// No positive absorption probability exists, so delta is undefined.
    #[error("delta undefined: no policy reaches a terminal state within |S|-1 steps")]
    DeltaEmpty,

    /// An iterative solver ran out of iterations.
    #[error("failed to converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    /// A linear system turned out singular where theory forbids it.
    #[error("internal error: singular linear system in {0}")]
    SingularSystem(&'static str),

    /// Threshold preconditions, reported individually.
    #[error("bound precondition violated: {0}")]
    BoundPrecondition(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
