//! Error type shared by all analysis stages.

use thiserror::Error;

/// Errors produced while building models or running analyses.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A model element failed validation (index refers to the element list).
    #[error("element {index}: {reason}")]
    InvalidElement { index: usize, reason: String },

    /// A parameter outside an operation's domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Vector or matrix dimensions do not match the model.
    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    /// The iterative equilibrium search exhausted its restart budget.
    #[error("equilibrium search did not converge (best residual {best_residual:.3e})")]
    NotConverged { best_residual: f64 },

    /// A wrench-driven solve was requested on a structure whose Cartesian
    /// stiffness is singular, so the outer update has no unique direction.
    #[error("singular Cartesian stiffness (rank {rank} of {size}): wrench-driven solve is ill-posed")]
    SingularStiffness { rank: usize, size: usize },

    /// A matrix inverse required by a closed-form stiffness route does not
    /// exist at this state; the caller should fall back to the full bordered
    /// formulation.
    #[error("{context} is singular at this state; use the full bordered formulation")]
    SingularFactor { context: &'static str },

    /// Aggregation was asked to combine stiffness results expressed at
    /// different end frames.
    #[error("stiffness results refer to different end frames (max position gap {gap:.3e})")]
    FrameMismatch { gap: f64 },

    /// A configuration cannot satisfy the requested end-effector constraint.
    #[error("constraint restoration failed: {0}")]
    ConstraintRestoration(String),
}

/// Convenient alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
