//! Numerical thresholds used across the analyses.
//!
//! Every cutoff that influences a reported result lives here with a short
//! rationale, so behaviour can be audited (and tuned) in one place.

/// Weighted equilibrium residual below which a state counts as converged.
/// The weights normalise torque and pose residuals by the spring scale and
/// chain reach, so this is a dimensionless target near double precision.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Iteration cap for one Newton descent of the equilibrium solver.
pub const MAX_ITERS: usize = 100;

/// Restart budget when a descent stagnates or diverges.
pub const RESTART_COUNT: usize = 8;

/// Amplitude of the uniform coordinate noise applied on restarts. Large
/// enough to escape the symmetric configurations on which straight columns
/// stagnate, small enough to stay in the same solution basin.
pub const RESTART_NOISE: f64 = 1e-3;

/// Amplitude of the symmetry-breaking probe added at every traced path
/// point, so branches that bifurcate out of a symmetry plane are reachable.
pub const PROBE_NOISE: f64 = 1e-6;

/// Central-difference step for torque-map Hessians and Jacobian checks.
/// Balances truncation against round-off for coordinates of order one.
pub const FD_STEP: f64 = 1e-6;

/// A singular value below this fraction of the largest one counts as zero
/// when computing null spaces and matrix ranks.
pub const KERNEL_REL: f64 = 1e-10;

/// Relative truncation for least-squares solves of bordered systems. Tighter
/// than [`KERNEL_REL`] so legitimately ill-conditioned solves near critical
/// states are not flattened.
pub const SOLVE_TRUNCATION_REL: f64 = 1e-13;

/// Eigenvalues within this fraction of the largest magnitude straddle zero:
/// the verdict is reported as critical rather than forced to either side.
pub const CRITICAL_BAND: f64 = 1e-8;

/// Condition number above which a bordered solve is flagged as numerically
/// suspect in the iteration trace.
pub const CONDITION_WARN: f64 = 1e12;

/// Tangent-stiffness drop factor between adjacent path points that counts
/// as a buckling signature when no eigenvalue crossing is bracketed.
pub const STIFFNESS_DROP_FACTOR: f64 = 5.0;

/// Fraction of the sweep length to which a bracketed buckling point is
/// refined by bisection.
pub const BUCKLING_REFINE_REL: f64 = 1e-4;
