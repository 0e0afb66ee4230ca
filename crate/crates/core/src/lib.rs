//! Elastostatic analysis of serial kinematic chains with lumped elasticity.
//!
//! A chain is a sequence of rigid transforms and joints. Joints are either
//! actuated (locked at a commanded value), perfectly passive (free
//! coordinates `q`), or elastic (spring coordinates `theta` with a
//! symmetric positive-definite stiffness block). The library answers four
//! questions about such chains and parallel assemblies of them:
//!
//! * **Equilibrium** — which configuration and end-effector wrench balance
//!   the springs when the end-effector is driven to a target pose
//!   ([`equilibrium::solve_for_pose`]) or loaded by a wrench
//!   ([`assembly::Assembly::solve_for_wrench`]).
//! * **Stability** — whether an equilibrium is a local minimum of the total
//!   potential restricted to the kinematic constraint ([`stability::classify`]).
//! * **Stiffness** — the Cartesian tangent stiffness about a loaded
//!   equilibrium, by three algebraically equivalent routes
//!   ([`stiffness::kc_full`], [`stiffness::kc_reduced`],
//!   [`stiffness::kc_frobenius`]).
//! * **Buckling** — where a displacement-driven loading path loses
//!   stability, with bisection refinement ([`pathtrace::detect_buckling`]).
//!
//! Benchmark chains (three-link planar and spatial columns, and a
//! three-chain orthogonal translational assembly) live in [`scenarios`].

pub mod assembly;
pub mod chain;
pub mod elasticity;
pub mod equilibrium;
pub mod error;
pub mod pathtrace;
pub mod pose;
pub mod scenarios;
pub mod stability;
pub mod stiffness;
pub mod tol;

pub use assembly::Assembly;
// (re-export list completed as modules land)
pub use chain::{ChainModel, Configuration, Element, JointAxis, JointKind, TaskSpace};
pub use equilibrium::{EquilibriumState, SolverSettings};
pub use error::Error;
pub use pose::{Pose, Wrench};
