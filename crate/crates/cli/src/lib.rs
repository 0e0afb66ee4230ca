//! Command-line front end for the chain elastostatics library.
//!
//! Four commands over one shared argument set:
//!
//! * `analyze` — Cartesian stiffness, rank, singular directions, and
//!   stability at a held pose.
//! * `trace` — force–deflection sweep along a displacement ray, written
//!   as CSV.
//! * `buckle` — sweep plus buckling detection, summarized per case.
//! * `stability` — stability verdict at a held pose.
//!
//! Models come from built-in scenarios (`--scenario modelB-S`) or from
//! description files (`--config legs.toml`, format in [`config`]). Exit
//! codes: 0 all solves converged, 2 convergence gaps, 1 usage or
//! configuration errors.

pub mod config;
pub mod csv;
pub mod error;
pub mod run;

pub use error::CliError;
pub use run::{entry, run, Cli};
