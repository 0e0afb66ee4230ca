//! Error type and exit-code policy for the command-line tools.

use thiserror::Error;

/// Anything that can stop a command.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or arguments.
    #[error("{0}")]
    Usage(String),

    /// Malformed or invalid model description.
    #[error("{0}")]
    Config(String),

    /// A requested solve failed to converge.
    #[error("{0}")]
    Solve(String),

    /// Failure reported by the analysis library.
    #[error(transparent)]
    Model(#[from] stiffbuck_core::Error),

    /// Filesystem trouble, with the path that caused it.
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit code: 2 when a solve did not converge, 1 otherwise.
    /// (Exit code 0 is reserved for fully converged runs.)
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solve(_) => 2,
            CliError::Model(stiffbuck_core::Error::NotConverged { .. }) => 2,
            _ => 1,
        }
    }
}

/// Attaches a path to an I/O error.
pub fn io_context(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}
