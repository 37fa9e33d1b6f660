//! Command errors and their exit codes.

use kpz_core::Error;
use thiserror::Error as ThisError;

/// Failure of a command.
#[derive(Debug, ThisError)]
pub enum CliError {
    /// Bad flags, configuration, input files or parameters.
    #[error("usage error: {0}")]
    Usage(String),
    /// A computation failed.
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// A verification ran and at least one check failed.
    #[error("verification failed: {0}")]
    Verification(String),
    /// Reading or writing output failed.
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// Process exit code: 1 usage, 2 numeric failure, 3 verification failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numeric(_) | CliError::Io(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_) | Error::Argument(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Result of a command.
pub type CliResult<T> = std::result::Result<T, CliError>;
