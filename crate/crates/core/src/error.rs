//! Error type shared by every module of the library.

use thiserror::Error;

/// Failure modes of the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the mathematical domain of the routine.
    #[error("domain error: {0}")]
    Domain(String),
    /// An argument violates a structural precondition (size, ordering, range).
    #[error("argument error: {0}")]
    Argument(String),
    /// A numerical evaluation produced a non-finite value or failed to converge.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// A truncated integral still carries non-negligible mass at its cutoff.
    #[error("truncation error: {0}")]
    Truncation(String),
    /// Two evaluation paths that must agree did not.
    #[error("consistency error: {0}")]
    Consistency(String),
    /// The requested configuration is outside the supported range.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite, got {x}")))
    }
}
