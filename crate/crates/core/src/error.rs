//! Error taxonomy shared by all modules.
//!
//! The split mirrors how the CLI maps failures to exit codes: domain,
//! shape, and precondition violations are user-input problems; `Numeric`
//! means a quadrature or iteration failed to converge.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A star-shape representation is invalid (e.g. radius not positive).
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    /// A geometric routine (recentering, hull recast) failed.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// A stated precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A quadrature or iterative scheme did not converge.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Malformed input file or specification.
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
