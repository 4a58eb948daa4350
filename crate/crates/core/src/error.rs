use thiserror::Error;

/// Errors produced by the operator library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A request the engine does not support (e.g. dimension or rule order).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A structural constraint of a function family is violated.
    #[error("constraint violated: {0}")]
    Constraint(String),

    /// A non-finite value showed up during quadrature. `location` is the
    /// backward time `a` or the evaluation time, whichever was at hand.
    #[error("numeric failure: {message} (near {location:e})")]
    Numeric { message: String, location: f64 },

    /// The integrand does not decay fast enough for the tail to converge.
    #[error("integrability error: {0}")]
    Integrability(String),

    /// The function has no support metadata, so a finite horizon must be given.
    #[error("an explicit horizon is required: {0}")]
    HorizonRequired(String),

    /// Syntax error in a function expression, 1-based column.
    #[error("syntax error at column {column}: {message}")]
    Syntax { message: String, column: usize },

    /// Expression is well formed but invalid for the requested configuration.
    #[error("invalid expression: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
