use thiserror::Error;

/// Errors raised by operator evaluation, integration and diagnostics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid descriptor: {0}")]
    InvalidDescriptor(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("inner iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("premise violated: {0}")]
    PremiseViolated(String),

    #[error("integration blew up at t = {last_valid_time}: non-finite state")]
    BlowUp { last_valid_time: f64 },

    #[error("unknown builtin instance `{0}`")]
    UnknownInstance(String),
}

pub type Result<T> = std::result::Result<T, Error>;
