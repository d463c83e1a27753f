use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by estimators, bound evaluators and constructors.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("outside domain: {0}")]
    Domain(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("refused: {0}")]
    Refused(String),

    #[error("quadrature did not converge after {evals} evaluations (partial value {partial}, error estimate {error})")]
    Quadrature { partial: f64, error: f64, evals: usize },

    #[error("numeric failure after {} partial results: {reason}", partial.len())]
    Numeric { reason: String, partial: Vec<f64> },
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidArgument(alloc::format!($($arg)*))
    };
}
pub(crate) use invalid;

macro_rules! domain {
    ($($arg:tt)*) => {
        $crate::error::Error::Domain(alloc::format!($($arg)*))
    };
}
pub(crate) use domain;
