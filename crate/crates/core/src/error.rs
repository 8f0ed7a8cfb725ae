use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: String,
        actual: String,
    },
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("row {row} of {context} has zero norm")]
    ZeroNorm { context: &'static str, row: usize },
    #[error("query {query}: ground-truth index {index} out of range for {len} candidates")]
    IndexOutOfRange {
        query: usize,
        index: usize,
        len: usize,
    },
    #[error("initial state is frozen; updates are disabled at inference")]
    FrozenState,
    #[error("covariance of component {0} is not positive definite")]
    NotPositiveDefinite(usize),
    #[error("class {0} has no members")]
    EmptyClass(usize),
}

/// Coarse classification used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Shape,
    Numerical,
    Invalid,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Shape { .. } | Error::IndexOutOfRange { .. } | Error::Empty(_) => {
                ErrorKind::Shape
            }
            Error::NonFinite(_) | Error::ZeroNorm { .. } | Error::NotPositiveDefinite(_) => {
                ErrorKind::Numerical
            }
            Error::InvalidArgument(_) | Error::FrozenState | Error::EmptyClass(_) => {
                ErrorKind::Invalid
            }
        }
    }

    pub(crate) fn shape(
        context: &'static str,
        expected: impl ToString,
        actual: impl ToString,
    ) -> Self {
        Error::Shape {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
