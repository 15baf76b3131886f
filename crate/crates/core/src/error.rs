use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("field mismatch: {0}")]
    FieldMismatch(String),
    #[error("division by weakly zero element")]
    WeaklyZeroDivision,
    #[error("precision error: {0}")]
    Precision(String),
    #[error("depth budget exhausted: {0}")]
    Depth(String),
    #[error("inconsistent approximation: {0}")]
    Inconsistent(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("undefined valuation arithmetic: {0}")]
    UndefinedVal(String),
    #[error("iteration cap exceeded: {0}")]
    IterationCap(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Short class name, used by the CLI on standard error.
    pub fn class(&self) -> &'static str {
        match self {
            Error::FieldMismatch(_) => "FieldMismatch",
            Error::WeaklyZeroDivision => "WeaklyZeroDivision",
            Error::Precision(_) => "PrecisionError",
            Error::Depth(_) => "DepthError",
            Error::Inconsistent(_) => "InconsistentApproximation",
            Error::Unsupported(_) => "Unsupported",
            Error::Invalid(_) => "InvalidInput",
            Error::UndefinedVal(_) => "UndefinedValuation",
            Error::IterationCap(_) => "IterationCap",
            Error::Parse(_) => "ParseError",
        }
    }

    pub fn precision(msg: impl Into<String>) -> Self {
        Error::Precision(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
