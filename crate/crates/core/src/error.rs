use alloc::string::String;
use core::fmt;

/// Errors raised by the model, estimation and policy layers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Malformed or inconsistent input (dimension mismatch, infeasible action, ...).
    InvalidInput(String),
    /// A utility or log-rate exponent left the representable envelope.
    NumericOverflow { exponent: f64 },
    /// Exhaustive enumeration would exceed the configured limit.
    Capacity { required: u128, limit: u128 },
    /// The configuration cannot support the requested construction.
    Configuration(String),
    /// An information matrix is singular; more exploration is needed.
    NeedsMoreExploration(String),
    /// A closed-form constant came out non-finite or nonpositive.
    Internal(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::NumericOverflow { exponent } => {
                write!(f, "numeric overflow: exponent {exponent} outside [-700, 700]")
            }
            Error::Capacity { required, limit } => write!(
                f,
                "enumeration of {required} candidates exceeds the limit of {limit}; enable heuristic search"
            ),
            Error::Configuration(msg) => write!(f, "configuration error: {msg}"),
            Error::NeedsMoreExploration(msg) => write!(f, "needs more exploration: {msg}"),
            Error::Internal(msg) => write!(f, "internal consistency error: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
