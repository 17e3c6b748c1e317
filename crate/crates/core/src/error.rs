//! Crate-wide error type.

use std::fmt;
use std::io;

/// Errors raised anywhere in the pipeline.
#[derive(Debug)]
pub enum Error {
    /// Incompatible tensor or array shapes.
    Dimension(String),
    /// An argument outside its documented domain.
    Argument(String),
    /// An operation that needs at least one element received none.
    EmptyInput(String),
    /// A class label outside `[0, M)`.
    Label { index: usize, label: usize, classes: usize },
    /// Optimizer or tape used in an invalid state.
    State(String),
    /// Malformed file contents.
    Format { offset: u64, message: String },
    /// Well-formed input that violates a data contract.
    Data(String),
    /// Invalid configuration (unknown keys, unparsable values).
    Config(String),
    /// No valid multi-scale center was found within the attempt budget.
    SamplingExhausted { attempts: usize },
    /// Metrics requested from an empty confusion matrix.
    UndefinedMetrics,
    Io(io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension(m) => write!(f, "dimension error: {m}"),
            Error::Argument(m) => write!(f, "argument error: {m}"),
            Error::EmptyInput(m) => write!(f, "empty input: {m}"),
            Error::Label { index, label, classes } => write!(
                f,
                "label error: label {label} at index {index} is out of range for {classes} classes"
            ),
            Error::State(m) => write!(f, "state error: {m}"),
            Error::Format { offset, message } => {
                write!(f, "format error at byte {offset}: {message}")
            }
            Error::Data(m) => write!(f, "data error: {m}"),
            Error::Config(m) => write!(f, "config error: {m}"),
            Error::SamplingExhausted { attempts } => write!(
                f,
                "sampling exhausted: no valid multi-scale center after {attempts} attempts"
            ),
            Error::UndefinedMetrics => write!(f, "metrics undefined for an empty confusion matrix"),
            Error::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}

impl Error {
    /// True for errors caused by bad user input rather than runtime/data problems.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Argument(_) | Error::Config(_))
    }
}
