//! Crate-wide error type.

use std::fmt;

/// Errors surfaced by simulation, plasticity and experiment operations.
#[derive(Debug)]
pub enum Error {
    /// An argument violated an operation's contract (bad index, shape
    /// mismatch, unsorted spike train, ...).
    Parameter(String),
    /// A configuration value is invalid or inconsistent (bad timestep,
    /// empty benchmark size list, ...).
    Config(String),
    /// A correlation was requested on data with zero variance.
    UndefinedCorrelation,
    Io(std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parameter(msg) => write!(f, "parameter error: {msg}"),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::UndefinedCorrelation => {
                write!(f, "correlation undefined: an input has zero variance")
            }
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

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}
