//! Error type shared by every module of the crate.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure classes. The CLI maps these onto its exit-code contract, so new
/// variants must be assigned to one of [`ErrorClass`]'s buckets.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("checksum mismatch in {path}: manifest says {expected:#010x}, payload hashes to {actual:#010x}")]
    Checksum { path: PathBuf, expected: u32, actual: u32 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("flat transfer function: {0}")]
    FlatTransfer(String),
}

/// Coarse grouping used for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Io,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } | Error::Format { .. } | Error::Checksum { .. } => ErrorClass::Io,
            Error::Invalid(_) | Error::Dimension { .. } => ErrorClass::Validation,
            Error::Numerical(_) | Error::FlatTransfer(_) => ErrorClass::Numerical,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Error::Invalid(message.into())
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Error::Numerical(message.into())
    }
}

pub(crate) fn ensure_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension { expected, actual })
    }
}
