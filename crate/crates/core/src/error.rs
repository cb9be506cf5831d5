use std::io;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value or unknown config key.
    #[error("config: {0}")]
    Config(String),

    /// Malformed input file, reported with its 1-based line number.
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Invalid or inconsistent data outside of file parsing.
    #[error("{0}")]
    Data(String),

    /// Numeric failure (non-finite loss or gradients).
    #[error("numeric: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Coarse error category, used by the CLI to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Parse { .. } | Error::Data(_) | Error::Io(_) => ErrorKind::Data,
            Error::Numeric(_) => ErrorKind::Numeric,
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
