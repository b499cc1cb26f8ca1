use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the command line. Input problems exit with code 2,
/// failures while running with code 3.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: line {line}: {reason}")]
    MalformedRow { path: PathBuf, line: u64, reason: String },
    #[error("{0}: file has no data rows")]
    EmptyFile(PathBuf),
    #[error("{path}: line {line}: cannot parse date {value:?}")]
    UnparseableDate { path: PathBuf, line: u64, value: String },
    #[error("{path}: line {line}: negative inspection count")]
    NegativeCapacity { path: PathBuf, line: u64 },
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Runtime(_) | CliError::Io { .. } => 3,
            _ => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

/// Core errors caused by bad inputs are validation errors.
pub fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

pub fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

pub type Result<T> = std::result::Result<T, CliError>;
