use std::path::PathBuf;

use thiserror::Error;

/// Failure classes with distinct process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("I/O error: {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }
}

impl From<radmm_core::Error> for CliError {
    fn from(err: radmm_core::Error) -> Self {
        use radmm_core::Error as E;
        match err {
            E::Io { path, source } => CliError::io(path, source),
            E::Parse { path, message } => CliError::Io { path, message },
            E::NonFinite(_) | E::NegativePixel { .. } => CliError::Numerical(err.to_string()),
            _ => CliError::Config(err.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
