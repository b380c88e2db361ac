use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the reconstruction library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid cluster geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("{what}: expected length {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("cluster index {index} out of range for {count} clusters")]
    ClusterOutOfRange { index: usize, count: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("scene energy is zero; SNR is undefined for a finite snr_db")]
    ZeroSceneEnergy,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("negative pixel value {value} at index {index}")]
    NegativePixel { index: usize, value: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed data: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
