use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimMismatch { expected: Vec<usize>, got: Vec<usize> },

    #[error("invalid axis {axis} for grid of rank {rank}")]
    InvalidAxis { axis: usize, rank: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header {path}: {reason}")]
    Header { path: PathBuf, reason: String },

    #[error("unsupported precision tag {0:?}")]
    UnsupportedPrecision(String),

    #[error("data length mismatch in {path}: header implies {expected} bytes, file has {got}")]
    LengthMismatch { path: PathBuf, expected: u64, got: u64 },

    #[error("mask has no sampled points")]
    EmptyMask,

    #[error("acceleration factor {target} is not achievable: at most {max} with a {center:?} center block")]
    UnachievableAf { target: f64, max: f64, center: Vec<usize> },

    #[error("acceleration factor tolerance not met: target {target}, best achieved {achieved}")]
    AfToleranceNotMet { target: f64, achieved: f64 },

    #[error("solver diverged at iteration {iteration}: fidelity {value:e} exceeds 10x initial")]
    Diverged { iteration: usize, value: f64, trace: Vec<f64> },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("missing output for record {0}")]
    MissingRecord(String),

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn dims(expected: &[usize], got: &[usize]) -> Self {
        Error::DimMismatch { expected: expected.to_vec(), got: got.to_vec() }
    }
}
