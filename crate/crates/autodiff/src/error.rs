use std::path::PathBuf;

pub type AdResult<T> = std::result::Result<T, AdError>;

#[derive(Debug, thiserror::Error)]
pub enum AdError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("channel mismatch: layer expects {expected} input channels, got {got}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("backward needs a scalar root, got dims {0:?}")]
    NonScalarRoot(Vec<usize>),
    #[error("variables live on different tapes")]
    ForeignTape,
    #[error("tape is not recording, so no gradients are available")]
    NotRecording,
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] srr_core::Error),
}
