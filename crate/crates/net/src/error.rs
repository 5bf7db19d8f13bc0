use std::path::PathBuf;

pub type NetResult<T> = std::result::Result<T, NetError>;

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error(transparent)]
    Autodiff(#[from] srr_autodiff::AdError),
    #[error(transparent)]
    Core(#[from] srr_core::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite value after block {block}")]
    NonFiniteBlock { block: usize },
    #[error("non-finite loss at step {step}; last good checkpoint: {}", last_checkpoint.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "none".into()))]
    NonFiniteLoss { step: usize, last_checkpoint: Option<PathBuf> },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
