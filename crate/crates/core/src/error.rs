use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = LagrError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LagrError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("backward already ran on this tape; rebuild the forward graph first")]
    BackwardTwice,

    #[error("non-finite gradient for parameter `{0}`; optimizer step rejected")]
    NonFiniteGradient(String),

    #[error("parse error at {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("unknown {kind} label `{label}`")]
    UnknownLabel { kind: &'static str, label: String },

    #[error("input of length {len} exceeds the maximum sequence length {max}")]
    SequenceTooLong { len: usize, max: usize },

    #[error("graph with {nodes} nodes does not fit into {slots} slots (N={n}, L={layers})")]
    TooManyNodes {
        nodes: usize,
        slots: usize,
        n: usize,
        layers: usize,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("training diverged at step {step}: loss is {loss}")]
    Diverged { step: usize, loss: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LagrError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LagrError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        LagrError::InvalidArgument(msg.into())
    }
}
