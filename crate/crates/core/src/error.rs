use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("i/o error: {0}")]
    Stream(#[from] std::io::Error),

    /// A file did not match the expected on-disk layout. `field` names the
    /// header or record element that failed to parse.
    #[error("format error in {field}: {message}")]
    Format { field: String, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("mask contains no iris pixels")]
    EmptyMask,

    #[error("graph has {nodes} nodes, exceeding the cap of {cap}")]
    CapViolation { nodes: usize, cap: usize },

    #[error("graph has no real nodes")]
    UnusableGraph,

    #[error("shape mismatch for {tensor}: expected {expected:?}, found {found:?}")]
    Shape {
        tensor: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },

    #[error("users with fewer than {min} images: {users:?}")]
    TooFewImages { min: usize, users: Vec<String> },

    #[error("need at least {needed} users, corpus has {available}")]
    InsufficientUsers { needed: usize, available: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
