// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, IdaniError>;

#[derive(Debug, Error)]
pub enum IdaniError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// The file does not follow the declared layout.
    #[error("format error: {0}")]
    Format(String),

    /// The content parsed but violates an invariant.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("probe training diverged at epoch {epoch} (loss {loss}); try a lower learning rate")]
    Divergence { epoch: usize, loss: f64 },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl IdaniError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for failures of the filesystem rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Self::Io { .. })
    }
}
