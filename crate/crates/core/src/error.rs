// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CpdError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CpdError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{name} = {value} out of range [{lo}, {hi}]")]
    OutOfRange {
        name: &'static str,
        value: usize,
        lo: usize,
        hi: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("{path}:{line}: {message}")]
    DatasetParse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("model file parse error at byte {offset}: {message}")]
    ModelParse { offset: usize, message: String },

    #[error("unsupported model format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("model config mismatch: {0}")]
    ConfigMismatch(String),

    #[error("non-finite loss in epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("stream overflow: model context holds {capacity} steps")]
    StreamOverflow { capacity: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> CpdError {
    CpdError::InvalidArgument(msg.into())
}
