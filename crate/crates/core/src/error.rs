use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("scene generation failed after {attempts} attempts: {reason}")]
    InfeasibleScene { attempts: usize, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("scale factor {scale} does not divide grid {h}x{w}")]
    NotDivisible { scale: usize, h: usize, w: usize },

    #[error("no valid cells to evaluate")]
    NoValidCells,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("sample {sample}: declared shape {declared:?} but file holds {found:?}")]
    SampleShape {
        sample: String,
        declared: [usize; 3],
        found: [usize; 3],
    },

    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config hash mismatch: checkpoint {checkpoint}, requested {requested}")]
    ConfigMismatch { checkpoint: String, requested: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
