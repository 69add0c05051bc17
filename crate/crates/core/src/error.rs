use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the inference engine and experiment procedures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("vocabulary error: {0}")]
    Vocab(String),

    #[error("token id {id} at position {position} is out of range for a vocabulary of {vocab_size}")]
    TokenOutOfRange {
        id: u32,
        position: usize,
        vocab_size: usize,
    },

    #[error("weight file error: {0}")]
    Format(String),

    #[error("checksum mismatch for tensor `{tensor}`: header says {expected:#010x}, data hashes to {actual:#010x}")]
    Checksum {
        tensor: String,
        expected: u32,
        actual: u32,
    },

    #[error("invalid model configuration: {0}")]
    Config(String),

    #[error("non-finite activation at layer {layer}, position {position}")]
    NonFinite { layer: usize, position: usize },

    #[error("invalid argument: {0}")]
    Validation(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("corpus error: {0}")]
    Corpus(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad caller input rather than a runtime fault.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_)
                | Error::Config(_)
                | Error::LengthMismatch(_)
                | Error::TokenOutOfRange { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
