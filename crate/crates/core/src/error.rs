use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("frame rate mismatch: expected {expected}, got {actual}")]
    FrameRateMismatch { expected: String, actual: String },

    #[error("insufficient training frames: need at least {required}, got {actual}")]
    InsufficientFrames { required: usize, actual: usize },

    #[error("token {token} at {location} is out of range for codebook size {codebook_size}")]
    TokenOutOfRange {
        token: u32,
        codebook_size: u32,
        location: String,
    },

    #[error("vocabulary mismatch: expected {expected}, got {actual}")]
    VocabularyMismatch { expected: String, actual: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("too few trials: need at least {required}, got {actual}")]
    TooFewTrials { required: usize, actual: usize },

    #[error("line {line}: {message}")]
    Manifest { line: usize, message: String },

    #[error("duplicate utterance id {0:?}")]
    DuplicateId(String),

    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn format(what: &'static str, msg: impl Into<String>) -> Self {
        Error::Format {
            what,
            message: msg.into(),
        }
    }

    /// Attaches a path to an error produced while reading or writing that file.
    pub fn at_path(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }

    /// True when the error stems from input data (files, corpora) rather than
    /// from parameters supplied by the caller.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::File { source, .. } => source.is_data_error(),
            Error::InvalidParameter(_) | Error::TooFewTrials { .. } | Error::Config { .. } => false,
            _ => true,
        }
    }
}
