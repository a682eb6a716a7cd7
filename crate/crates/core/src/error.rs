use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-increasing timestamps: {previous} ms followed by {next} ms")]
    NonIncreasingTimestamps { previous: f64, next: f64 },

    #[error("non-monotone gaze batch: sample at {next} ms precedes last accepted {last} ms")]
    NonMonotone { last: f64, next: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("invalid layout at {location}: {reason}")]
    InvalidLayout { location: String, reason: String },

    #[error("corrupt layout: word index {index} out of bounds ({count} words)")]
    CorruptLayout { index: usize, count: usize },

    #[error("word has no letters: {0:?}")]
    NoLetters(String),

    #[error("no word tokens in sentence {0:?}")]
    NoWords(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("dimension mismatch: expected {expected} columns, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },

    #[error("empty simplification for sentence {0}")]
    EmptySimplification(usize),

    #[error("completion client failed: {message}")]
    Client { message: String, retriable: bool },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("untrained user {0}")]
    UntrainedUser(String),

    #[error("invalid session state: {0}")]
    InvalidState(String),

    #[error("unsupported model format version {0}")]
    ModelVersion(u32),

    #[error("parse error in {source_name}: {message}")]
    Parse { source_name: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(source_name: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            message: message.to_string(),
        }
    }

    /// Whether retrying the same operation may succeed.
    pub fn is_retriable(&self) -> bool {
        matches!(self, Error::Client { retriable: true, .. })
    }
}
