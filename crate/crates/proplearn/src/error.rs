//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    /// A malformed line in an input file, with its 1-based line number.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Invalid data or parameters (empty vocabulary, out-of-range value, ...).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// A concept appears in the co-occurrence data but has no property norms.
    #[error("no property norms for concept `{0}`")]
    UnknownConcept(String),

    /// A context item is not part of the trained model's vocabulary.
    #[error("context item `{0}` is not in the model vocabulary")]
    UnknownItem(String),

    #[error("model snapshot: {0}")]
    Snapshot(String),

    /// Bad experiment configuration (unknown model name, missing path, ...).
    #[error("configuration: {0}")]
    Config(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Parse error constructor used by the file readers.
    pub fn parse(path: &str, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_string(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
