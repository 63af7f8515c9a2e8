//! Crate-wide error type and exit-code mapping for the CLI.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("text is empty")]
    EmptyText,

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("text too short: {len} tokens, need at least {min}")]
    TextTooShort { len: usize, min: usize },

    #[error("score set is empty")]
    EmptyScoreSet,

    #[error("degenerate bounds: upper and lower are both {0}")]
    DegenerateBounds(f64),

    #[error("baseline must be positive, got {0}")]
    NonpositiveBaseline(f64),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("missing watermark sidecar: {0}")]
    MissingSidecar(String),

    #[error("missing metric input for {characteristic}: {detail}")]
    MissingMetric {
        characteristic: String,
        detail: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// CLI exit code: 0 success, 2 config error, 3 data error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::InvalidArgument(_)
            | Error::InvalidWeights(_)
            | Error::NonpositiveBaseline(_)
            | Error::DegenerateBounds(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
