use std::io;

/// Errors produced by the re-ranking engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("non-finite value in vector")]
    NonFinite,

    #[error("document not in forward index: {0}")]
    MissingDocument(String),

    #[error("document already indexed: {0}")]
    DuplicateDocument(String),

    #[error("no query vector for query {0}")]
    MissingQuery(String),

    #[error("format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    #[error("unsupported index version {found} (expected {expected})")]
    Version { found: u8, expected: u8 },

    #[error("query has no resolvable tokens")]
    EmptyQuery,

    #[error("unknown token: {0}")]
    UnknownToken(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn format(offset: u64, reason: impl Into<String>) -> Self {
        Error::Format {
            offset,
            reason: reason.into(),
        }
    }

    pub(crate) fn domain(reason: impl Into<String>) -> Self {
        Error::Domain(reason.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
