use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("utterance `{0}` has no transcript")]
    MissingTranscript(String),
    #[error("utterance `{id}`: {source}")]
    InUtterance {
        id: String,
        #[source]
        source: Box<Error>,
    },
    #[error("utterance `{0}` has an empty transcript")]
    EmptyTranscript(String),
    #[error("duplicate utterance id `{0}`")]
    DuplicateId(String),
    #[error("{context}: dimension mismatch (expected {expected}, found {found})")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },
    #[error("word `{0}` is not in the dictionary")]
    OutOfDictionary(String),
    #[error("no valid path: {frames} frames cannot cover {required} states")]
    NoValidPath { frames: usize, required: usize },
    #[error("enumeration of {0} candidate sequences exceeds the limit")]
    EnumerationTooLarge(u128),
    #[error("estimated pronunciation of {len} units exceeds the limit of {max}")]
    PronunciationTooLong { len: usize, max: usize },
    #[error("word `{0}` has no usable segments and no current pronunciation")]
    IncompleteDictionary(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Broad failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InUtterance { source, .. } => source.kind(),
            Error::InvalidArgument(_) => ErrorKind::Usage,
            Error::NoValidPath { .. }
            | Error::Divergence { .. }
            | Error::Numeric(_)
            | Error::PronunciationTooLong { .. } => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
