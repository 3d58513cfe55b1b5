use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("trace {0} contains no tokens")]
    EmptyTrace(String),

    #[error("corpus contains no tokens")]
    EmptyCorpus,

    #[error("token {0:?} is not in the alphabet and no OTHER symbol is reserved")]
    UnknownTokenWithoutOther(String),

    #[error("symbol id {id} is outside an alphabet of size {size}")]
    SymbolOutOfRange { id: usize, size: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("observation sequence is empty")]
    EmptyObservation,

    #[error("sequence has probability zero under the model (step {step})")]
    ZeroProbabilitySequence { step: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("instance too large for exhaustive enumeration: {0}")]
    InstanceTooLarge(String),

    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("{kind} parse error at line {line}: {message}")]
    Parse {
        kind: &'static str,
        line: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn parse(kind: &'static str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            kind,
            line,
            message: message.into(),
        }
    }
}
