use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("referential integrity: {0}")]
    ReferentialIntegrity(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("unsupported model file version {found} (expected {expected})")]
    UnsupportedVersion { expected: u32, found: u32 },

    #[error("backend mismatch: {operation} requires {required}, model is {found}")]
    BackendMismatch {
        operation: String,
        required: String,
        found: String,
    },

    #[error("out of vocabulary: {0:?}")]
    OutOfVocabulary(String),

    #[error("empty vocabulary after filtering")]
    EmptyVocabulary,

    #[error("generation failed for scene {scene}: {reason}")]
    GenerationFailure { scene: String, reason: String },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.to_string(),
        }
    }
}
