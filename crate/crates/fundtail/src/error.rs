use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at {context}: {message}")]
    Parse { context: String, message: String },

    #[error("award id {raw:?} has more than seven digits")]
    AwardIdTooLong { raw: String },

    #[error("duplicate grant key {0:?} in link input")]
    DuplicateGrantKey(String),

    #[error("corpus is empty: no documents to process")]
    EmptyCorpus,

    #[error("vocabulary is empty after document-frequency filtering")]
    EmptyVocabulary,

    #[error("k = {k} exceeds the corpus size of {total_tokens} tokens")]
    TooManyTopics { k: usize, total_tokens: usize },

    #[error("invalid sampler configuration: {0}")]
    SamplerConfig(String),

    #[error("model format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("fit failed for k = {k}: {source}")]
    SelectK {
        k: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("total investment is zero; shares are undefined")]
    ZeroTotalInvestment,

    #[error("grant {0:?} has no objective annotation")]
    MissingAnnotation(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("network error: {0}")]
    Network(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code: 1 for validation problems (bad flags or config,
    /// missing input files, malformed or inconsistent data), 2 for runtime
    /// failures (I/O, network).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { source, .. } if source.kind() == io::ErrorKind::NotFound => 1,
            Error::Io { .. } | Error::Network(_) => 2,
            Error::Stage { source, .. } | Error::SelectK { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}
