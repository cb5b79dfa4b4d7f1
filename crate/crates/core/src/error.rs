use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("annotation span [{start}, {end}) lies outside text of length {len}")]
    SpanOutOfBounds { start: usize, end: usize, len: usize },

    #[error("malformed annotation file: {0}")]
    Annotation(String),

    #[error("invalid header pattern {pattern:?}: {reason}")]
    HeaderPattern { pattern: String, reason: String },

    #[error("need at least 3 documents to split, got {0}")]
    TooFewDocuments(usize),

    #[error("malformed note input: {0}")]
    NoteInput(String),

    #[error("malformed gazetteer line {line}: {reason}")]
    Gazetteer { line: usize, reason: String },

    #[error("gazetteer is empty")]
    EmptyGazetteer,

    #[error("covariate {0} is missing for at least one summary")]
    MissingCovariate(&'static str),

    #[error("corpus has {tokens} tokens, need more than window {window}")]
    CorpusTooShort { tokens: usize, window: usize },

    #[error("vector file line {line}: {reason}")]
    VectorFormat { line: usize, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite gradient in parameter {0}")]
    NonFiniteGradient(String),

    #[error("sequence length mismatch: {scores} emission rows vs {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },

    #[error("empty document")]
    EmptyDocument,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
