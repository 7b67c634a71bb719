use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line is empty after preprocessing")]
    EmptyAfterMask,

    #[error("format error: {0}")]
    Format(String),

    #[error("zero-norm vector has no cosine distance")]
    ZeroVector,

    #[error("embedding store is empty")]
    EmptyStore,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("shape mismatch in {what}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        what: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("need at least {needed} events to form a window, got {got}")]
    TooFewEvents { needed: usize, got: usize },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    DivergenceDetected { epoch: usize },

    #[error("no training windows to calibrate against")]
    EmptyTrainingSet,

    #[error("alteration intensity {intensity} exceeds length {len}")]
    IntensityTooLarge { intensity: usize, len: usize },

    #[error("block of {block_len} does not fit in a sequence of {len}")]
    BlockOutOfRange { block_len: usize, len: usize },

    #[error("alteration needs a vocabulary with at least two distinct tokens")]
    EmptyVocabulary,

    #[error("no verdicts to score")]
    EmptyInput,

    #[error("unknown template id {0}")]
    UnknownTemplate(u32),

    #[error("no embedding available for template {0:?}")]
    MissingEmbedding(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
