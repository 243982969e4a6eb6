use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("invalid JSON at line {line}: {message}")]
    Json { line: usize, message: String },

    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("no definitional pair could be resolved in the embedding")]
    NoPairsResolvable,

    #[error("all definitional pairs are degenerate (centered vectors vanish)")]
    DegeneratePairs,

    #[error("requested {k} components but the embedding has dimension {dim}")]
    KTooLarge { k: usize, dim: usize },

    #[error("token {0:?} has no embedding")]
    OutOfVocabulary(String),

    #[error("prompt {0:?} has no scorable completions")]
    EmptySample(String),

    #[error("prompt {prompt:?} not found in corpus for model {model:?}")]
    PromptNotInCorpus { prompt: String, model: String },

    #[error("prompt {0:?} has no words in the embedding vocabulary")]
    NoVocabularyOverlap(String),

    #[error("this similarity metric requires an embedding")]
    MissingEmbedding,

    #[error("prompt {0:?} has no group label")]
    MissingLabel(String),

    #[error("no mock rule for prompt {0:?}")]
    UnknownPrompt(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("eigen-decomposition did not converge after {0} sweeps")]
    NoConvergence(usize),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Whether the failure was caused by the caller's inputs rather than by
    /// a numerical or internal fault.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::NoConvergence(_))
    }
}
