use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Ingest { line: usize, message: String },

    #[error("input contained no usable records")]
    EmptyCorpus,

    #[error("split error: {0}")]
    Split(String),

    #[error("tagging failed: {0}")]
    Tagging(String),

    #[error("sequence of {len} tokens exceeds the maximum of {max}")]
    Length { len: usize, max: usize },

    #[error("non-finite loss at step {step} (batch {batch}): {detail}")]
    NonFiniteLoss {
        step: usize,
        batch: usize,
        detail: String,
    },

    #[error("training diverged at step {step}: {detail}")]
    Diverged { step: usize, detail: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{component} failed: {source}")]
    Component {
        component: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },

    #[error("validation failed:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error(transparent)]
    Tensor(#[from] candle_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn in_component(component: &'static str, source: Error) -> Self {
        Error::Component {
            component,
            source: Box::new(source),
        }
    }
}
