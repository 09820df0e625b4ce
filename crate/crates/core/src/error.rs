use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown sentiment label word {0:?}")]
    UnknownLabelWord(String),

    #[error("unknown category {0:?}")]
    UnknownCategory(String),

    #[error("categories {first} and {second} share the surface form {surface:?}")]
    AmbiguousCategorySurface {
        first: String,
        second: String,
        surface: String,
    },

    #[error("unknown task {0:?}")]
    UnknownTask(String),

    #[error("line {line}: malformed line: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("line {line}: span {span} out of range for {tokens} tokens")]
    SpanOutOfRange {
        line: usize,
        span: String,
        tokens: usize,
    },

    #[error("line {line}: unknown sentiment index {value:?}")]
    UnknownSentimentIndex { line: usize, value: String },

    #[error("line {line}: {reason}")]
    SchemaViolation { line: usize, reason: String },

    #[error("{task} instance {id} has no given anchor")]
    MissingAnchor { task: String, id: String },

    #[error("invalid template for {task}: {reason}")]
    InvalidTemplate { task: String, reason: String },

    #[error("K = {k} exceeds the {available} available reviews")]
    KTooLarge { k: usize, available: usize },

    #[error("prediction and gold lists differ in length ({preds} vs {golds})")]
    LengthMismatch { preds: usize, golds: usize },

    #[error("prediction and gold task sets differ: {0}")]
    TaskSetMismatch(String),

    #[error("no examples for task {0}")]
    EmptyTaskDataset(String),

    #[error("mixture needs at least one task")]
    EmptyTaskList,

    #[error("batch size {batch_size} is not divisible by {tasks} tasks")]
    BatchSizeIndivisible { batch_size: usize, tasks: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

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
}
