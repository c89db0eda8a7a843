use std::path::PathBuf;

use thiserror::Error;

use crate::model::LabelClass;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("sequence has {len} samples, at least {required} required")]
    SequenceTooShort { len: usize, required: usize },

    #[error("events leave a gap at sample {index}")]
    EventGap { index: usize },

    #[error("events overlap at sample {index}")]
    EventOverlap { index: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("class {0} has no samples in the evaluated truth")]
    MissingClass(LabelClass),

    #[error("no covered samples to evaluate")]
    NoCoverage,

    #[error("misaligned inputs: {0}")]
    Misaligned(String),

    #[error("unsupported model file version {found} (expected {expected})")]
    ModelVersion { found: u32, expected: u32 },

    #[error("corrupt model file: {0}")]
    ModelCorrupt(String),

    #[error("model shape mismatch: {0}")]
    ModelShape(String),

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(what: &'static str, detail: impl ToString) -> Self {
        Error::Format { what, detail: detail.to_string() }
    }
}
