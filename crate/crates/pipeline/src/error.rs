use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Core(#[from] ordinal_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}, row {row}: missing sample id")]
    MissingId { path: PathBuf, row: usize },

    #[error("{path}, row {row}: sample id `{value}` is not a nonnegative integer")]
    BadId {
        path: PathBuf,
        row: usize,
        value: String,
    },

    #[error("{path}, row {row}: duplicate sample id {id}")]
    DuplicateId { path: PathBuf, row: usize, id: u64 },

    #[error("view `{view}` is misaligned: sample id {id} is not shared by every view")]
    MisalignedIds { view: String, id: u64 },

    #[error("{path}, row {row}: label `{value}` is not an integer")]
    NonIntegerLabel {
        path: PathBuf,
        row: usize,
        value: String,
    },

    #[error("{path}, row {row}: label {label} out of range for {classes} classes")]
    LabelRange {
        path: PathBuf,
        row: usize,
        label: i64,
        classes: usize,
    },

    #[error("{path}, row {row}: labels disagree between views for sample id {id}")]
    LabelConflict { path: PathBuf, row: usize, id: u64 },

    #[error("{path}, row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}, row {row}: column `{column}` value `{value}` is not a number")]
    NonNumeric {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Job {
        context: String,
        #[source]
        source: ordinal_core::Error,
    },
}

impl PipelineError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        PipelineError::Csv {
            path: path.into(),
            source,
        }
    }
}
