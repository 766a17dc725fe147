use thiserror::Error;

/// Errors raised by the ordinal toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("class {class} has {count} samples, needs at least {needed}")]
    ClassTooSmall {
        class: usize,
        count: usize,
        needed: usize,
    },

    #[error("dimension mismatch: expected {expected} features, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("degenerate agreement: expected weighted disagreement is zero")]
    DegenerateAgreement,

    #[error("unbalanced design: {0}")]
    UnbalancedDesign(String),

    #[error("degenerate pooled variance")]
    DegenerateVariance,

    #[error("did not converge after {iterations} iterations: {what}")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("unknown view `{0}`")]
    MissingView(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
