//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by data loading, query parsing, modeling and training.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error("unknown item `{0}`")]
    UnknownItem(String),

    #[error("query has no positive literal")]
    NoPositiveLiteral,

    #[error("attribute `{0}` appears twice in query")]
    DuplicateAttribute(String),

    #[error("empty query")]
    EmptyQuery,

    #[error("hierarchy contains a cycle through `{0}`")]
    HierarchyCycle(String),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("index {index} out of range for {what} of size {size}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("result ratio undefined: the most restrictive atom matches no items")]
    UndefinedRho,

    #[error("scoring strategy `{strategy}` requires the {required} transform")]
    UnsupportedTransform {
        strategy: &'static str,
        required: &'static str,
    },

    #[error("loss `{loss}` requires the {required} transform")]
    LossTransformMismatch {
        loss: &'static str,
        required: &'static str,
    },

    #[error("query has {0} negated literals; at most 12 are supported")]
    TooManyNegations(usize),

    #[error("catalog mismatch: {0}")]
    CatalogMismatch(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),

    #[error("training diverged: non-finite loss in epoch {0}")]
    Diverged(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
