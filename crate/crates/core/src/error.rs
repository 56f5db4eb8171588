use thiserror::Error;

/// Errors raised by map construction, training, imputation and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("neuron index {index} out of range for a map of {size} neurons")]
    NeuronOutOfRange { index: usize, size: usize },

    #[error("insufficient complete observations: {complete} complete rows for a map of {required} neurons")]
    InsufficientCompleteObservations { complete: usize, required: usize },

    #[error("row {row} has no observed entry")]
    EmptyRow { row: usize },

    #[error("column {column} has no observed entry")]
    EmptyColumn { column: usize },

    #[error("imputation set does not cover exactly the masked positions")]
    CoverageMismatch,

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
