use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}, sample {sample}")]
    NumericAbort {
        epoch: usize,
        batch: usize,
        sample: usize,
    },

    #[error("class index {index} out of range for K={k}")]
    IndexOutOfRange { index: usize, k: usize },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("stratification error: {0}")]
    Stratification(String),

    #[error("checkpoint load error: {0}")]
    CheckpointLoad(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
