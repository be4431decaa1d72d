use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("layer-1 candidates need anchor rows")]
    MissingAnchors,
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
    #[error("column `{0}` not found")]
    MissingColumn(String),
    #[error("non-numeric cell {value:?} at row {row}, column `{column}`")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("empty file: {0}")]
    EmptyFile(String),
    #[error("oracle size guard: n = {n} exceeds {max}")]
    SizeGuard { n: usize, max: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
