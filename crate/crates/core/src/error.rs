use thiserror::Error;

/// Errors produced by the DIF analysis pipeline.
#[derive(Debug, Error)]
pub enum DifError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("schema error at row {row}, column `{column}`: {message}")]
    Schema {
        row: usize,
        column: String,
        message: String,
    },

    #[error("group column `{0}` not found in header")]
    MissingGroupColumn(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("matching criterion is degenerate: total scores have zero variance")]
    DegenerateCriterion,

    #[error("empty sample")]
    EmptySample,

    #[error("no neighbors in bandwidth at x = {x}")]
    NoNeighbors { x: f64 },

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("variance estimate is zero while the statistic is non-zero")]
    ZeroVariance,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("unknown method `{0}`")]
    UnknownMethod(String),
}

pub type Result<T> = std::result::Result<T, DifError>;
