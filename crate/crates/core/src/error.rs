use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("read of masked cell (row {row}, column {col})")]
    MaskedRead { row: usize, col: usize },

    #[error("unsupported observation pattern {pattern}: {reason}")]
    UnsupportedPattern { pattern: String, reason: String },

    #[error("singular design: column {column} ({name}) is linearly dependent on the preceding columns")]
    SingularDesign { column: usize, name: String },

    #[error("quasi-complete separation detected after {iterations} iterations")]
    Separation { iterations: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Input(_) | Error::Csv(_) | Error::Json(_) => 2,
            Error::Numeric(_) | Error::SingularDesign { .. } | Error::Separation { .. } => 3,
            _ => 1,
        }
    }
}
