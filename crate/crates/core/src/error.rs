use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violates an operation precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Config or manifest failed validation; names the offending field.
    #[error("schema error in `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("ingestion error for record `{record}`: {message}")]
    Ingestion { record: String, message: String },

    /// AUC needs both classes present.
    #[error("AUC undefined: {0}")]
    UndefinedAuc(String),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("held-out test set was already accessed in this run")]
    TestSetAlreadyAccessed,

    #[error("leakage guard tripped: {0}")]
    Leakage(String),

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn ingestion(record: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Ingestion {
            record: record.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input (config, schema, spec)
    /// rather than a runtime failure.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Schema { .. })
    }
}
