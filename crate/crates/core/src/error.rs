use thiserror::Error;

pub type Result<T> = std::result::Result<T, SlopeError>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SlopeError {
    #[error("degree variant mismatch: {0}")]
    VariantMismatch(String),
    #[error("slope of the zero object is undefined")]
    ZeroObject,
    #[error("backend lacks capability: {0}")]
    Capability(String),
    #[error("search budget exhausted: {0}")]
    BudgetExhausted(String),
    #[error("quotient failure: {0}")]
    Quotient(String),
    #[error("insufficient precision: {0}")]
    Precision(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("schema error at {location}: {message}")]
    Schema { location: String, message: String },
}

impl SlopeError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        SlopeError::Invalid(msg.into())
    }

    pub fn schema(location: impl Into<String>, message: impl Into<String>) -> Self {
        SlopeError::Schema {
            location: location.into(),
            message: message.into(),
        }
    }
}
