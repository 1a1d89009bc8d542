use thiserror::Error;

/// Errors raised by the library. Verdicts such as "undetermined" are values,
/// not errors.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("map {map} is not a proper contraction (c = {lower}, c' = {upper})")]
    Improper { map: usize, lower: f64, upper: f64 },

    #[error("hull is not invariant under map {map}: excess {excess:e}")]
    HullViolation { map: usize, excess: f64 },

    #[error("resource cap exceeded for {what}: need {required}, cap is {cap}")]
    Resource {
        what: String,
        required: u128,
        cap: u128,
    },

    #[error("sample spaces do not match: {0}")]
    Mismatch(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("internal inconsistency: {0}")]
    Internal(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
