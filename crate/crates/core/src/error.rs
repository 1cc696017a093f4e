use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("value {value} outside domain {domain}")]
    Domain { value: f64, domain: String },

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("supercriticality assumption violated: {0}")]
    Supercriticality(String),

    #[error("resource cap exceeded by `{parameter}`: {detail}")]
    Resource { parameter: &'static str, detail: String },

    #[error("bisection failed: {reason}\ntrace:\n{trace}")]
    Bisection { reason: String, trace: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
