//! Error type for configuration ingestion and validation.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config: {0}")]
    Io(#[from] std::io::Error),

    #[error("failed to parse config: {0}")]
    Parse(String),

    #[error("field `{field}`: unsupported unit `{unit}` (expected one of {expected})")]
    Unit {
        field: String,
        unit: String,
        expected: String,
    },

    #[error("field `{field}`: unknown reference `{name}`")]
    UnknownReference { field: String, name: String },

    #[error("invalid configuration: {0}")]
    Validation(String),
}

impl ConfigError {
    pub fn validation(msg: impl Into<String>) -> Self {
        ConfigError::Validation(msg.into())
    }
}
