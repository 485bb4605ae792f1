use std::path::Path;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Core(#[from] lexigraph_core::Error),
    #[error("{path}: {message}")]
    Config { path: String, message: String },
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("job '{0}' not found")]
    JobNotFound(String),
}

impl ServiceError {
    pub fn config(path: &Path, message: impl std::fmt::Display) -> Self {
        ServiceError::Config {
            path: path.display().to_string(),
            message: message.to_string(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::Core(e) => e.kind(),
            ServiceError::Config { .. } => "ConfigError",
            ServiceError::BadRequest(_) => "BadRequest",
            ServiceError::JobNotFound(_) => "NotFound",
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody {
            kind: self.kind().to_string(),
            message: self.to_string(),
        }
    }
}

impl From<lexigraph_core::store::StoreError> for ServiceError {
    fn from(e: lexigraph_core::store::StoreError) -> Self {
        ServiceError::Core(e.into())
    }
}

/// Wire form of an error, also printed by the CLI as one JSON line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub message: String,
}

impl ErrorBody {
    pub fn line(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}
