use thiserror::Error;

use crate::embeddings::EmbedError;
use crate::engine::EngineError;
use crate::llm::GatewayError;
use crate::matcher::MatchError;
use crate::store::StoreError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-level error, one variant per module.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Short machine-readable error class, used by the CLI and HTTP layers.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Store(e) => e.kind(),
            Error::Embed(e) => e.kind(),
            Error::Gateway(e) => e.kind(),
            Error::Engine(e) => e.kind(),
            Error::Match(e) => e.kind(),
            Error::Io { .. } => "Io",
        }
    }
}
