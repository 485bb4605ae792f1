//! Prompt construction, response parsing, provider access and cost
//! accounting.

mod format;
mod ledger;
mod provider;
mod replay;
mod schema;
mod template;

pub use format::{
    build_format_instructions, format_number, parse_number, parse_response, render_payload, ItemValue, ParsedElement,
    ParsedResponse, ResponseItem,
};
pub use ledger::{BudgetDecision, CostLedger, SharedLedger, TokenUsage};
pub use provider::{Capabilities, Gateway, Provider, ProviderError, ProviderResponse, RequestOptions, RetryPolicy};
pub use replay::{
    canonicalize, prompt_hash, write_transcript, RecordingProvider, ReplayProvider, TranscriptRecord,
    UnknownPromptPolicy,
};
pub use schema::{ResponseDictionary, ResponseElement, ResponseSchema, ValueKind};
pub use template::{render_prompt, PromptTemplate, CONCEPT_PLACEHOLDER};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("invalid template: {0}")]
    Template(String),
    #[error("invalid response schema: {0}")]
    InvalidSchema(String),
    #[error("could not parse response: {message}")]
    Parse { message: String, raw: String },
    #[error("response key '{0}' is not in the dictionary")]
    KeyUnmapped(String),
    #[error("accounting error: {0}")]
    Accounting(String),
    #[error("transcript line {line}: {message}")]
    Transcript { line: usize, message: String },
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("budget exhausted; request not sent")]
    BudgetExhausted,
}

impl GatewayError {
    pub fn kind(&self) -> &'static str {
        match self {
            GatewayError::Template(_) => "TemplateError",
            GatewayError::InvalidSchema(_) => "InvalidSchema",
            GatewayError::Parse { .. } => "ParseError",
            GatewayError::KeyUnmapped(_) => "KeyUnmapped",
            GatewayError::Accounting(_) => "AccountingError",
            GatewayError::Transcript { .. } => "TranscriptError",
            GatewayError::Provider(ProviderError::UnknownPrompt { .. }) => "UnknownPrompt",
            GatewayError::Provider(ProviderError::Transient { .. }) => "ProviderTransient",
            GatewayError::Provider(ProviderError::Fatal { .. }) => "ProviderError",
            GatewayError::BudgetExhausted => "BudgetExhausted",
        }
    }
}
