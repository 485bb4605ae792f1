use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::ledger::{SharedLedger, TokenUsage};
use super::GatewayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Capabilities {
    pub structured_output: bool,
}

impl Capabilities {
    pub fn structured() -> Self {
        Capabilities {
            structured_output: true,
        }
    }

    pub fn plain_text() -> Self {
        Capabilities {
            structured_output: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestOptions {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Index of a repeated request for the same prompt (are-you-sure
    /// repeats). Each sample is an independent request.
    #[serde(default)]
    pub sample: u32,
}

impl RequestOptions {
    pub fn new(model: impl Into<String>) -> Self {
        RequestOptions {
            model: model.into(),
            temperature: 0.0,
            max_tokens: 1024,
            sample: 0,
        }
    }

    pub fn with_sample(&self, sample: u32) -> Self {
        RequestOptions {
            sample,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderResponse {
    pub raw: String,
    pub usage: TokenUsage,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    /// Worth retrying. Tokens may already have been consumed.
    #[error("transient provider failure: {message}")]
    Transient { message: String, usage: TokenUsage },
    #[error("provider failure: {message}")]
    Fatal { message: String },
    #[error("no recorded response for prompt {hash}")]
    UnknownPrompt { hash: String },
}

/// A text-completion backend.
pub trait Provider: Send + Sync {
    fn capabilities(&self) -> Capabilities;
    fn send(&self, prompt: &str, options: &RequestOptions) -> Result<ProviderResponse, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    #[serde(with = "millis")]
    pub base_delay: Duration,
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(200),
        }
    }
}

impl RetryPolicy {
    pub fn immediate(max_attempts: u32) -> Self {
        RetryPolicy {
            max_attempts,
            base_delay: Duration::ZERO,
        }
    }

    /// Delay before attempt `n` (1-based); doubles each time.
    pub fn delay_before(&self, attempt: u32) -> Duration {
        if attempt <= 1 {
            Duration::ZERO
        } else {
            self.base_delay * 2u32.saturating_pow(attempt - 2)
        }
    }
}

/// Provider plus the run's ledger. Every attempt's usage is billed,
/// including failed attempts, and no request is dispatched once the
/// ledger has been killed.
#[derive(Clone)]
pub struct Gateway {
    provider: Arc<dyn Provider>,
    ledger: SharedLedger,
    options: RequestOptions,
    retry: RetryPolicy,
    calls: Arc<AtomicUsize>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("options", &self.options)
            .field("retry", &self.retry)
            .field("calls", &self.calls())
            .finish()
    }
}

impl Gateway {
    pub fn new(provider: Arc<dyn Provider>, ledger: SharedLedger, options: RequestOptions, retry: RetryPolicy) -> Self {
        Gateway {
            provider,
            ledger,
            options,
            retry,
            calls: Arc::new(AtomicUsize::new(0)),
        }
    }

    pub fn capabilities(&self) -> Capabilities {
        self.provider.capabilities()
    }

    pub fn ledger(&self) -> &SharedLedger {
        &self.ledger
    }

    pub fn options(&self) -> &RequestOptions {
        &self.options
    }

    /// Provider invocations made through this gateway, retries included.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn request(&self, prompt: &str, sample: u32) -> Result<ProviderResponse, GatewayError> {
        let options = self.options.with_sample(sample);
        let mut attempt = 0;
        loop {
            attempt += 1;
            if self.ledger.is_killed() {
                return Err(GatewayError::BudgetExhausted);
            }
            let delay = self.retry.delay_before(attempt);
            if !delay.is_zero() {
                std::thread::sleep(delay);
            }
            self.calls.fetch_add(1, Ordering::SeqCst);
            match self.provider.send(prompt, &options) {
                Ok(resp) => {
                    self.ledger.record_usage_and_check_budget(resp.usage)?;
                    return Ok(resp);
                }
                Err(ProviderError::Transient { message, usage }) => {
                    self.ledger.record_usage_and_check_budget(usage)?;
                    if attempt >= self.retry.max_attempts {
                        return Err(GatewayError::Provider(ProviderError::Transient { message, usage }));
                    }
                    log::debug!("transient provider failure (attempt {attempt}): {message}");
                }
                Err(e) => return Err(GatewayError::Provider(e)),
            }
        }
    }
}
