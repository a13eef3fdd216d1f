//! Chat-completion transport and a deterministic offline stand-in.

mod http;
mod mock;

use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use http::HttpCompleter;
pub use mock::MockCompleter;

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("provider rejected credentials (HTTP {0})")]
    Auth(u16),
    #[error("environment variable `{0}` with the API token is not set")]
    MissingToken(String),
    #[error("rate limited after {0} attempts")]
    RateLimited(u32),
    #[error("request timed out after {0} attempts")]
    Timeout(u32),
    #[error("server error HTTP {status} after {attempts} attempts")]
    Server { status: u16, attempts: u32 },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid provider config: {0}")]
    InvalidConfig(String),
}

impl LlmError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Auth(_) | Self::MissingToken(_) => "AuthError",
            Self::RateLimited(_) => "RateLimited",
            Self::Timeout(_) => "Timeout",
            Self::Server { .. } => "ServerError",
            Self::MalformedResponse(_) => "MalformedResponse",
            Self::Transport(_) => "TransportError",
            Self::InvalidRequest(_) => "InvalidRequest",
            Self::InvalidConfig(_) => "InvalidConfig",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub system_prompt: String,
    pub user_prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(with = "millis")]
    pub timeout: Duration,
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

impl CompletionRequest {
    pub fn new(system_prompt: impl Into<String>, user_prompt: impl Into<String>) -> Self {
        Self {
            system_prompt: system_prompt.into(),
            user_prompt: user_prompt.into(),
            temperature: 0.0,
            max_tokens: 1024,
            timeout: Duration::from_secs(60),
        }
    }

    pub fn with_max_tokens(mut self, n: u32) -> Self {
        self.max_tokens = n;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.system_prompt.trim().is_empty() || self.user_prompt.trim().is_empty() {
            return Err(LlmError::InvalidRequest("prompts must be non-empty".into()));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(LlmError::InvalidRequest(format!("temperature {} must be >= 0", self.temperature)));
        }
        if self.timeout.is_zero() {
            return Err(LlmError::InvalidRequest("timeout must be positive".into()));
        }
        Ok(())
    }
}

fn default_retries() -> u32 {
    3
}

fn default_backoff_ms() -> u64 {
    250
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token; no auth header when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_env: Option<String>,
    /// Extra attempts after the first on 5xx, 429 or timeout.
    #[serde(default = "default_retries")]
    pub retries: u32,
    /// Initial backoff, doubled after each retry.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        let url = reqwest::Url::parse(&self.endpoint)
            .map_err(|e| LlmError::InvalidConfig(format!("endpoint `{}`: {e}", self.endpoint)))?;
        if !matches!(url.scheme(), "http" | "https") || url.host().is_none() {
            return Err(LlmError::InvalidConfig(format!("endpoint `{}` must be an http(s) URL", self.endpoint)));
        }
        if self.model.trim().is_empty() {
            return Err(LlmError::InvalidConfig("model is empty".into()));
        }
        Ok(())
    }
}

/// Anything that turns a prompt pair into response text.
pub trait Completer: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError>;

    fn name(&self) -> String;
}

/// One-shot call through a provider.
pub fn complete(config: &ProviderConfig, request: &CompletionRequest) -> Result<String, LlmError> {
    HttpCompleter::new(config.clone())?.complete(request)
}

/// Deterministic offline response for `(seed, request)`.
pub fn mock_complete(seed: u64, request: &CompletionRequest) -> String {
    MockCompleter::new(seed).respond(request)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_validation() {
        assert!(CompletionRequest::new("s", "u").validate().is_ok());
        assert!(CompletionRequest::new("", "u").validate().is_err());
        assert!(CompletionRequest::new("s", "u").with_timeout(Duration::ZERO).validate().is_err());
        assert!(CompletionRequest::new("s", "u").with_temperature(-1.0).validate().is_err());
    }

    #[test]
    fn provider_validation() {
        let mut c: ProviderConfig =
            serde_json::from_str(r#"{"endpoint":"http://localhost:8080/v1/chat/completions","model":"m"}"#).unwrap();
        assert_eq!((c.retries, c.backoff_ms), (3, 250));
        c.validate().unwrap();
        c.endpoint = "not a url".into();
        assert!(c.validate().is_err());
        c.endpoint = "ftp://host/x".into();
        assert!(c.validate().is_err());
    }
}
