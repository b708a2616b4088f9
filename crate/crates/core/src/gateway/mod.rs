//! Every model call goes through an [`LlmGateway`]: either [`HttpGateway`]
//! talking to an OpenAI-compatible `/chat/completions` endpoint, or the
//! scripted [`MockGateway`] used offline.

mod clock;
mod http;
mod mock;
mod ratelimit;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use clock::{Clock, SystemClock, VirtualClock};
pub use http::{Backoff, HttpGateway, HttpReply, HttpTransport, UreqTransport};
pub use mock::{MockCall, MockGateway, MockReply};
pub use ratelimit::RateLimiter;

/// Sampling temperature for entity extraction and judging.
pub const EXTRACTION_TEMPERATURE: f32 = 0.0;
/// Sampling temperature for answer generation.
pub const GENERATION_TEMPERATURE: f32 = 0.7;

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "SPECTRAQA_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f32,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, temperature: f32) -> Self {
        Self { prompt: prompt.into(), temperature }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// One dispatch of a request, successful or not.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttemptRecord {
    pub attempt: u32,
    pub outcome: String,
    /// Wait before the next attempt, when one follows.
    pub backoff: Option<Duration>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Completion {
    pub text: String,
    pub usage: TokenUsage,
    pub latency: Duration,
    pub attempts: Vec<AttemptRecord>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("transport failed after {} attempt(s): {message}", attempts.len())]
    Transport { message: String, attempts: Vec<AttemptRecord> },
    #[error("endpoint rejected request with status {status}: {body}")]
    Rejected { status: u16, body: String, attempts: Vec<AttemptRecord> },
    #[error("unreadable completion payload: {0}")]
    MalformedResponse(String),
    #[error("invalid gateway config: {0}")]
    Config(String),
}

impl GatewayError {
    pub fn attempts(&self) -> &[AttemptRecord] {
        match self {
            GatewayError::Transport { attempts, .. } | GatewayError::Rejected { attempts, .. } => {
                attempts
            }
            _ => &[],
        }
    }
}

pub trait LlmGateway: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, GatewayError>;
}

impl<G: LlmGateway + ?Sized> LlmGateway for std::sync::Arc<G> {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, GatewayError> {
        (**self).complete(request)
    }
}

fn default_timeout_secs() -> f64 {
    60.0
}
fn default_max_retries() -> u32 {
    3
}
fn default_rate_limit() -> u32 {
    60
}

/// Endpoint settings. The API key never comes from the config file; it is
/// read from [`API_KEY_ENV`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayConfig {
    pub base_url: String,
    pub model_name: String,
    #[serde(skip)]
    pub api_key: String,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    /// Requests per minute.
    #[serde(default = "default_rate_limit")]
    pub rate_limit: u32,
}

impl GatewayConfig {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_name: model_name.into(),
            api_key: String::new(),
            timeout_secs: default_timeout_secs(),
            max_retries: default_max_retries(),
            rate_limit: default_rate_limit(),
        }
    }

    /// Parses the `[gateway]` table (or a bare table) of a TOML document and
    /// validates it.
    pub fn from_toml(text: &str) -> Result<Self, GatewayError> {
        let value: toml::Table = text.parse().map_err(|e| GatewayError::Config(format!("{e}")))?;
        let table = match value.get("gateway") {
            Some(toml::Value::Table(t)) => t.clone(),
            _ => value,
        };
        let config: GatewayConfig =
            table.try_into().map_err(|e| GatewayError::Config(format!("{e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn with_api_key_from_env(mut self) -> Self {
        self.api_key = std::env::var(API_KEY_ENV).unwrap_or_default();
        self
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    pub fn completions_url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(GatewayError::Config("timeout must be > 0".into()));
        }
        if self.rate_limit == 0 {
            return Err(GatewayError::Config("rate_limit must be >= 1".into()));
        }
        if self.model_name.trim().is_empty() {
            return Err(GatewayError::Config("model_name is empty".into()));
        }
        let rest = self
            .base_url
            .strip_prefix("https://")
            .or_else(|| self.base_url.strip_prefix("http://"))
            .ok_or_else(|| GatewayError::Config(format!("base_url {:?} must be http(s)", self.base_url)))?;
        let host = rest.split('/').next().unwrap_or("");
        if host.is_empty() || host.contains(char::is_whitespace) {
            return Err(GatewayError::Config(format!("base_url {:?} has no host", self.base_url)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_from_toml() {
        let c = GatewayConfig::from_toml(
            "[gateway]\nbase_url = \"http://localhost:8000/v1/\"\nmodel_name = \"llama\"\n",
        )
        .unwrap();
        assert_eq!(c.timeout(), Duration::from_secs(60));
        assert_eq!(c.max_retries, 3);
        assert_eq!(c.rate_limit, 60);
        assert_eq!(c.completions_url(), "http://localhost:8000/v1/chat/completions");
    }

    #[test]
    fn config_rejects_bad_values() {
        let mut c = GatewayConfig::new("ftp://x", "m");
        assert!(c.validate().is_err());
        c.base_url = "http://".into();
        assert!(c.validate().is_err());
        c.base_url = "http://host".into();
        c.timeout_secs = 0.0;
        assert!(c.validate().is_err());
        c.timeout_secs = 5.0;
        c.rate_limit = 0;
        assert!(c.validate().is_err());
        c.rate_limit = 1;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn api_key_is_not_read_from_file() {
        let c = GatewayConfig::from_toml(
            "base_url = \"http://h\"\nmodel_name = \"m\"\napi_key = \"leaked\"\n",
        )
        .unwrap();
        assert_eq!(c.api_key, "");
    }
}
