use std::sync::{Arc, Mutex};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::{
    AttemptRecord, Clock, Completion, CompletionRequest, GatewayConfig, GatewayError, LlmGateway,
    RateLimiter, SystemClock, TokenUsage,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

/// Raw POST of a JSON body. `Err` means no HTTP status was obtained
/// (connection refused, timeout, reset).
pub trait HttpTransport: Send + Sync {
    fn post_json(&self, url: &str, bearer: &str, body: &str) -> Result<HttpReply, String>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        Self { agent: config.into() }
    }
}

impl HttpTransport for UreqTransport {
    fn post_json(&self, url: &str, bearer: &str, body: &str) -> Result<HttpReply, String> {
        let mut request = self.agent.post(url).header("Content-Type", "application/json");
        if !bearer.is_empty() {
            request = request.header("Authorization", &format!("Bearer {bearer}"));
        }
        let mut response = request.send(body).map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let body = response.body_mut().read_to_string().map_err(|e| e.to_string())?;
        Ok(HttpReply { status, body })
    }
}

/// Exponential backoff: attempt `i` (0-based) that fails is followed by a
/// wait of `base * factor^i * (1 + jitter * u)`, `u` uniform in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backoff {
    pub base: Duration,
    pub factor: f64,
    pub jitter: f64,
    pub seed: u64,
}

impl Default for Backoff {
    fn default() -> Self {
        Self { base: Duration::from_secs(1), factor: 2.0, jitter: 0.25, seed: 0x5eed }
    }
}

impl Backoff {
    pub fn nominal(&self, attempt: u32) -> Duration {
        self.base.mul_f64(self.factor.powi(attempt as i32))
    }
}

pub struct HttpGateway {
    config: GatewayConfig,
    transport: Arc<dyn HttpTransport>,
    clock: Arc<dyn Clock>,
    limiter: RateLimiter,
    backoff: Backoff,
    rng: Mutex<ChaCha8Rng>,
}

impl HttpGateway {
    pub fn new(config: GatewayConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        let transport = Arc::new(UreqTransport::new(config.timeout()));
        Self::with_parts(config, transport, Arc::new(SystemClock::new()), Backoff::default())
    }

    pub fn with_parts(
        config: GatewayConfig,
        transport: Arc<dyn HttpTransport>,
        clock: Arc<dyn Clock>,
        backoff: Backoff,
    ) -> Result<Self, GatewayError> {
        config.validate()?;
        Ok(Self {
            limiter: RateLimiter::per_minute(config.rate_limit),
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(backoff.seed)),
            config,
            transport,
            clock,
            backoff,
        })
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn limiter(&self) -> &RateLimiter {
        &self.limiter
    }

    fn backoff_delay(&self, attempt: u32) -> Duration {
        let u: f64 = self.rng.lock().unwrap().random();
        self.backoff.nominal(attempt).mul_f64(1.0 + self.backoff.jitter * u)
    }

    fn request_body(&self, request: &CompletionRequest) -> String {
        json!({
            "model": self.config.model_name,
            "messages": [{ "role": "user", "content": request.prompt }],
            "temperature": request.temperature,
        })
        .to_string()
    }
}

fn parse_completion(body: &str) -> Result<(String, TokenUsage), GatewayError> {
    let value: Value =
        serde_json::from_str(body).map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
    let text = value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| GatewayError::MalformedResponse("missing choices[0].message.content".into()))?;
    let count = |key: &str| value.pointer(&format!("/usage/{key}")).and_then(Value::as_u64).unwrap_or(0);
    let usage = TokenUsage {
        prompt_tokens: count("prompt_tokens"),
        completion_tokens: count("completion_tokens"),
    };
    Ok((text.to_string(), usage))
}

fn retryable(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

impl LlmGateway for HttpGateway {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, GatewayError> {
        if request.prompt.is_empty() {
            return Err(GatewayError::EmptyPrompt);
        }
        let url = self.config.completions_url();
        let body = self.request_body(request);
        let mut attempts: Vec<AttemptRecord> = Vec::new();
        let started = self.clock.now();

        for attempt in 0..=self.config.max_retries {
            self.limiter.acquire(self.clock.as_ref());
            let outcome = self.transport.post_json(&url, &self.config.api_key, &body);
            let failure = match outcome {
                Ok(reply) if (200..300).contains(&reply.status) => {
                    attempts.push(AttemptRecord {
                        attempt,
                        outcome: format!("http {}", reply.status),
                        backoff: None,
                    });
                    let (text, usage) = parse_completion(&reply.body)?;
                    return Ok(Completion {
                        text,
                        usage,
                        latency: self.clock.now().saturating_sub(started),
                        attempts,
                    });
                }
                Ok(reply) if !retryable(reply.status) => {
                    attempts.push(AttemptRecord {
                        attempt,
                        outcome: format!("http {}", reply.status),
                        backoff: None,
                    });
                    return Err(GatewayError::Rejected {
                        status: reply.status,
                        body: reply.body,
                        attempts,
                    });
                }
                Ok(reply) => format!("http {}", reply.status),
                Err(e) => format!("transport: {e}"),
            };

            let backoff = (attempt < self.config.max_retries).then(|| self.backoff_delay(attempt));
            attempts.push(AttemptRecord { attempt, outcome: failure, backoff });
            if let Some(wait) = backoff {
                self.clock.sleep(wait);
            }
        }

        let message = attempts.last().map(|a| a.outcome.clone()).unwrap_or_default();
        Err(GatewayError::Transport { message, attempts })
    }
}
