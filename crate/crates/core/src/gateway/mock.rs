use std::fmt;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use super::{Completion, CompletionRequest, GatewayError, LlmGateway, TokenUsage};

type ReplyFn = Arc<dyn Fn(&str) -> String + Send + Sync>;

#[derive(Clone)]
pub enum MockReply {
    Text(String),
    /// Response computed from the full prompt.
    Dynamic(ReplyFn),
    /// Simulates an unreachable endpoint.
    Unavailable,
}

impl MockReply {
    pub fn dynamic(f: impl Fn(&str) -> String + Send + Sync + 'static) -> Self {
        MockReply::Dynamic(Arc::new(f))
    }
}

impl fmt::Debug for MockReply {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MockReply::Text(t) => f.debug_tuple("Text").field(t).finish(),
            MockReply::Dynamic(_) => f.write_str("Dynamic(..)"),
            MockReply::Unavailable => f.write_str("Unavailable"),
        }
    }
}

impl From<&str> for MockReply {
    fn from(s: &str) -> Self {
        MockReply::Text(s.to_string())
    }
}

impl From<String> for MockReply {
    fn from(s: String) -> Self {
        MockReply::Text(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockCall {
    pub prompt: String,
    pub temperature: f32,
    pub response: Option<String>,
}

/// Deterministic scripted backend: the first rule whose substring occurs in
/// the prompt answers, else the default. Every call is recorded.
#[derive(Debug)]
pub struct MockGateway {
    rules: Vec<(String, MockReply)>,
    default: MockReply,
    calls: Mutex<Vec<MockCall>>,
}

impl MockGateway {
    pub fn new(default: impl Into<MockReply>) -> Self {
        Self { rules: Vec::new(), default: default.into(), calls: Mutex::new(Vec::new()) }
    }

    /// Builds a mock from an ordered `(substring, response)` script.
    pub fn from_script<I, K, V>(script: I, default: impl Into<MockReply>) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<MockReply>,
    {
        script
            .into_iter()
            .fold(Self::new(default), |m, (k, v)| m.with_rule(k, v))
    }

    pub fn with_rule(mut self, substring: impl Into<String>, reply: impl Into<MockReply>) -> Self {
        self.rules.push((substring.into(), reply.into()));
        self
    }

    pub fn calls(&self) -> Vec<MockCall> {
        self.calls.lock().unwrap().clone()
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().unwrap().len()
    }

    fn pick(&self, prompt: &str) -> &MockReply {
        self.rules
            .iter()
            .find(|(needle, _)| prompt.contains(needle.as_str()))
            .map_or(&self.default, |(_, reply)| reply)
    }
}

impl LlmGateway for MockGateway {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, GatewayError> {
        if request.prompt.is_empty() {
            return Err(GatewayError::EmptyPrompt);
        }
        let response = match self.pick(&request.prompt) {
            MockReply::Text(t) => Some(t.clone()),
            MockReply::Dynamic(f) => Some(f(&request.prompt)),
            MockReply::Unavailable => None,
        };
        self.calls.lock().unwrap().push(MockCall {
            prompt: request.prompt.clone(),
            temperature: request.temperature,
            response: response.clone(),
        });
        match response {
            Some(text) => Ok(Completion {
                usage: TokenUsage {
                    prompt_tokens: request.prompt.split_whitespace().count() as u64,
                    completion_tokens: text.split_whitespace().count() as u64,
                },
                text,
                latency: Duration::ZERO,
                attempts: Vec::new(),
            }),
            None => Err(GatewayError::Transport {
                message: "mock endpoint unavailable".into(),
                attempts: Vec::new(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ask(g: &MockGateway, p: &str) -> Result<String, GatewayError> {
        g.complete(&CompletionRequest::new(p, 0.0)).map(|c| c.text)
    }

    #[test]
    fn table_lookup() {
        let g = MockGateway::from_script([("ping", "pong")], "default");
        assert_eq!(ask(&g, "ping").unwrap(), "pong");
    }

    #[test]
    fn substring_rule_and_default() {
        let g = MockGateway::new("no idea").with_rule("sweetness", "[P1] use NIR");
        assert_eq!(ask(&g, "what about sweetness in apples").unwrap(), "[P1] use NIR");
        assert_eq!(ask(&g, "firmness").unwrap(), "no idea");
    }

    #[test]
    fn first_matching_rule_wins() {
        let g = MockGateway::new("d").with_rule("a", "first").with_rule("ab", "second");
        assert_eq!(ask(&g, "ab").unwrap(), "first");
    }

    #[test]
    fn call_log_in_order() {
        let g = MockGateway::new("x");
        for p in ["one", "two", "three"] {
            ask(&g, p).unwrap();
        }
        let prompts: Vec<_> = g.calls().into_iter().map(|c| c.prompt).collect();
        assert_eq!(prompts, ["one", "two", "three"]);
    }

    #[test]
    fn identical_scripts_identical_transcripts() {
        let run = || {
            let g = MockGateway::new("d").with_rule("k", MockReply::dynamic(|p| p.to_uppercase()));
            for p in ["k1", "z", "k2"] {
                ask(&g, p).unwrap();
            }
            g.calls()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn unavailable_reply_is_transport_error() {
        let g = MockGateway::new(MockReply::Unavailable);
        assert!(matches!(ask(&g, "x"), Err(GatewayError::Transport { .. })));
        assert_eq!(ask(&g, ""), Err(GatewayError::EmptyPrompt));
    }
}
