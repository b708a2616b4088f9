use std::sync::Arc;

use serde::Deserialize;

use super::{classify_task, EntityExtractor, ExtractionError, ParsedQuestion, QuestionObjective};
use crate::gateway::{CompletionRequest, LlmGateway, EXTRACTION_TEMPERATURE};
use crate::textproc::canonical_label;

/// First line of the shipped extraction prompt; scripted backends key on it.
pub const EXTRACTION_MARKER: &str = "### ENTITY EXTRACTION";

const QUESTION_SLOT: &str = "{question}";

/// Extraction prompt template with exactly one `{question}` slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionPrompt {
    template: String,
}

impl ExtractionPrompt {
    pub fn new(template: impl Into<String>) -> Result<Self, String> {
        let template = template.into();
        match template.matches(QUESTION_SLOT).count() {
            1 => Ok(Self { template }),
            n => Err(format!("extraction template needs exactly one {QUESTION_SLOT} slot, found {n}")),
        }
    }

    /// Newlines in the question are flattened so it stays on the slot's line.
    pub fn render(&self, question: &str) -> String {
        let flat = question.split_whitespace().collect::<Vec<_>>().join(" ");
        self.template.replace(QUESTION_SLOT, &flat)
    }
}

impl Default for ExtractionPrompt {
    fn default() -> Self {
        Self::new(include_str!("../../assets/extraction_prompt.txt")).expect("shipped template is valid")
    }
}

#[derive(Debug, Deserialize)]
struct ModelEntities {
    research_object: String,
    #[serde(default)]
    measured_property: Option<String>,
    #[serde(default)]
    spectral_method: Option<String>,
    #[serde(default)]
    question_objective: Option<String>,
}

/// Pulls the outermost `{...}` out of a reply that may carry code fences or
/// prose around the JSON.
fn json_object(raw: &str) -> Option<&str> {
    let start = raw.find('{')?;
    let end = raw.rfind('}')?;
    (end > start).then(|| &raw[start..=end])
}

pub(crate) fn parse_model_reply(raw: &str, question: &str) -> Result<ParsedQuestion, String> {
    let body = json_object(raw).ok_or("no JSON object in reply")?;
    let e: ModelEntities = serde_json::from_str(body).map_err(|e| e.to_string())?;
    let objective = match e.question_objective.as_deref().map(str::trim) {
        None | Some("") | Some("null") | Some("none") => None,
        Some(o) => Some(o.parse::<QuestionObjective>()?),
    };
    ParsedQuestion::new(
        e.research_object,
        e.measured_property,
        e.spectral_method.map(|m| canonical_label(&m)),
        objective,
        classify_task(objective),
        question,
    )
}

/// Model-backed extractor. One repair re-prompt is made before giving up
/// with [`ExtractionError::Malformed`].
pub struct LlmExtractor {
    gateway: Arc<dyn LlmGateway>,
    prompt: ExtractionPrompt,
}

impl LlmExtractor {
    pub fn new(gateway: Arc<dyn LlmGateway>) -> Self {
        Self { gateway, prompt: ExtractionPrompt::default() }
    }

    pub fn with_prompt(mut self, prompt: ExtractionPrompt) -> Self {
        self.prompt = prompt;
        self
    }
}

impl EntityExtractor for LlmExtractor {
    fn extract(&self, question: &str) -> Result<ParsedQuestion, ExtractionError> {
        if question.trim().is_empty() {
            return Err(ExtractionError::EmptyQuestion);
        }
        let prompt = self.prompt.render(question);
        let first = self.gateway.complete(&CompletionRequest::new(&prompt, EXTRACTION_TEMPERATURE))?;
        let reason = match parse_model_reply(&first.text, question) {
            Ok(p) => return Ok(p),
            Err(reason) => reason,
        };

        let repair = format!(
            "{prompt}\n\nYour previous reply could not be used ({reason}). \
             Reply again with only the JSON object."
        );
        let second = self.gateway.complete(&CompletionRequest::new(repair, EXTRACTION_TEMPERATURE))?;
        parse_model_reply(&second.text, question)
            .map_err(|reason| ExtractionError::Malformed { raw: second.text, reason })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{MockGateway, MockReply};
    use crate::qparse::TaskIndicator;

    const GOOD: &str = r#"```json
{"research_object": "apples", "measured_property": "sweetness", "spectral_method": "near infrared", "question_objective": "preprocessing"}
```"#;

    #[test]
    fn template_slot_count_checked() {
        assert!(ExtractionPrompt::new("no slot").is_err());
        assert!(ExtractionPrompt::new("{question} {question}").is_err());
        assert_eq!(ExtractionPrompt::new("Q: {question}").unwrap().render("a\nb"), "Q: a b");
        assert!(ExtractionPrompt::default().render("x").starts_with(EXTRACTION_MARKER));
    }

    #[test]
    fn parses_fenced_json() {
        let g = Arc::new(MockGateway::new(GOOD));
        let p = LlmExtractor::new(g.clone()).extract("which preprocessing for NIR on apples?").unwrap();
        assert_eq!(p.spectral_method(), Some("NIR"));
        assert_eq!(p.task(), TaskIndicator::ChemometricsWorkflow);
        assert_eq!(g.call_count(), 1);
        assert_eq!(g.calls()[0].temperature, 0.0);
    }

    #[test]
    fn repairs_once_then_succeeds() {
        let g = Arc::new(MockGateway::new("garbage").with_rule("could not be used", GOOD));
        let p = LlmExtractor::new(g.clone()).extract("q").unwrap();
        assert_eq!(p.research_object(), "apples");
        assert_eq!(g.call_count(), 2);
    }

    #[test]
    fn malformed_after_repair() {
        let g = Arc::new(MockGateway::new("I think it is apples"));
        let err = LlmExtractor::new(g.clone()).extract("q").unwrap_err();
        assert!(matches!(err, ExtractionError::Malformed { ref raw, .. } if raw == "I think it is apples"));
        assert_eq!(g.call_count(), 2);
    }

    #[test]
    fn invariant_violation_counts_as_malformed() {
        let g = Arc::new(MockGateway::new(r#"{"research_object":"apples","question_objective":"model"}"#));
        assert!(matches!(
            LlmExtractor::new(g).extract("q"),
            Err(ExtractionError::Malformed { .. })
        ));
    }

    #[test]
    fn transport_failure_surfaces() {
        let g = Arc::new(MockGateway::new(MockReply::Unavailable));
        assert!(matches!(LlmExtractor::new(g).extract("q"), Err(ExtractionError::Gateway(_))));
    }
}
