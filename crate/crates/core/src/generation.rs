//! Grounded answer generation: renders the knowledge bundle into the answer
//! prompt, calls the gateway and keeps only citations that name a paper in the
//! bundle.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::PaperId;
use crate::gateway::{CompletionRequest, GatewayError, LlmGateway, GENERATION_TEMPERATURE};
use crate::knowledge::KnowledgeBundle;

/// First line of the shipped answer prompt.
pub const GENERATION_MARKER: &str = "### GROUNDED ANSWER";
/// Knowledge block used when the bundle has no snippets.
pub const NO_KNOWLEDGE_MARKER: &str = "NO RETRIEVED KNOWLEDGE";
pub const DEFAULT_NO_KNOWLEDGE_ANSWER: &str =
    "No supporting literature was found in the labeled corpus for this question, so no grounded answer can be given.";

const SLOTS: [&str; 3] = ["{question}", "{knowledge_block}", "{style_instructions}"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerationError {
    #[error("prompt template: {0}")]
    Template(String),
    #[error("answer cites no paper from the knowledge bundle: {raw:?}")]
    CitationMissing { raw: String },
    #[error("generation gateway failed: {0}")]
    Gateway(#[from] GatewayError),
}

/// Fills `{name}` slots in a single left-to-right pass, so slot-like text in
/// substituted values is never expanded.
pub(crate) fn fill_slots(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    'scan: while let Some(pos) = rest.find('{') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        for (slot, value) in values {
            if tail.starts_with(slot) {
                out.push_str(value);
                rest = &tail[slot.len()..];
                continue 'scan;
            }
        }
        out.push('{');
        rest = &tail[1..];
    }
    out.push_str(rest);
    out
}

pub(crate) fn check_slots(template: &str, slots: &[&str]) -> Result<(), String> {
    for slot in slots {
        let n = template.matches(slot).count();
        if n != 1 {
            return Err(format!("slot {slot} must appear exactly once, found {n}"));
        }
    }
    Ok(())
}

/// Escapes `\`, `[`, `]` and line breaks so one snippet is one line and
/// bracket tags in the block are always citation tags.
pub fn escape_snippet_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '[' => out.push_str("\\["),
            ']' => out.push_str("\\]"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

/// One `[paper_id] (field): text` line per snippet, in bundle order.
pub fn render_knowledge_block(bundle: &KnowledgeBundle) -> String {
    if bundle.is_empty() {
        return NO_KNOWLEDGE_MARKER.to_string();
    }
    bundle
        .snippets
        .iter()
        .map(|s| format!("[{}] ({}): {}", s.paper_id, s.field_of_origin.as_str(), escape_snippet_text(&s.text)))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Hex SHA-256 of the bundle's JSON form.
pub fn bundle_fingerprint(bundle: &KnowledgeBundle) -> String {
    let bytes = serde_json::to_vec(bundle).expect("bundle serializes");
    hex::encode(Sha256::digest(bytes))
}

/// Answer prompt template plus the style text and the no-knowledge answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBuilder {
    template: String,
    style: String,
    no_knowledge_answer: String,
}

impl Default for PromptBuilder {
    fn default() -> Self {
        Self::new(
            include_str!("../assets/generation_prompt.txt"),
            include_str!("../assets/style_instructions.txt"),
        )
        .expect("shipped template is valid")
    }
}

impl PromptBuilder {
    pub fn new(template: impl Into<String>, style: impl Into<String>) -> Result<Self, GenerationError> {
        let template = template.into();
        check_slots(&template, &SLOTS).map_err(GenerationError::Template)?;
        Ok(Self {
            template,
            style: style.into().trim_end().to_string(),
            no_knowledge_answer: DEFAULT_NO_KNOWLEDGE_ANSWER.to_string(),
        })
    }

    pub fn with_no_knowledge_answer(mut self, text: impl Into<String>) -> Self {
        self.no_knowledge_answer = text.into();
        self
    }

    pub fn no_knowledge_answer(&self) -> &str {
        &self.no_knowledge_answer
    }

    pub fn build_prompt(&self, question: &str, bundle: &KnowledgeBundle) -> RenderedPrompt {
        let block = render_knowledge_block(bundle);
        let flat_question = question.split_whitespace().collect::<Vec<_>>().join(" ");
        let text = fill_slots(
            &self.template,
            &[("{question}", &flat_question), ("{knowledge_block}", &block), ("{style_instructions}", &self.style)],
        );
        RenderedPrompt {
            text,
            allowed_ids: bundle.snippets.iter().map(|s| s.paper_id.clone()).collect(),
            bundle_fingerprint: bundle_fingerprint(bundle),
            no_knowledge_answer: bundle.is_empty().then(|| self.no_knowledge_answer.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RenderedPrompt {
    pub text: String,
    pub allowed_ids: BTreeSet<PaperId>,
    pub bundle_fingerprint: String,
    /// Set when the bundle was empty; the answer is then this text and the
    /// model is not called.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub no_knowledge_answer: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedAnswer {
    pub text: String,
    pub citations: Vec<PaperId>,
    pub bundle_fingerprint: String,
    pub gateway_calls: usize,
}

// escape pairs are consumed first so "\[" never opens a tag
static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\\.|\[([^\[\]\n\\]*)\]").unwrap());

fn tag_ids(inner: &str) -> Vec<PaperId> {
    inner.split([',', ';']).filter_map(|p| PaperId::new(p.trim()).ok()).collect()
}

/// Distinct ids in bracket tags, in order of first appearance. A tag may list
/// several ids separated by commas or semicolons.
pub fn parse_citations(text: &str) -> Vec<PaperId> {
    let mut seen = Vec::new();
    for inner in TAG.captures_iter(text).filter_map(|c| c.get(1)) {
        for id in tag_ids(inner.as_str()) {
            if !seen.contains(&id) {
                seen.push(id);
            }
        }
    }
    seen
}

/// Rewrites every tag whose ids all lie outside `allowed` to nothing and
/// drops unknown ids from mixed tags. Brackets that hold no id-like content
/// are left alone.
fn strip_foreign_tags(text: &str, allowed: &BTreeSet<PaperId>) -> String {
    let rewritten = TAG.replace_all(text, |c: &regex::Captures<'_>| {
        let ids = c.get(1).map(|m| tag_ids(m.as_str())).unwrap_or_default();
        if ids.is_empty() {
            return c[0].to_string();
        }
        let kept: Vec<&str> = ids.iter().filter(|i| allowed.contains(*i)).map(PaperId::as_str).collect();
        if kept.is_empty() {
            String::new()
        } else {
            format!("[{}]", kept.join(", "))
        }
    });
    // removing a tag can leave a doubled or dangling space
    let mut out = String::with_capacity(rewritten.len());
    for line in rewritten.split('\n') {
        if !out.is_empty() {
            out.push('\n');
        }
        let collapsed = line.split(' ').filter(|w| !w.is_empty()).collect::<Vec<_>>().join(" ");
        let fixed = collapsed.replace(" .", ".").replace(" ,", ",");
        out.push_str(&fixed);
    }
    out.trim().to_string()
}

fn accept(raw: &str, prompt: &RenderedPrompt) -> Option<(String, Vec<PaperId>)> {
    let citations: Vec<PaperId> =
        parse_citations(raw).into_iter().filter(|id| prompt.allowed_ids.contains(id)).collect();
    (!citations.is_empty()).then(|| (strip_foreign_tags(raw, &prompt.allowed_ids), citations))
}

/// Generates an answer for a rendered prompt. Citations are filtered to the
/// bundle's ids; an answer left with none gets one corrective retry before
/// [`GenerationError::CitationMissing`].
pub fn generate(prompt: &RenderedPrompt, gateway: &dyn LlmGateway) -> Result<GeneratedAnswer, GenerationError> {
    if let Some(text) = &prompt.no_knowledge_answer {
        return Ok(GeneratedAnswer {
            text: text.clone(),
            citations: Vec::new(),
            bundle_fingerprint: prompt.bundle_fingerprint.clone(),
            gateway_calls: 0,
        });
    }
    let done = |(text, citations): (String, Vec<PaperId>), calls| GeneratedAnswer {
        text,
        citations,
        bundle_fingerprint: prompt.bundle_fingerprint.clone(),
        gateway_calls: calls,
    };

    let first = gateway.complete(&CompletionRequest::new(&prompt.text, GENERATION_TEMPERATURE))?;
    if let Some(ok) = accept(&first.text, prompt) {
        return Ok(done(ok, 1));
    }

    let ids = prompt.allowed_ids.iter().map(|i| format!("[{i}]")).collect::<Vec<_>>().join(", ");
    let corrective = format!(
        "{}\n\nYour previous answer did not cite any paper from the knowledge list. \
         Answer again and tag each claim with one of: {ids}.",
        prompt.text
    );
    let second = gateway.complete(&CompletionRequest::new(corrective, GENERATION_TEMPERATURE))?;
    accept(&second.text, prompt)
        .map(|ok| done(ok, 2))
        .ok_or(GenerationError::CitationMissing { raw: second.text })
}
