use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::gateway::{CompletionRequest, LlmGateway, EXTRACTION_TEMPERATURE};
use crate::generation::{check_slots, fill_slots, render_knowledge_block};
use crate::knowledge::KnowledgeBundle;

pub const JUDGE_MARKER: &str = "### ANSWER EVALUATION";

const SLOTS: [&str; 3] = ["{question}", "{knowledge}", "{answer}"];

/// Judge rubric with `{question}`, `{knowledge}` and `{answer}` slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgeRubric {
    template: String,
}

impl JudgeRubric {
    pub fn new(template: impl Into<String>) -> Result<Self, EvalError> {
        let template = template.into();
        check_slots(&template, &SLOTS).map_err(EvalError::Rubric)?;
        Ok(Self { template })
    }

    pub fn render(&self, question: &str, answer: &str, bundle: &KnowledgeBundle) -> String {
        let knowledge = render_knowledge_block(bundle);
        fill_slots(&self.template, &[("{question}", question), ("{knowledge}", &knowledge), ("{answer}", answer)])
    }
}

impl Default for JudgeRubric {
    fn default() -> Self {
        Self::new(include_str!("../../assets/judge_rubric.txt")).expect("shipped rubric is valid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub score: f64,
    pub rationale: String,
}

static SCORE_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\bscore\s*[:=]?\s*(\d+(?:\.\d+)?)(?:\s*/\s*5)?").unwrap());
static BARE_NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*(\d+(?:\.\d+)?)\s*(?:/\s*5)?\s*$").unwrap());

fn parse_verdict(raw: &str) -> Option<JudgeVerdict> {
    let first_line = raw.lines().next().unwrap_or("");
    let (score, rationale) = if let Some(c) = SCORE_LINE.captures(raw) {
        let whole = c.get(0).unwrap();
        let rationale = format!("{}{}", &raw[..whole.start()], &raw[whole.end()..]);
        (c[1].parse::<f64>().ok()?, rationale)
    } else if let Some(c) = BARE_NUMBER.captures(first_line) {
        (c[1].parse::<f64>().ok()?, raw.lines().skip(1).collect::<Vec<_>>().join("\n"))
    } else {
        return None;
    };
    (1.0..=5.0).contains(&score).then(|| JudgeVerdict { score, rationale: rationale.trim().to_string() })
}

/// Scores an answer from 1 to 5 with the judge rubric. A reply without a
/// usable score is re-prompted once, then reported as
/// [`EvalError::JudgeMalformed`].
pub fn ai_judge(
    question: &str,
    answer: &str,
    bundle: &KnowledgeBundle,
    gateway: &dyn LlmGateway,
    rubric: &JudgeRubric,
) -> Result<JudgeVerdict, EvalError> {
    let prompt = rubric.render(question, answer, bundle);
    let first = gateway.complete(&CompletionRequest::new(&prompt, EXTRACTION_TEMPERATURE))?;
    if let Some(v) = parse_verdict(&first.text) {
        return Ok(v);
    }
    let again = format!("{prompt}\n\nYour previous reply had no score. Start your reply with \"Score: N\" where N is 1 to 5.");
    let second = gateway.complete(&CompletionRequest::new(again, EXTRACTION_TEMPERATURE))?;
    parse_verdict(&second.text).ok_or(EvalError::JudgeMalformed { raw: second.text })
}
