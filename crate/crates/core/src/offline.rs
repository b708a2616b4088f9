//! Deterministic stand-in for a language model, used by `--mock`, the demo
//! server mode and the end-to-end tests. It dispatches on the first line of
//! each shipped prompt and answers from the prompt's own content.

use serde_json::json;

use crate::evalkit::JUDGE_MARKER;
use crate::gateway::{MockGateway, MockReply};
use crate::generation::GENERATION_MARKER;
use crate::ift::{IFT_ANSWER_MARKER, IFT_PARAPHRASE_MARKER};
use crate::qparse::{rule_based_extract, EXTRACTION_MARKER};

/// Reply used for prompts that carry no known marker.
pub const OFFLINE_FALLBACK: &str = "No answer is available offline.";

/// How many knowledge lines the grounded answer draws on.
const ANSWER_LINES: usize = 3;

fn field<'a>(prompt: &'a str, prefix: &str) -> Option<&'a str> {
    prompt.lines().find_map(|l| l.strip_prefix(prefix)).map(str::trim)
}

fn extraction_reply(prompt: &str) -> String {
    let question = field(prompt, "Question:").unwrap_or("");
    match rule_based_extract(question) {
        Some(p) => json!({
            "research_object": p.research_object(),
            "measured_property": p.measured_property(),
            "spectral_method": p.spectral_method(),
            "question_objective": p.question_objective().map(|o| o.as_str()),
        })
        .to_string(),
        None => "The question does not name a research object.".into(),
    }
}

/// Splits `[id] (field): text` into its parts.
fn knowledge_line(line: &str) -> Option<(&str, &str, &str)> {
    let rest = line.strip_prefix('[')?;
    let (id, rest) = rest.split_once("] (")?;
    let (field, text) = rest.split_once("): ")?;
    Some((id, field, text))
}

fn grounded_reply(prompt: &str) -> String {
    let lines: Vec<(&str, &str, &str)> = prompt.lines().filter_map(knowledge_line).take(ANSWER_LINES).collect();
    if lines.is_empty() {
        return "No supporting literature was found.".into();
    }
    lines
        .iter()
        .map(|(id, field, text)| match *field {
            "spectral_methods" => format!("Related studies show that {text} has been applied [{id}]."),
            "outcome_summary" => format!("One study reports that {text} [{id}]."),
            "preprocessing_methods" => format!("Related studies show that the spectra were preprocessed with {text} [{id}]."),
            "feature_processing_methods" => format!("Related studies show that features were processed with {text} [{id}]."),
            "models" => format!("Related studies show that models such as {text} were used [{id}]."),
            "metrics_and_outcomes" => format!("Related studies report {text} [{id}]."),
            _ => format!("Related studies report: {text} [{id}]."),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn ift_reply(prompt: &str) -> String {
    let object = field(prompt, "Research object:").unwrap_or("the samples");
    let property = field(prompt, "Measured property:").unwrap_or("");
    let items: Vec<&str> = prompt.lines().filter_map(|l| l.strip_prefix("- ")).collect();
    let target = if property.is_empty() { object.to_string() } else { format!("{property} in {object}") };
    if items.iter().all(|i| i.contains(": ")) {
        format!("This study reported {} when predicting {target}.", items.join(", "))
    } else {
        format!("This study used {} to predict {target}.", items.join(", "))
    }
}

fn paraphrase_reply(prompt: &str) -> String {
    let question = field(prompt, "Question:").unwrap_or("");
    match question.strip_prefix("For research on ") {
        Some(rest) => format!("In studies of {rest}"),
        None => question.to_string(),
    }
}

pub fn offline_reply(prompt: &str) -> String {
    let first = prompt.lines().next().unwrap_or("").trim();
    match first {
        EXTRACTION_MARKER => extraction_reply(prompt),
        GENERATION_MARKER => grounded_reply(prompt),
        IFT_ANSWER_MARKER => ift_reply(prompt),
        IFT_PARAPHRASE_MARKER => paraphrase_reply(prompt),
        JUDGE_MARKER => "Score: 4\nThe answer is grounded in the cited knowledge.".into(),
        _ => OFFLINE_FALLBACK.into(),
    }
}

pub fn offline_gateway() -> MockGateway {
    MockGateway::new(MockReply::dynamic(offline_reply))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qparse::{EntityExtractor, LlmExtractor, QuestionObjective};
    use std::sync::Arc;

    #[test]
    fn extraction_through_llm_path() {
        let ex = LlmExtractor::new(Arc::new(offline_gateway()));
        let p = ex.extract("detection of protein in wheat using Raman spectroscopy, which model performs best?").unwrap();
        assert_eq!(p.research_object(), "wheat");
        assert_eq!(p.question_objective(), Some(QuestionObjective::Model));
    }

    #[test]
    fn grounded_answer_cites_lines() {
        let prompt = format!("{GENERATION_MARKER}\nstuff\n[P1] (models): PLS; SVM\n[P2] (models): RF\nQuestion: q");
        assert_eq!(
            offline_reply(&prompt),
            "Related studies show that models such as PLS; SVM were used [P1]. Related studies show that models such as RF were used [P2]."
        );
    }

    #[test]
    fn ift_answer_lists_items() {
        let prompt = format!("{IFT_ANSWER_MARKER}\nResearch object: apples\nMeasured property: sweetness\n- SNV\n- MSC\n");
        assert_eq!(offline_reply(&prompt), "This study used SNV, MSC to predict sweetness in apples.");
    }

    #[test]
    fn unknown_prompt() {
        assert_eq!(offline_reply("ping"), OFFLINE_FALLBACK);
    }
}
