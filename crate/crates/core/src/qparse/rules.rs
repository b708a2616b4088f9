//! Pattern library for the deterministic extractor.
//!
//! Order of application:
//! 1. object/property: "<verb> (of) X in|of Y" (prediction of, detect, ...),
//!    then the bare "X in Y" pattern;
//! 2. spectral method: known method names and aliases, then "Z spectroscopy";
//! 3. objective keywords, checked preprocessing → feature processing →
//!    model → metrics.

use std::sync::LazyLock;

use regex::Regex;

use super::{classify_task, EntityExtractor, ExtractionError, ParsedQuestion, QuestionObjective, TaskIndicator};
use crate::textproc::{canonical_label, spectral_method_aliases};

const OBJECT_TAIL: &str = r"(?P<obj>[a-z0-9][a-z0-9\- ]*?)(?:\s+(?:using|with|by|via|through|based|from|when|where|and|for|to|which|what|that|is|are)\b|\s*[,.;:?!]|\s*$)";

static TASK_PATTERN: LazyLock<Regex> = LazyLock::new(|| {
    let verbs = "prediction|predicting|predict|detection|detecting|detect|determination|determining|determine|\
                 estimation|estimating|estimate|measurement|measuring|measure|quantification|quantifying|quantify|\
                 assessment|assessing|assess|evaluation|evaluating|evaluate|monitoring|monitor|analysis|analyzing|\
                 analysing|analyze|analyse|identification|identifying|identify|classification|classifying|classify";
    Regex::new(&format!(
        r"\b(?:{verbs})\s+(?:of\s+)?(?:the\s+)?(?P<prop>[a-z0-9][a-z0-9\- ]*?)\s+(?:in|of)\s+(?:the\s+)?{OBJECT_TAIL}"
    ))
    .unwrap()
});

static BARE_PATTERN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(r"\b(?P<prop>[a-z][a-z0-9\-]*)\s+(?:in|of)\s+(?:the\s+)?{OBJECT_TAIL}")).unwrap()
});

/// Words that can precede "in"/"of" without being a property.
const NOT_A_PROPERTY: &[&str] = &[
    "used", "applied", "method", "methods", "technique", "techniques", "spectroscopy", "model", "models",
    "suitable", "useful", "interested", "research", "study", "studies", "work", "role", "kind", "type",
    "types", "one", "which", "what", "best", "most", "all", "each", "some", "any", "number", "list",
];

static METHOD_ALIAS_PATTERN: LazyLock<Regex> = LazyLock::new(|| {
    let mut aliases: Vec<&str> = spectral_method_aliases().flat_map(|(_, a)| a.iter().copied()).collect();
    // longest first so alternation prefers "vis-nir" over "nir" at one position
    aliases.sort_by_key(|a| std::cmp::Reverse(a.len()));
    let alt = aliases.iter().map(|a| regex::escape(a)).collect::<Vec<_>>().join("|");
    Regex::new(&format!(r"\b(?:{alt})\b")).unwrap()
});

static METHOD_WORD_PATTERN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b(?P<m>[a-z0-9][a-z0-9\-]*)\s+(?:spectroscopy|spectra|spectrum|spectrometry|spectroscopic)\b").unwrap()
});

const NOT_A_METHOD: &[&str] = &[
    "which", "what", "the", "a", "an", "suitable", "spectral", "appropriate", "best", "any", "of", "using",
    "with", "by", "and", "or", "this", "that", "these", "such", "optical", "vibrational", "molecular",
];

static OBJECTIVE_PATTERNS: LazyLock<Vec<(QuestionObjective, Regex)>> = LazyLock::new(|| {
    [
        (QuestionObjective::Preprocessing, r"\b(?:pre-?processing|pre-?process(?:ed)?|pre-?treatments?)\b"),
        (
            QuestionObjective::FeatureProcessing,
            r"\b(?:features?|wavelength selection|variable selection|characteristic wavelengths?|dimensionality reduction|band selection)\b",
        ),
        (QuestionObjective::Model, r"\b(?:models?|modell?ing|algorithms?|regression|classifiers?|machine learning)\b"),
        (
            QuestionObjective::Metrics,
            r"\b(?:metrics?|accuracy|rmsep?|rmsec|r2|rpd|outcomes?|performance|results?|errors?)\b",
        ),
    ]
    .into_iter()
    .map(|(o, p)| (o, Regex::new(p).unwrap()))
    .collect()
});

fn collapse(question: &str) -> String {
    question.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn trim_entity(s: &str) -> String {
    let s = s.trim();
    let s = ["the ", "a ", "an "].iter().fold(s, |acc, art| acc.strip_prefix(art).unwrap_or(acc));
    s.trim().to_string()
}

/// (property, object) from the first matching pattern.
fn object_and_property(text: &str) -> Option<(String, String)> {
    if let Some(c) = TASK_PATTERN.captures(text) {
        return Some((trim_entity(&c["prop"]), trim_entity(&c["obj"])));
    }
    BARE_PATTERN
        .captures_iter(text)
        .find(|c| !NOT_A_PROPERTY.contains(&&c["prop"]))
        .map(|c| (trim_entity(&c["prop"]), trim_entity(&c["obj"])))
        .filter(|(p, o)| !p.is_empty() && !o.is_empty())
}

/// Earliest spectral method mentioned, in canonical display form.
pub fn find_spectral_method(question: &str) -> Option<String> {
    let text = collapse(question);
    if let Some(m) = METHOD_ALIAS_PATTERN.find(&text) {
        return Some(canonical_label(m.as_str()));
    }
    METHOD_WORD_PATTERN
        .captures_iter(&text)
        .map(|c| c["m"].to_string())
        .find(|m| !NOT_A_METHOD.contains(&m.as_str()))
        .map(|m| canonical_label(&m))
}

/// First objective whose keyword list matches, in fixed priority order.
pub fn detect_objective(question: &str) -> Option<QuestionObjective> {
    let text = collapse(question);
    OBJECTIVE_PATTERNS.iter().find(|(_, re)| re.is_match(&text)).map(|(o, _)| *o)
}

/// Total and deterministic: returns `None` when no object pattern matches, or
/// when a chemometrics question names no spectral method.
pub fn rule_based_extract(question: &str) -> Option<ParsedQuestion> {
    let text = collapse(question);
    let (property, object) = object_and_property(&text)?;
    let method = find_spectral_method(&text);
    let objective = detect_objective(&text);
    let task = classify_task(objective);
    if task == TaskIndicator::ChemometricsWorkflow && method.is_none() {
        return None;
    }
    ParsedQuestion::new(object, Some(property), method, objective, task, question).ok()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RuleBasedExtractor;

impl EntityExtractor for RuleBasedExtractor {
    fn extract(&self, question: &str) -> Result<ParsedQuestion, ExtractionError> {
        if question.trim().is_empty() {
            return Err(ExtractionError::EmptyQuestion);
        }
        rule_based_extract(question).ok_or(ExtractionError::NoMatch)
    }
}
