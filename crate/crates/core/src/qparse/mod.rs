//! Question parsing: research object, measured property, spectral method,
//! question objective and the two-way task indicator.
//!
//! Two extractors implement [`EntityExtractor`]: the deterministic
//! [`RuleBasedExtractor`] and [`LlmExtractor`], which asks a model for a
//! strict JSON object and re-prompts once on malformed output.

mod eval;
mod llm;
mod rules;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::GatewayError;

pub use eval::{evaluate_extraction, ExtractionField, ExtractionTable, FieldScores};
pub use llm::{ExtractionPrompt, LlmExtractor, EXTRACTION_MARKER};
pub use rules::{detect_objective, find_spectral_method, rule_based_extract, RuleBasedExtractor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskIndicator {
    /// Category 1: which spectral method suits an object/property.
    SpectralMethodSelection,
    /// Category 2: preprocessing, features, models or metrics after acquisition.
    ChemometricsWorkflow,
}

impl TaskIndicator {
    pub fn category(self) -> u8 {
        match self {
            TaskIndicator::SpectralMethodSelection => 1,
            TaskIndicator::ChemometricsWorkflow => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskIndicator::SpectralMethodSelection => "spectral_method_selection",
            TaskIndicator::ChemometricsWorkflow => "chemometrics_workflow",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionObjective {
    Preprocessing,
    FeatureProcessing,
    Model,
    Metrics,
}

impl QuestionObjective {
    pub const ALL: [QuestionObjective; 4] = [
        QuestionObjective::Preprocessing,
        QuestionObjective::FeatureProcessing,
        QuestionObjective::Model,
        QuestionObjective::Metrics,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionObjective::Preprocessing => "preprocessing",
            QuestionObjective::FeatureProcessing => "feature_processing",
            QuestionObjective::Model => "model",
            QuestionObjective::Metrics => "metrics",
        }
    }
}

impl fmt::Display for QuestionObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QuestionObjective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "preprocessing" | "pre_processing" => Ok(QuestionObjective::Preprocessing),
            "feature_processing" | "features" | "feature" => Ok(QuestionObjective::FeatureProcessing),
            "model" | "models" => Ok(QuestionObjective::Model),
            "metrics" | "metric" | "metrics_and_outcomes" => Ok(QuestionObjective::Metrics),
            other => Err(format!("unknown question objective {other:?}")),
        }
    }
}

/// A chemometrics objective dominates; otherwise the question is about
/// choosing a spectral method.
pub fn classify_task(objective: Option<QuestionObjective>) -> TaskIndicator {
    match objective {
        Some(_) => TaskIndicator::ChemometricsWorkflow,
        None => TaskIndicator::SpectralMethodSelection,
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtractionError {
    #[error("question is empty")]
    EmptyQuestion,
    #[error("no extraction pattern matched the question")]
    NoMatch,
    #[error("extraction output malformed ({reason}): {raw:?}")]
    Malformed { raw: String, reason: String },
    #[error("extraction backend failed: {0}")]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct RawParsed {
    research_object: String,
    #[serde(default)]
    measured_property: Option<String>,
    #[serde(default)]
    spectral_method: Option<String>,
    #[serde(default)]
    question_objective: Option<QuestionObjective>,
    task: TaskIndicator,
    raw_question: String,
}

/// Parsed question. Construction enforces that category-2 questions carry
/// both a spectral method and an objective.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawParsed", into = "RawParsed")]
pub struct ParsedQuestion(RawParsed);

impl ParsedQuestion {
    pub fn new(
        research_object: impl Into<String>,
        measured_property: Option<String>,
        spectral_method: Option<String>,
        question_objective: Option<QuestionObjective>,
        task: TaskIndicator,
        raw_question: impl Into<String>,
    ) -> Result<Self, String> {
        let clean = |s: Option<String>| s.map(|v| v.trim().to_string()).filter(|v| !v.is_empty());
        RawParsed {
            research_object: research_object.into().trim().to_string(),
            measured_property: clean(measured_property),
            spectral_method: clean(spectral_method),
            question_objective,
            task,
            raw_question: raw_question.into(),
        }
        .try_into()
    }

    pub fn research_object(&self) -> &str {
        &self.0.research_object
    }

    pub fn measured_property(&self) -> Option<&str> {
        self.0.measured_property.as_deref()
    }

    pub fn spectral_method(&self) -> Option<&str> {
        self.0.spectral_method.as_deref()
    }

    pub fn question_objective(&self) -> Option<QuestionObjective> {
        self.0.question_objective
    }

    pub fn task(&self) -> TaskIndicator {
        self.0.task
    }

    pub fn raw_question(&self) -> &str {
        &self.0.raw_question
    }
}

impl TryFrom<RawParsed> for ParsedQuestion {
    type Error = String;

    fn try_from(raw: RawParsed) -> Result<Self, Self::Error> {
        if raw.research_object.trim().is_empty() {
            return Err("research_object is empty".into());
        }
        if raw.task == TaskIndicator::ChemometricsWorkflow {
            if raw.spectral_method.is_none() {
                return Err("chemometrics question without spectral_method".into());
            }
            if raw.question_objective.is_none() {
                return Err("chemometrics question without question_objective".into());
            }
        }
        Ok(ParsedQuestion(raw))
    }
}

impl From<ParsedQuestion> for RawParsed {
    fn from(p: ParsedQuestion) -> Self {
        p.0
    }
}

pub trait EntityExtractor: Send + Sync {
    fn extract(&self, question: &str) -> Result<ParsedQuestion, ExtractionError>;
}

/// Runs `extractor` on a non-empty question.
pub fn extract_entities(
    question: &str,
    extractor: &dyn EntityExtractor,
) -> Result<ParsedQuestion, ExtractionError> {
    if question.trim().is_empty() {
        return Err(ExtractionError::EmptyQuestion);
    }
    extractor.extract(question)
}
