//! Instruction-tuning data factory: two-part question templates per question
//! focus, answers generated from a paper's labels with a verbatim containment
//! check, rule-based answer cleaning and a byte-stable JSON Lines export.

mod clean;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusSnapshot, Paper, PaperId};
use crate::gateway::{CompletionRequest, GatewayError, LlmGateway, GENERATION_TEMPERATURE};
use crate::generation::{check_slots, fill_slots};
use crate::knowledge::KnowledgeField;

pub use clean::{clean_item, CleaningRule, CleaningRules};

pub const IFT_ANSWER_MARKER: &str = "### IFT ANSWER";
pub const IFT_PARAPHRASE_MARKER: &str = "### IFT PARAPHRASE";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IftError {
    #[error("question templates: {0}")]
    Templates(String),
    #[error("cleaning rules: {0}")]
    Rules(String),
    #[error("no question template for focus {0}")]
    MissingTemplate(QuestionFocus),
    #[error("paper {paper} has no {focus} labels")]
    EmptyLabel { paper: PaperId, focus: QuestionFocus },
    #[error("answer for {paper}/{focus} omits label items {missing:?}")]
    AnswerUnfaithful { paper: PaperId, focus: QuestionFocus, missing: Vec<String> },
    #[error("item {index}: {reason}")]
    InvalidItem { index: usize, reason: String },
    #[error("ift gateway failed: {0}")]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionFocus {
    SpectralMethod,
    Preprocessing,
    FeatureProcessing,
    MetricsAndOutcomes,
    Model,
}

impl QuestionFocus {
    pub const ALL: [QuestionFocus; 5] = [
        QuestionFocus::SpectralMethod,
        QuestionFocus::Preprocessing,
        QuestionFocus::FeatureProcessing,
        QuestionFocus::MetricsAndOutcomes,
        QuestionFocus::Model,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionFocus::SpectralMethod => "spectral_method",
            QuestionFocus::Preprocessing => "preprocessing",
            QuestionFocus::FeatureProcessing => "feature_processing",
            QuestionFocus::MetricsAndOutcomes => "metrics_and_outcomes",
            QuestionFocus::Model => "model",
        }
    }

    pub fn label_field(self) -> KnowledgeField {
        match self {
            QuestionFocus::SpectralMethod => KnowledgeField::SpectralMethods,
            QuestionFocus::Preprocessing => KnowledgeField::PreprocessingMethods,
            QuestionFocus::FeatureProcessing => KnowledgeField::FeatureProcessingMethods,
            QuestionFocus::MetricsAndOutcomes => KnowledgeField::MetricsAndOutcomes,
            QuestionFocus::Model => KnowledgeField::Models,
        }
    }

    /// Non-blank label strings of this focus; metrics render as `name: value`.
    pub fn label_items(self, paper: &Paper) -> Vec<String> {
        self.label_field().items(paper).into_iter().filter(|s| !s.trim().is_empty()).collect()
    }
}

impl fmt::Display for QuestionFocus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QuestionFocus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        QuestionFocus::ALL
            .into_iter()
            .find(|f| f.as_str() == s.trim())
            .ok_or_else(|| format!("unknown question focus {s:?}"))
    }
}

/// Part A fixes the research object (and property, when the paper has one);
/// part B holds one or more question texts per focus.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields, try_from = "RawTemplates")]
pub struct QuestionTemplates {
    part_a: String,
    part_a_object_only: String,
    part_b: BTreeMap<QuestionFocus, Vec<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTemplates {
    part_a: String,
    part_a_object_only: String,
    part_b: BTreeMap<QuestionFocus, Vec<String>>,
}

impl TryFrom<RawTemplates> for QuestionTemplates {
    type Error = String;

    fn try_from(raw: RawTemplates) -> Result<Self, String> {
        check_slots(&raw.part_a, &["{object}", "{property}"]).map_err(|e| format!("part_a: {e}"))?;
        check_slots(&raw.part_a_object_only, &["{object}"]).map_err(|e| format!("part_a_object_only: {e}"))?;
        if raw.part_a_object_only.contains("{property}") {
            return Err("part_a_object_only must not use {property}".into());
        }
        for (focus, texts) in &raw.part_b {
            if texts.is_empty() || texts.iter().any(|t| t.trim().is_empty()) {
                return Err(format!("part_b.{focus} needs non-empty question texts"));
            }
        }
        Ok(Self { part_a: raw.part_a, part_a_object_only: raw.part_a_object_only, part_b: raw.part_b })
    }
}

impl QuestionTemplates {
    pub fn from_toml(text: &str) -> Result<Self, IftError> {
        toml::from_str(text).map_err(|e| IftError::Templates(e.to_string()))
    }

    pub fn part_b(&self, focus: QuestionFocus) -> Option<&[String]> {
        self.part_b.get(&focus).map(Vec::as_slice)
    }

    fn part_a_for(&self, paper: &Paper) -> String {
        let a = &paper.label_a;
        if a.measured_property.trim().is_empty() {
            fill_slots(&self.part_a_object_only, &[("{object}", a.research_object.trim())])
        } else {
            fill_slots(
                &self.part_a,
                &[("{object}", a.research_object.trim()), ("{property}", a.measured_property.trim())],
            )
        }
    }
}

impl Default for QuestionTemplates {
    fn default() -> Self {
        Self::from_toml(include_str!("../../assets/ift_templates.toml")).expect("shipped templates are valid")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionVariant {
    pub text: String,
    pub focus: QuestionFocus,
    /// True for variants produced by the model rather than a template.
    pub generated: bool,
}

/// Template questions for each focus, in focus order then template order.
pub fn generate_questions(
    paper: &Paper,
    templates: &QuestionTemplates,
    focuses: &[QuestionFocus],
) -> Result<Vec<QuestionVariant>, IftError> {
    let part_a = templates.part_a_for(paper);
    let mut out = Vec::new();
    for &focus in focuses {
        let texts = templates.part_b(focus).ok_or(IftError::MissingTemplate(focus))?;
        out.extend(texts.iter().map(|b| QuestionVariant {
            text: format!("{part_a} {}", b.trim()),
            focus,
            generated: false,
        }));
    }
    Ok(out)
}

/// Asks the model for one rewording of each template variant. Replies that
/// are blank, repeat an existing text or drop the research object are
/// discarded. Returns the input followed by the accepted paraphrases.
pub fn paraphrase_questions(
    paper: &Paper,
    variants: Vec<QuestionVariant>,
    gateway: &dyn LlmGateway,
) -> Result<Vec<QuestionVariant>, IftError> {
    let object = paper.label_a.research_object.trim().to_lowercase();
    let mut out = variants.clone();
    for v in variants.iter().filter(|v| !v.generated) {
        let prompt = format!(
            "{IFT_PARAPHRASE_MARKER}\nRewrite the question below with different wording. Keep the research \
             object \"{}\" and the meaning unchanged. Reply with the question only.\n\nQuestion: {}",
            paper.label_a.research_object.trim(),
            v.text
        );
        let reply = gateway.complete(&CompletionRequest::new(prompt, GENERATION_TEMPERATURE))?;
        let text = reply.text.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("").to_string();
        if text.is_empty() || !text.to_lowercase().contains(&object) || out.iter().any(|o| o.text == text) {
            continue;
        }
        out.push(QuestionVariant { text, focus: v.focus, generated: true });
    }
    Ok(out)
}

/// Answer prompt with `{object}`, `{property}`, `{label_items}` and
/// `{question}` slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerPrompt {
    template: String,
}

impl AnswerPrompt {
    pub fn new(template: impl Into<String>) -> Result<Self, IftError> {
        let template = template.into();
        check_slots(&template, &["{object}", "{property}", "{label_items}", "{question}"])
            .map_err(IftError::Templates)?;
        Ok(Self { template })
    }

    pub fn render(&self, question: &str, paper: &Paper, items: &[String]) -> String {
        let listed = items.iter().map(|i| format!("- {i}")).collect::<Vec<_>>().join("\n");
        fill_slots(
            &self.template,
            &[
                ("{object}", paper.label_a.research_object.trim()),
                ("{property}", paper.label_a.measured_property.trim()),
                ("{label_items}", &listed),
                ("{question}", question),
            ],
        )
    }
}

impl Default for AnswerPrompt {
    fn default() -> Self {
        Self::new(include_str!("../../assets/ift_answer_prompt.txt")).expect("shipped prompt is valid")
    }
}

/// Label items that do not occur verbatim in `answer`.
pub fn missing_items(answer: &str, items: &[String]) -> Vec<String> {
    items.iter().filter(|i| !answer.contains(i.as_str())).cloned().collect()
}

/// Generates an answer that must contain every label item of `focus`
/// verbatim. One corrective retry is made before
/// [`IftError::AnswerUnfaithful`].
pub fn generate_answer(
    question: &str,
    paper: &Paper,
    focus: QuestionFocus,
    gateway: &dyn LlmGateway,
    prompt: &AnswerPrompt,
) -> Result<String, IftError> {
    let items = focus.label_items(paper);
    if items.is_empty() {
        return Err(IftError::EmptyLabel { paper: paper.id.clone(), focus });
    }
    let rendered = prompt.render(question, paper, &items);
    let first = gateway.complete(&CompletionRequest::new(&rendered, GENERATION_TEMPERATURE))?;
    let missing = missing_items(&first.text, &items);
    if missing.is_empty() {
        return Ok(first.text.trim().to_string());
    }

    let corrective = format!(
        "{rendered}\n\nYour previous answer omitted these label items: {}. \
         Answer again and include every label item verbatim.",
        missing.join("; ")
    );
    let second = gateway.complete(&CompletionRequest::new(corrective, GENERATION_TEMPERATURE))?;
    let missing = missing_items(&second.text, &items);
    if missing.is_empty() {
        Ok(second.text.trim().to_string())
    } else {
        Err(IftError::AnswerUnfaithful { paper: paper.id.clone(), focus, missing })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IftItem {
    pub question: String,
    pub answer: String,
    pub source_paper: PaperId,
    pub focus: QuestionFocus,
}

fn check_item(item: &IftItem, snapshot: &CorpusSnapshot, rules: &CleaningRules) -> Result<(), String> {
    if item.question.trim().is_empty() {
        return Err("question is empty".into());
    }
    let paper = snapshot.get(&item.source_paper).ok_or_else(|| format!("unknown paper {}", item.source_paper))?;
    let items = item.focus.label_items(paper);
    if items.is_empty() {
        return Err(format!("paper {} has no {} labels", paper.id, item.focus));
    }
    let missing = missing_items(&item.answer, &items);
    if !missing.is_empty() {
        return Err(format!("answer omits label items {missing:?}"));
    }
    if !rules.is_clean(&item.answer) {
        return Err("answer is not cleaned".into());
    }
    Ok(())
}

/// Validates every item, then writes JSON Lines sorted by
/// (source_paper, focus, question, answer).
pub fn export_ift(items: &[IftItem], snapshot: &CorpusSnapshot, rules: &CleaningRules) -> Result<String, IftError> {
    for (index, item) in items.iter().enumerate() {
        check_item(item, snapshot, rules).map_err(|reason| IftError::InvalidItem { index, reason })?;
    }
    let mut sorted: Vec<&IftItem> = items.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.source_paper, a.focus, &a.question, &a.answer).cmp(&(&b.source_paper, b.focus, &b.question, &b.answer))
    });
    let mut out = String::new();
    for item in sorted {
        out.push_str(&serde_json::to_string(item).expect("item serializes"));
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct SkippedItem {
    pub paper: PaperId,
    pub focus: QuestionFocus,
    pub question: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct IftRun {
    pub items: Vec<IftItem>,
    pub skipped: Vec<SkippedItem>,
}

#[derive(Debug, Clone)]
pub struct IftOptions {
    pub focuses: Vec<QuestionFocus>,
    pub paraphrase: bool,
}

impl Default for IftOptions {
    fn default() -> Self {
        Self { focuses: QuestionFocus::ALL.to_vec(), paraphrase: false }
    }
}

/// Runs the factory over every paper in the snapshot. Foci with empty labels
/// and unfaithful answers are recorded as skipped; gateway failures abort.
pub fn build_dataset(
    snapshot: &CorpusSnapshot,
    templates: &QuestionTemplates,
    prompt: &AnswerPrompt,
    rules: &CleaningRules,
    gateway: &dyn LlmGateway,
    options: &IftOptions,
) -> Result<IftRun, IftError> {
    let mut run = IftRun::default();
    for paper in snapshot.papers() {
        let (usable, empty): (Vec<QuestionFocus>, Vec<QuestionFocus>) =
            options.focuses.iter().partition(|f| !f.label_items(paper).is_empty());
        for focus in empty {
            run.skipped.push(SkippedItem {
                paper: paper.id.clone(),
                focus,
                question: None,
                reason: "no labels for focus".into(),
            });
        }
        let mut variants = generate_questions(paper, templates, &usable)?;
        if options.paraphrase {
            variants = paraphrase_questions(paper, variants, gateway)?;
        }
        for v in variants {
            match generate_answer(&v.text, paper, v.focus, gateway, prompt) {
                Ok(answer) => {
                    let item = clean_item(
                        IftItem { question: v.text, answer, source_paper: paper.id.clone(), focus: v.focus },
                        rules,
                    );
                    match check_item(&item, snapshot, rules) {
                        Ok(()) => run.items.push(item),
                        Err(reason) => run.skipped.push(SkippedItem {
                            paper: paper.id.clone(),
                            focus: v.focus,
                            question: Some(item.question),
                            reason: format!("after cleaning: {reason}"),
                        }),
                    }
                }
                Err(e @ IftError::AnswerUnfaithful { .. }) => run.skipped.push(SkippedItem {
                    paper: paper.id.clone(),
                    focus: v.focus,
                    question: Some(v.text),
                    reason: e.to_string(),
                }),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(run)
}
