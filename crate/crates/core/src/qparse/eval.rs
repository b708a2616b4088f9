use serde::Serialize;

use super::ParsedQuestion;
use crate::evalkit::{bleu, meteor, rouge1_f, DEFAULT_BLEU_N};
use crate::textproc::{normalize_label, tokenize_for_eval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionField {
    ResearchObject,
    MeasuredProperty,
    SpectralMethod,
    QuestionObjective,
    Task,
}

impl ExtractionField {
    pub const ALL: [ExtractionField; 5] = [
        ExtractionField::ResearchObject,
        ExtractionField::MeasuredProperty,
        ExtractionField::SpectralMethod,
        ExtractionField::QuestionObjective,
        ExtractionField::Task,
    ];

    fn value(self, p: &ParsedQuestion) -> String {
        match self {
            ExtractionField::ResearchObject => p.research_object().to_string(),
            ExtractionField::MeasuredProperty => p.measured_property().unwrap_or_default().to_string(),
            ExtractionField::SpectralMethod => p.spectral_method().unwrap_or_default().to_string(),
            ExtractionField::QuestionObjective => {
                p.question_objective().map(|o| o.as_str().to_string()).unwrap_or_default()
            }
            ExtractionField::Task => p.task().as_str().to_string(),
        }
    }
}

/// Lexical scores average over items whose gold value is non-empty and are
/// `None` when there is none; accuracy covers every item.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldScores {
    pub field: ExtractionField,
    pub bleu: Option<f64>,
    pub rouge1: Option<f64>,
    pub meteor: Option<f64>,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractionTable {
    pub items: usize,
    pub fields: Vec<FieldScores>,
}

impl ExtractionTable {
    pub fn field(&self, field: ExtractionField) -> &FieldScores {
        self.fields.iter().find(|f| f.field == field).expect("every field is scored")
    }
}

/// Per-field BLEU, ROUGE-1, METEOR and exact-match accuracy. Exact match
/// compares values after label normalization.
pub fn evaluate_extraction(
    predictions: &[ParsedQuestion],
    gold: &[ParsedQuestion],
) -> Result<ExtractionTable, String> {
    if predictions.len() != gold.len() {
        return Err(format!("{} predictions for {} gold items", predictions.len(), gold.len()));
    }
    if predictions.is_empty() {
        return Err("no items to evaluate".into());
    }

    let fields = ExtractionField::ALL
        .iter()
        .map(|&field| {
            let mut lexical = Vec::new();
            let mut exact = 0usize;
            for (p, g) in predictions.iter().zip(gold) {
                let (pv, gv) = (field.value(p), field.value(g));
                if normalize_label(&pv) == normalize_label(&gv) {
                    exact += 1;
                }
                let (c, r) = (tokenize_for_eval(&pv), tokenize_for_eval(&gv));
                if !r.is_empty() {
                    // reference checked non-empty above
                    lexical.push((
                        bleu(&c, &r, DEFAULT_BLEU_N).unwrap(),
                        rouge1_f(&c, &r).unwrap(),
                        meteor(&c, &r).unwrap(),
                    ));
                }
            }
            let mean = |f: fn(&(f64, f64, f64)) -> f64| {
                (!lexical.is_empty()).then(|| lexical.iter().map(f).sum::<f64>() / lexical.len() as f64)
            };
            FieldScores {
                field,
                bleu: mean(|t| t.0),
                rouge1: mean(|t| t.1),
                meteor: mean(|t| t.2),
                accuracy: exact as f64 / predictions.len() as f64,
            }
        })
        .collect();

    Ok(ExtractionTable { items: predictions.len(), fields })
}
