//! Routes a parsed question to label fields of the retrieved papers and
//! assembles a knowledge bundle in which every snippet names its source.
//!
//! * Method-selection questions take `spectral_methods` (and
//!   `outcome_summary` when present) from the top-ranked papers.
//! * Chemometrics questions take only the label field matching the question
//!   objective, from papers whose spectral methods include the asked method.
//!   When that field is empty in every candidate, the abstracts of the top
//!   papers are used instead.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusSnapshot, Paper, PaperId};
use crate::qparse::{ParsedQuestion, QuestionObjective, TaskIndicator};
use crate::retrieval::RankedHit;
use crate::textproc::normalize_label;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KnowledgeError {
    #[error("hits are not in rank order at position {0}")]
    UnsortedHits(usize),
    #[error("limits must be positive")]
    ZeroLimit,
}

/// Label field a snippet was taken from. Declaration order is the in-paper
/// snippet order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnowledgeField {
    SpectralMethods,
    OutcomeSummary,
    PreprocessingMethods,
    FeatureProcessingMethods,
    Models,
    MetricsAndOutcomes,
    Abstract,
}

impl KnowledgeField {
    pub fn as_str(self) -> &'static str {
        match self {
            KnowledgeField::SpectralMethods => "spectral_methods",
            KnowledgeField::OutcomeSummary => "outcome_summary",
            KnowledgeField::PreprocessingMethods => "preprocessing_methods",
            KnowledgeField::FeatureProcessingMethods => "feature_processing_methods",
            KnowledgeField::Models => "models",
            KnowledgeField::MetricsAndOutcomes => "metrics_and_outcomes",
            KnowledgeField::Abstract => "abstract",
        }
    }

    pub fn for_objective(objective: QuestionObjective) -> Self {
        match objective {
            QuestionObjective::Preprocessing => KnowledgeField::PreprocessingMethods,
            QuestionObjective::FeatureProcessing => KnowledgeField::FeatureProcessingMethods,
            QuestionObjective::Model => KnowledgeField::Models,
            QuestionObjective::Metrics => KnowledgeField::MetricsAndOutcomes,
        }
    }

    /// The field's content as individual label items.
    pub fn items(self, paper: &Paper) -> Vec<String> {
        let (a, b) = (&paper.label_a, &paper.label_b);
        match self {
            KnowledgeField::SpectralMethods => a.spectral_methods.clone(),
            KnowledgeField::OutcomeSummary => a.outcome_summary.iter().cloned().collect(),
            KnowledgeField::PreprocessingMethods => b.preprocessing_methods.clone(),
            KnowledgeField::FeatureProcessingMethods => b.feature_processing_methods.clone(),
            KnowledgeField::Models => b.models.clone(),
            KnowledgeField::MetricsAndOutcomes => b.metrics_and_outcomes.iter().map(|m| m.render()).collect(),
            KnowledgeField::Abstract => vec![paper.abstract_text.clone()],
        }
    }

    /// Snippet text: items joined by "; ", `None` when the field is empty.
    pub fn render(self, paper: &Paper) -> Option<String> {
        let items: Vec<String> = self.items(paper).into_iter().filter(|s| !s.trim().is_empty()).collect();
        (!items.is_empty()).then(|| items.join("; "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KnowledgeSnippet {
    pub paper_id: PaperId,
    pub field_of_origin: KnowledgeField,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeBundle {
    pub question: ParsedQuestion,
    pub snippets: Vec<KnowledgeSnippet>,
    pub retrieval_trace: Vec<RankedHit>,
}

impl KnowledgeBundle {
    pub fn is_empty(&self) -> bool {
        self.snippets.is_empty()
    }

    /// Distinct source ids in snippet order.
    pub fn source_ids(&self) -> Vec<PaperId> {
        let mut ids: Vec<PaperId> = Vec::new();
        for s in &self.snippets {
            if !ids.contains(&s.paper_id) {
                ids.push(s.paper_id.clone());
            }
        }
        ids
    }
}

/// `papers_considered`: how many top hits are read (10 by default).
/// `max_sources`: how many papers may contribute snippets (5 by default).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeLimits {
    pub papers_considered: usize,
    pub max_sources: usize,
}

impl Default for KnowledgeLimits {
    fn default() -> Self {
        Self { papers_considered: 10, max_sources: 5 }
    }
}

fn check_hits(hits: &[RankedHit]) -> Result<(), KnowledgeError> {
    for (i, w) in hits.windows(2).enumerate() {
        if w[1].rank <= w[0].rank {
            return Err(KnowledgeError::UnsortedHits(i + 1));
        }
    }
    Ok(())
}

fn uses_method(paper: &Paper, method_key: &str) -> bool {
    paper.label_a.spectral_methods.iter().any(|m| normalize_label(m) == method_key)
}

pub fn assemble(
    parsed: &ParsedQuestion,
    hits: &[RankedHit],
    snapshot: &CorpusSnapshot,
    limits: KnowledgeLimits,
) -> Result<KnowledgeBundle, KnowledgeError> {
    if limits.papers_considered == 0 || limits.max_sources == 0 {
        return Err(KnowledgeError::ZeroLimit);
    }
    check_hits(hits)?;
    let trace: Vec<RankedHit> = hits.iter().take(limits.papers_considered).cloned().collect();
    let papers: Vec<&Paper> = trace.iter().filter_map(|h| snapshot.get(&h.paper_id)).collect();

    let mut snippets = Vec::new();
    match parsed.task() {
        TaskIndicator::SpectralMethodSelection => {
            for paper in papers.iter().take(limits.max_sources) {
                for field in [KnowledgeField::SpectralMethods, KnowledgeField::OutcomeSummary] {
                    if let Some(text) = field.render(paper) {
                        snippets.push(KnowledgeSnippet { paper_id: paper.id.clone(), field_of_origin: field, text });
                    }
                }
            }
        }
        TaskIndicator::ChemometricsWorkflow => {
            // invariants of ParsedQuestion guarantee both are present here
            let method_key = normalize_label(parsed.spectral_method().unwrap_or_default());
            let field = KnowledgeField::for_objective(
                parsed.question_objective().expect("category-2 question has an objective"),
            );
            snippets = papers
                .iter()
                .filter(|p| uses_method(p, &method_key))
                .filter_map(|p| {
                    field.render(p).map(|text| KnowledgeSnippet {
                        paper_id: p.id.clone(),
                        field_of_origin: field,
                        text,
                    })
                })
                .take(limits.max_sources)
                .collect();
            if snippets.is_empty() {
                snippets = abstract_fallback(&trace, snapshot, limits.max_sources);
            }
        }
    }

    Ok(KnowledgeBundle { question: parsed.clone(), snippets, retrieval_trace: trace })
}

/// One abstract snippet for each of the top `k` hits present in the snapshot.
pub fn abstract_fallback(hits: &[RankedHit], snapshot: &CorpusSnapshot, k: usize) -> Vec<KnowledgeSnippet> {
    hits.iter()
        .filter_map(|h| snapshot.get(&h.paper_id))
        .filter_map(|p| {
            KnowledgeField::Abstract.render(p).map(|text| KnowledgeSnippet {
                paper_id: p.id.clone(),
                field_of_origin: KnowledgeField::Abstract,
                text,
            })
        })
        .take(k)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CorpusStore, LabelA, LabelB, MetricOutcome};

    fn paper(id: &str, methods: &[&str], pre: &[&str], summary: Option<&str>) -> Paper {
        Paper {
            id: PaperId::new(id).unwrap(),
            title: format!("paper {id}"),
            year: 2020,
            abstract_text: format!("abstract of {id}"),
            label_a: LabelA {
                research_object: "apples".into(),
                measured_property: "sweetness".into(),
                spectral_methods: methods.iter().map(|s| s.to_string()).collect(),
                outcome_summary: summary.map(str::to_string),
            },
            label_b: LabelB {
                preprocessing_methods: pre.iter().map(|s| s.to_string()).collect(),
                feature_processing_methods: vec![],
                models: vec!["PLS".into()],
                metrics_and_outcomes: vec![MetricOutcome::new("R2", "0.91"), MetricOutcome::new("RMSEP", "0.4")],
            },
        }
    }

    fn snapshot(papers: Vec<Paper>) -> CorpusSnapshot {
        let mut s = CorpusStore::new();
        s.insert_batch(papers);
        s.snapshot()
    }

    fn hits(ids: &[&str]) -> Vec<RankedHit> {
        ids.iter()
            .enumerate()
            .map(|(i, id)| RankedHit { paper_id: PaperId::new(*id).unwrap(), score: 1.0 / (i + 1) as f64, rank: i + 1 })
            .collect()
    }

    fn cat1() -> ParsedQuestion {
        ParsedQuestion::new("apples", Some("sweetness".into()), None, None, TaskIndicator::SpectralMethodSelection, "q")
            .unwrap()
    }

    fn cat2(method: &str, objective: QuestionObjective) -> ParsedQuestion {
        ParsedQuestion::new(
            "apples",
            Some("sweetness".into()),
            Some(method.into()),
            Some(objective),
            TaskIndicator::ChemometricsWorkflow,
            "q",
        )
        .unwrap()
    }

    #[test]
    fn method_selection_snippets_in_rank_order() {
        let snap = snapshot(vec![
            paper("A", &["NIR"], &[], Some("works")),
            paper("B", &["Raman", "NIR"], &[], None),
            paper("C", &["HSI"], &[], Some("ok")),
        ]);
        let b = assemble(&cat1(), &hits(&["C", "A", "B"]), &snap, KnowledgeLimits::default()).unwrap();
        let got: Vec<_> = b.snippets.iter().map(|s| (s.paper_id.as_str(), s.field_of_origin, s.text.as_str())).collect();
        assert_eq!(
            got,
            [
                ("C", KnowledgeField::SpectralMethods, "HSI"),
                ("C", KnowledgeField::OutcomeSummary, "ok"),
                ("A", KnowledgeField::SpectralMethods, "NIR"),
                ("A", KnowledgeField::OutcomeSummary, "works"),
                ("B", KnowledgeField::SpectralMethods, "Raman; NIR"),
            ]
        );
    }

    #[test]
    fn objective_field_only() {
        let snap = snapshot(vec![paper("A", &["NIR"], &["SNV", "MSC"], Some("s"))]);
        let b = assemble(&cat2("NIR", QuestionObjective::Preprocessing), &hits(&["A"]), &snap, KnowledgeLimits::default())
            .unwrap();
        assert_eq!(
            b.snippets,
            [KnowledgeSnippet {
                paper_id: PaperId::new("A").unwrap(),
                field_of_origin: KnowledgeField::PreprocessingMethods,
                text: "SNV; MSC".into()
            }]
        );
    }

    #[test]
    fn metrics_render_as_pairs() {
        let snap = snapshot(vec![paper("A", &["NIR"], &[], None)]);
        let b = assemble(&cat2("NIR", QuestionObjective::Metrics), &hits(&["A"]), &snap, KnowledgeLimits::default())
            .unwrap();
        assert_eq!(b.snippets[0].text, "R2: 0.91; RMSEP: 0.4");
    }

    #[test]
    fn method_filter_uses_aliases() {
        let snap = snapshot(vec![
            paper("A", &["Raman"], &["SNV"], None),
            paper("B", &["near-infrared"], &["MSC"], None),
        ]);
        let b = assemble(&cat2("NIR", QuestionObjective::Preprocessing), &hits(&["A", "B"]), &snap, KnowledgeLimits::default())
            .unwrap();
        assert_eq!(b.source_ids(), [PaperId::new("B").unwrap()]);
    }

    #[test]
    fn empty_objective_field_falls_back_to_abstracts() {
        let snap = snapshot(vec![paper("A", &["NIR"], &[], None), paper("B", &["NIR"], &[], None)]);
        let parsed = cat2("NIR", QuestionObjective::FeatureProcessing);
        let b = assemble(&parsed, &hits(&["B", "A"]), &snap, KnowledgeLimits::default()).unwrap();
        assert!(b.snippets.iter().all(|s| s.field_of_origin == KnowledgeField::Abstract));
        assert_eq!(b.snippets[0].text, "abstract of B");
        assert_eq!(b.snippets.len(), 2);
    }

    #[test]
    fn fallback_limits() {
        let snap = snapshot(vec![paper("A", &["NIR"], &[], None), paper("B", &["NIR"], &[], None)]);
        assert!(abstract_fallback(&[], &snap, 3).is_empty());
        let one = abstract_fallback(&hits(&["B", "A"]), &snap, 1);
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].paper_id.as_str(), "B");
    }

    #[test]
    fn empty_hits_give_empty_bundle() {
        let snap = snapshot(vec![]);
        assert!(assemble(&cat1(), &[], &snap, KnowledgeLimits::default()).unwrap().is_empty());
    }

    #[test]
    fn source_cap_and_papers_considered() {
        let ids: Vec<String> = (0..12).map(|i| format!("P{i:02}")).collect();
        let snap = snapshot(ids.iter().map(|i| paper(i, &["NIR"], &[], None)).collect());
        let id_refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let b = assemble(&cat1(), &hits(&id_refs), &snap, KnowledgeLimits::default()).unwrap();
        assert_eq!(b.source_ids().len(), 5);
        assert_eq!(b.retrieval_trace.len(), 10);
    }

    #[test]
    fn unsorted_hits_rejected() {
        let snap = snapshot(vec![]);
        let mut h = hits(&["A", "B"]);
        h.swap(0, 1);
        assert_eq!(assemble(&cat1(), &h, &snap, KnowledgeLimits::default()), Err(KnowledgeError::UnsortedHits(1)));
        assert_eq!(
            assemble(&cat1(), &[], &snap, KnowledgeLimits { papers_considered: 0, max_sources: 1 }),
            Err(KnowledgeError::ZeroLimit)
        );
    }
}
