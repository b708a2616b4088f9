//! The three-stage question answering flow: parse, retrieve and assemble,
//! then generate.

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusSnapshot;
use crate::generation::{generate, GeneratedAnswer, GenerationError, PromptBuilder};
use crate::gateway::LlmGateway;
use crate::knowledge::{assemble, KnowledgeError, KnowledgeLimits, KnowledgeSnippet};
use crate::qparse::{extract_entities, EntityExtractor, ExtractionError, ParsedQuestion};
use crate::retrieval::{Index, RankedHit, RetrievalError, RetrieverKind};
use crate::textproc::{normalize_label, tokenize, TokenStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Extraction,
    Retrieval,
    Knowledge,
    Generation,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Extraction => "extraction",
            Stage::Retrieval => "retrieval",
            Stage::Knowledge => "knowledge",
            Stage::Generation => "generation",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("extraction: {0}")]
    Extraction(#[from] ExtractionError),
    #[error("retrieval: {0}")]
    Retrieval(#[from] RetrievalError),
    #[error("knowledge: {0}")]
    Knowledge(#[from] KnowledgeError),
    #[error("generation: {0}")]
    Generation(#[from] GenerationError),
}

impl PipelineError {
    pub fn stage(&self) -> Stage {
        match self {
            PipelineError::Extraction(_) => Stage::Extraction,
            PipelineError::Retrieval(_) => Stage::Retrieval,
            PipelineError::Knowledge(_) => Stage::Knowledge,
            PipelineError::Generation(_) => Stage::Generation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AskOptions {
    pub k: usize,
    pub limits: KnowledgeLimits,
}

impl Default for AskOptions {
    fn default() -> Self {
        let limits = KnowledgeLimits::default();
        Self { k: limits.papers_considered, limits }
    }
}

/// Stage durations in microseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTiming {
    pub extraction_us: u64,
    pub retrieval_us: u64,
    pub knowledge_us: u64,
    pub generation_us: u64,
}

fn micros(d: Duration) -> u64 {
    d.as_micros().try_into().unwrap_or(u64::MAX)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AskResponse {
    pub question: String,
    pub retriever: RetrieverKind,
    pub corpus_revision: u64,
    pub parsed: ParsedQuestion,
    pub hits: Vec<RankedHit>,
    pub snippets: Vec<KnowledgeSnippet>,
    pub answer: GeneratedAnswer,
    pub timing: StageTiming,
}

/// Retrieval query for a parsed question: research object, measured property
/// and the normalized spectral method.
pub fn query_terms(parsed: &ParsedQuestion) -> TokenStream {
    let mut parts = vec![parsed.research_object().to_string()];
    parts.extend(parsed.measured_property().map(str::to_string));
    parts.extend(parsed.spectral_method().map(normalize_label));
    tokenize(&parts.join(" "))
}

pub struct QaPipeline {
    extractor: Arc<dyn EntityExtractor>,
    gateway: Arc<dyn LlmGateway>,
    prompts: PromptBuilder,
}

impl QaPipeline {
    pub fn new(extractor: Arc<dyn EntityExtractor>, gateway: Arc<dyn LlmGateway>) -> Self {
        Self { extractor, gateway, prompts: PromptBuilder::default() }
    }

    pub fn with_prompts(mut self, prompts: PromptBuilder) -> Self {
        self.prompts = prompts;
        self
    }

    pub fn gateway(&self) -> &Arc<dyn LlmGateway> {
        &self.gateway
    }

    /// `index` must have been built from `snapshot`.
    pub fn ask(
        &self,
        question: &str,
        index: &Index,
        snapshot: &CorpusSnapshot,
        options: AskOptions,
    ) -> Result<AskResponse, PipelineError> {
        let mut timing = StageTiming::default();

        let t = Instant::now();
        let parsed = extract_entities(question, self.extractor.as_ref())?;
        timing.extraction_us = micros(t.elapsed());

        let t = Instant::now();
        let hits = index.retrieve_top_k(&query_terms(&parsed), options.k)?;
        timing.retrieval_us = micros(t.elapsed());

        let t = Instant::now();
        let bundle = assemble(&parsed, &hits, snapshot, options.limits)?;
        timing.knowledge_us = micros(t.elapsed());

        let t = Instant::now();
        let prompt = self.prompts.build_prompt(question, &bundle);
        let answer = generate(&prompt, self.gateway.as_ref())?;
        timing.generation_us = micros(t.elapsed());

        Ok(AskResponse {
            question: question.to_string(),
            retriever: index.kind(),
            corpus_revision: snapshot.revision(),
            parsed,
            hits,
            snippets: bundle.snippets,
            answer,
            timing,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CorpusStore, LabelA, LabelB, Paper, PaperId};
    use crate::gateway::{MockGateway, MockReply};
    use crate::qparse::RuleBasedExtractor;

    fn store() -> CorpusStore {
        let p = |id: &str, object: &str, methods: &[&str]| Paper {
            id: PaperId::new(id).unwrap(),
            title: format!("{object} study"),
            year: 2020,
            abstract_text: format!("we measured sweetness in {object}"),
            label_a: LabelA {
                research_object: object.into(),
                measured_property: "sweetness".into(),
                spectral_methods: methods.iter().map(|s| s.to_string()).collect(),
                outcome_summary: None,
            },
            label_b: LabelB { preprocessing_methods: vec!["SNV".into()], ..LabelB::default() },
        };
        let mut s = CorpusStore::new();
        s.insert_batch(vec![p("A1", "apples", &["NIR"]), p("B1", "bananas", &["Raman"])]);
        s
    }

    #[test]
    fn query_terms_from_entities() {
        let parsed = crate::qparse::rule_based_extract(
            "Which preprocessing methods are used with near infrared spectra to predict sweetness in apples?",
        )
        .unwrap();
        assert_eq!(query_terms(&parsed).tokens(), ["apples", "sweetness", "nir"]);
    }

    #[test]
    fn ask_end_to_end() {
        let s = store();
        let snap = s.snapshot();
        let index = Index::build(&snap, RetrieverKind::TfidfCosine, None);
        let gw = Arc::new(MockGateway::new("Related studies show that NIR works [A1]."));
        let pipe = QaPipeline::new(Arc::new(RuleBasedExtractor), gw);
        let r = pipe
            .ask("which spectral method suits sweetness in apples?", &index, &snap, AskOptions::default())
            .unwrap();
        assert_eq!(r.hits[0].paper_id.as_str(), "A1");
        assert_eq!(r.answer.citations, [PaperId::new("A1").unwrap()]);
        assert_eq!(r.retriever, RetrieverKind::TfidfCosine);
    }

    #[test]
    fn stage_attribution() {
        let s = store();
        let snap = s.snapshot();
        let index = Index::build(&snap, RetrieverKind::Bm25, None);
        let pipe = QaPipeline::new(Arc::new(RuleBasedExtractor), Arc::new(MockGateway::new(MockReply::Unavailable)));
        let err = pipe.ask("which spectral method suits sweetness in apples?", &index, &snap, AskOptions::default());
        assert_eq!(err.unwrap_err().stage(), Stage::Generation);
        let err = pipe.ask("hello", &index, &snap, AskOptions::default());
        assert_eq!(err.unwrap_err().stage(), Stage::Extraction);
        let zero = AskOptions { k: 0, ..AskOptions::default() };
        let err = pipe.ask("which spectral method suits sweetness in apples?", &index, &snap, zero);
        assert_eq!(err.unwrap_err().stage(), Stage::Retrieval);
    }

    #[test]
    fn no_hits_gives_no_knowledge_answer() {
        let s = store();
        let snap = s.snapshot();
        let index = Index::build(&snap, RetrieverKind::TfidfCosine, None);
        let gw = Arc::new(MockGateway::new(MockReply::Unavailable));
        let pipe = QaPipeline::new(Arc::new(RuleBasedExtractor), gw.clone());
        let r = pipe.ask("which spectral method suits firmness in kiwis?", &index, &snap, AskOptions::default()).unwrap();
        assert!(r.hits.is_empty() && r.answer.citations.is_empty());
        assert_eq!(gw.call_count(), 0);
    }
}
