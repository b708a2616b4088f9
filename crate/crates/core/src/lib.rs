//! Retrieval-augmented question answering over a labeled corpus of
//! spectral-detection papers.
//!
//! A question is parsed into entities ([`qparse`]), papers are ranked by a
//! lexical retriever ([`retrieval`]), label fields matching the question are
//! assembled into a cited knowledge bundle ([`knowledge`]) and a model writes
//! the answer through [`gateway`] ([`generation`]). [`evalkit`] scores outputs
//! and [`ift`] builds instruction-tuning data from the same labels.

pub mod corpus;
pub mod demo;
pub mod evalkit;
pub mod gateway;
pub mod generation;
pub mod ift;
pub mod knowledge;
pub mod offline;
pub mod pipeline;
pub mod qparse;
pub mod retrieval;
pub mod synth;
pub mod textproc;

pub use corpus::{CorpusSnapshot, CorpusStore, LabelA, LabelB, MetricOutcome, Paper, PaperId};
pub use gateway::{GatewayConfig, GatewayError, LlmGateway, MockGateway};
pub use generation::{GeneratedAnswer, PromptBuilder};
pub use knowledge::{KnowledgeBundle, KnowledgeField, KnowledgeLimits, KnowledgeSnippet};
pub use qparse::{ParsedQuestion, QuestionObjective, TaskIndicator};
pub use retrieval::{Bm25Params, Index, RankedHit, RetrieverKind};
pub use textproc::TokenStream;
