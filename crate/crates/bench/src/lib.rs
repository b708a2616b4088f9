//! Shared fixtures for the criterion benchmarks.

use spectraqa::corpus::{CorpusSnapshot, CorpusStore};
use spectraqa::retrieval::JudgedQuery;
use spectraqa::synth::{generate, SynthConfig};

/// Seeded synthetic corpus of `docs` papers with its judged queries.
pub fn synthetic(docs: usize) -> (CorpusSnapshot, Vec<JudgedQuery>) {
    let corpus = generate(&SynthConfig { docs, ..SynthConfig::default() });
    let mut store = CorpusStore::new();
    store.insert_batch(corpus.papers);
    (store.snapshot(), corpus.queries)
}

/// Candidate/reference pairs of answer-like length.
pub fn answer_pairs() -> Vec<(String, String)> {
    let reference = "Related studies show that Vis-NIR and Raman spectroscopy combined with SNV \
                     preprocessing and PLS models can be used to predict sugar content in apples";
    let candidates = [
        "Related studies show that NIR spectroscopy with PLS can be used to predict sugar content in apples",
        "Raman spectroscopy combined with SNV and PLS models predicts sugar content",
        "Hyperspectral imaging was applied to detect bruises in pears",
    ];
    candidates.iter().map(|c| (c.to_string(), reference.to_string())).collect()
}
