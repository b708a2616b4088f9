//! The 50-paper demo corpus shipped as `data/demo_corpus.jsonl`.

use crate::corpus::{CorpusStore, Paper, PaperId};
use crate::synth::{generate, SynthConfig};

pub const DEMO_SEED: u64 = 2024;
pub const DEMO_SIZE: usize = 50;

/// Demo papers with ids `DEMO-001` .. `DEMO-050`.
pub fn demo_papers() -> Vec<Paper> {
    let cfg = SynthConfig { seed: DEMO_SEED, docs: DEMO_SIZE, queries: 1, ..SynthConfig::default() };
    generate(&cfg)
        .papers
        .into_iter()
        .enumerate()
        .map(|(i, p)| Paper { id: PaperId::new(format!("DEMO-{:03}", i + 1)).expect("valid id"), ..p })
        .collect()
}

pub fn demo_store() -> CorpusStore {
    let mut store = CorpusStore::new();
    store.insert_batch(demo_papers());
    store
}

/// JSON Lines text of the demo corpus, one paper per line in id order.
pub fn demo_jsonl() -> String {
    demo_store().export_jsonl()
}
