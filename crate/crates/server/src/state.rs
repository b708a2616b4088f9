use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, RwLock};

use spectraqa::corpus::{CorpusSnapshot, CorpusStore, IngestReport};
use spectraqa::pipeline::QaPipeline;
use spectraqa::qparse::EntityExtractor;
use spectraqa::retrieval::{Index, RetrieverKind};

/// A snapshot together with the three indexes built from it. Requests clone
/// the `Arc` once and use that pair throughout, so they never mix revisions.
pub struct Published {
    pub snapshot: CorpusSnapshot,
    pub indexes: BTreeMap<RetrieverKind, Index>,
}

impl Published {
    pub fn build(snapshot: CorpusSnapshot) -> Self {
        let indexes = RetrieverKind::ALL.iter().map(|&k| (k, Index::build(&snapshot, k, None))).collect();
        Self { snapshot, indexes }
    }

    pub fn revision(&self) -> u64 {
        self.snapshot.revision()
    }

    pub fn index(&self, kind: RetrieverKind) -> &Index {
        &self.indexes[&kind]
    }
}

pub struct AppState {
    store: Mutex<CorpusStore>,
    published: RwLock<Arc<Published>>,
    pub pipeline: QaPipeline,
    pub extractor: Arc<dyn EntityExtractor>,
}

impl AppState {
    pub fn new(store: CorpusStore, pipeline: QaPipeline, extractor: Arc<dyn EntityExtractor>) -> Self {
        let published = Arc::new(Published::build(store.snapshot()));
        Self { store: Mutex::new(store), published: RwLock::new(published), pipeline, extractor }
    }

    pub fn current(&self) -> Arc<Published> {
        self.published.read().expect("published lock").clone()
    }

    pub fn corpus_revision(&self) -> u64 {
        self.store.lock().expect("store lock").revision()
    }

    /// Applies a batch under the store lock and returns the report plus the
    /// snapshot to index when anything was accepted.
    pub fn ingest(&self, jsonl: &str) -> (IngestReport, Option<CorpusSnapshot>) {
        let mut store = self.store.lock().expect("store lock");
        let report = store.ingest_str(jsonl);
        let snapshot = (report.accepted > 0).then(|| store.snapshot());
        (report, snapshot)
    }

    /// Publishes `next` unless a newer revision is already live.
    pub fn publish(&self, next: Published) -> bool {
        let mut slot = self.published.write().expect("published lock");
        if next.revision() > slot.revision() {
            *slot = Arc::new(next);
            true
        } else {
            false
        }
    }
}
