//! Seeded synthetic corpus and entity-keyword queries for comparing the
//! retrievers.
//!
//! Papers are drawn from (object, property) topics, each with a few papers
//! that differ in spectral method, wording and length. Abstracts mix topic
//! sentences with generic methodology prose and occasional mentions of other
//! topics. A query is the object, property and method keywords of one paper;
//! its relevant set is every paper of that topic.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::{CorpusStore, LabelA, LabelB, MetricOutcome, Paper, PaperId};
use crate::retrieval::{retrieval_accuracy, Index, JudgedQuery, RetrievalError, RetrieverKind};
use crate::textproc::{normalize_label, tokenize};

pub const OBJECTS: &[&str] = &[
    "apples", "pears", "wheat", "rice", "maize", "soybean", "tea", "milk", "honey", "coffee", "beef", "pork",
    "soil", "tomato", "grape", "citrus", "peanut", "potato", "strawberry", "mango", "wine", "cotton", "tobacco",
    "salmon", "barley", "cocoa", "walnut", "spinach", "cheese", "chicken",
];

pub const PROPERTIES: &[&str] = &[
    "sweetness", "firmness", "moisture", "protein", "fat", "acidity", "starch", "nitrogen", "chlorophyll",
    "freshness", "adulteration", "hardness", "caffeine", "anthocyanin", "ripeness", "contamination",
];

pub const METHODS: &[&str] = &["NIR", "Vis-NIR", "Raman", "HSI", "FTIR", "MIR", "LIBS", "Fluorescence", "SERS", "THz"];

const PREPROCESSING: &[&str] = &["SNV", "MSC", "SG", "first derivative", "second derivative", "baseline correction", "normalization"];
const FEATURES: &[&str] = &["PCA", "CARS", "SPA", "UVE", "genetic algorithm", "interval PLS"];
const MODELS: &[&str] = &["PLS", "PLS-DA", "SVM", "LS-SVM", "RF", "ANN", "CNN", "MLR"];

/// Generic methodology sentences shared by every topic.
const FILLER: &[&str] = &[
    "The spectra of the samples were collected and the calibration model was developed on the training set.",
    "The results of the model show that the method is fast and non-destructive for the samples.",
    "Samples were divided into a calibration set and a prediction set by the Kennard-Stone algorithm.",
    "The performance of the model was evaluated with the correlation coefficient and the root mean square error.",
    "The spectral data were preprocessed to reduce the noise and the scattering of the samples.",
    "Outliers in the data set were removed before the model was built.",
    "This provides a rapid and accurate method for the quality inspection of agricultural products.",
    "The prediction results of the model were compared with the reference values of the samples.",
    "Characteristic wavelengths were selected to simplify the model and to improve the robustness.",
    "The study demonstrates the potential of the technique for online detection in the industry.",
    "A total of the samples were purchased from a local market and stored at a constant temperature.",
    "The reference values were measured by standard chemical methods in the laboratory.",
];

/// Knobs of the generator. The defaults are the benchmark configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub docs: usize,
    pub queries: usize,
    pub k: usize,
    /// Papers per topic are drawn uniformly from this range.
    pub papers_per_topic: (usize, usize),
    /// Number of generic sentences per abstract.
    pub filler_sentences: (usize, usize),
    /// Probability that an abstract mentions another topic.
    pub cross_mention: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            docs: 200,
            queries: 100,
            k: 10,
            papers_per_topic: (2, 5),
            filler_sentences: (2, 14),
            cross_mention: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Topic {
    object: &'static str,
    property: &'static str,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub papers: Vec<Paper>,
    pub queries: Vec<JudgedQuery>,
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    pool.choose(rng).expect("pool is non-empty")
}

fn pick_some(rng: &mut ChaCha8Rng, pool: &[&str], lo: usize, hi: usize) -> Vec<String> {
    let n = rng.random_range(lo..=hi).min(pool.len());
    let mut v: Vec<&str> = pool.to_vec();
    v.shuffle(rng);
    v.truncate(n);
    v.into_iter().map(str::to_string).collect()
}

fn other_topic(rng: &mut ChaCha8Rng, own: &Topic) -> Topic {
    loop {
        let t = Topic { object: pick(rng, OBJECTS), property: pick(rng, PROPERTIES) };
        if t.object != own.object {
            return t;
        }
    }
}

fn make_paper(rng: &mut ChaCha8Rng, id: PaperId, topic: &Topic, method: &str, cfg: &SynthConfig) -> Paper {
    let Topic { object, property } = topic;
    let title = match rng.random_range(0..4) {
        0 => format!("Determination of {property} in {object} using {method} spectroscopy"),
        1 => format!("Nondestructive prediction of {object} {property} based on {method} spectra"),
        2 => format!("Rapid detection of {property} of {object} by {method} and chemometrics"),
        _ => format!("{method} spectroscopy combined with machine learning for {object} quality"),
    };

    let mut sentences: Vec<String> = Vec::new();
    let n_filler = rng.random_range(cfg.filler_sentences.0..=cfg.filler_sentences.1);
    for _ in 0..n_filler {
        sentences.push(pick(rng, FILLER).to_string());
    }
    sentences.push(format!("In this work {method} spectra of {object} were acquired to predict {property}."));
    if rng.random_bool(0.5) {
        sentences.push(format!("The {method} measurements covered the full spectral range of the instrument."));
    }
    if rng.random_bool(cfg.cross_mention) {
        let o = other_topic(rng, topic);
        let m = pick(rng, METHODS);
        sentences.push(format!(
            "Earlier studies applied {m} to {p} of {obj}, and the same approach was tested here.",
            p = o.property,
            obj = o.object
        ));
    }
    sentences.shuffle(rng);

    let mut methods = vec![method.to_string()];
    if rng.random_bool(0.2) {
        let extra = pick(rng, METHODS);
        if extra != method {
            methods.push(extra.to_string());
        }
    }
    let r2: f64 = rng.random_range(0.80..0.99);
    let rmsep: f64 = rng.random_range(0.05..1.5);
    Paper {
        id,
        title,
        year: rng.random_range(2010..=2024),
        abstract_text: sentences.join(" "),
        label_a: LabelA {
            research_object: object.to_string(),
            measured_property: property.to_string(),
            spectral_methods: methods,
            outcome_summary: rng
                .random_bool(0.6)
                .then(|| format!("{method} gave reliable predictions with R2 of {r2:.2}")),
        },
        label_b: LabelB {
            preprocessing_methods: pick_some(rng, PREPROCESSING, 0, 2),
            feature_processing_methods: pick_some(rng, FEATURES, 0, 2),
            models: pick_some(rng, MODELS, 1, 2),
            metrics_and_outcomes: vec![
                MetricOutcome::new("R2", format!("{r2:.3}")),
                MetricOutcome::new("RMSEP", format!("{rmsep:.3}")),
            ],
        },
    }
}

/// Deterministic for a given configuration.
pub fn generate(cfg: &SynthConfig) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // every (object, property) pair, shuffled, then consumed until enough papers exist
    let mut topics: Vec<Topic> = OBJECTS
        .iter()
        .flat_map(|o| PROPERTIES.iter().map(move |p| Topic { object: o, property: p }))
        .collect();
    topics.shuffle(&mut rng);

    let width = cfg.docs.max(1).to_string().len().max(3);
    let mut papers = Vec::with_capacity(cfg.docs);
    let mut groups: Vec<(Topic, Vec<usize>)> = Vec::new();
    for topic in topics {
        if papers.len() >= cfg.docs {
            break;
        }
        let n = rng.random_range(cfg.papers_per_topic.0..=cfg.papers_per_topic.1).min(cfg.docs - papers.len());
        let mut members = Vec::new();
        for _ in 0..n {
            let method = pick(&mut rng, METHODS);
            let id = PaperId::new(format!("S{:0width$}", papers.len() + 1)).expect("generated id is valid");
            members.push(papers.len());
            papers.push(make_paper(&mut rng, id, &topic, method, cfg));
        }
        groups.push((topic, members));
    }

    let mut queries = Vec::with_capacity(cfg.queries);
    for _ in 0..cfg.queries {
        let (topic, members) = groups.choose(&mut rng).expect("at least one topic");
        let seed_paper = &papers[*members.choose(&mut rng).expect("topic has papers")];
        let method = normalize_label(&seed_paper.label_a.spectral_methods[0]);
        let query = tokenize(&format!("{} {} {}", topic.object, topic.property, method));
        let relevant: BTreeSet<PaperId> = members.iter().map(|&i| papers[i].id.clone()).collect();
        queries.push(JudgedQuery { query, relevant });
    }

    SynthCorpus { papers, queries }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodAccuracy {
    pub method: RetrieverKind,
    pub name: &'static str,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub seed: u64,
    pub docs: usize,
    pub queries: usize,
    pub k: usize,
    pub results: Vec<MethodAccuracy>,
}

impl BenchReport {
    pub fn accuracy(&self, kind: RetrieverKind) -> f64 {
        self.results.iter().find(|r| r.method == kind).map(|r| r.accuracy).expect("all methods are reported")
    }

    /// Fixed-width table with accuracies as percentages.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "Retrieval accuracy (recall@{}) on {} synthetic papers, {} queries, seed {}",
            self.k, self.docs, self.queries, self.seed
        );
        let _ = writeln!(out, "{:<26} {:>9}", "Method", "Accuracy");
        for r in &self.results {
            let _ = writeln!(out, "{:<26} {:>8.1}%", r.name, r.accuracy * 100.0);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn run_benchmark(cfg: &SynthConfig) -> Result<BenchReport, RetrievalError> {
    let corpus = generate(cfg);
    let mut store = CorpusStore::new();
    store.insert_batch(corpus.papers);
    let snapshot = store.snapshot();
    let results = RetrieverKind::ALL
        .iter()
        .map(|&kind| {
            let index = Index::build(&snapshot, kind, None);
            Ok(MethodAccuracy {
                method: kind,
                name: kind.display_name(),
                accuracy: retrieval_accuracy(&index, &corpus.queries, cfg.k)?,
            })
        })
        .collect::<Result<_, RetrievalError>>()?;
    Ok(BenchReport { seed: cfg.seed, docs: cfg.docs, queries: cfg.queries, k: cfg.k, results })
}
