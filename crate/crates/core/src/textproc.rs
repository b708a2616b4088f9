//! Tokenization, label normalization and corpus term statistics.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TextError {
    #[error("duplicate document id {0:?}")]
    DuplicateDoc(String),
}

pub const MIN_TOKEN_LEN: usize = 2;

/// Ordered lowercase terms. Tokens are never empty and never contain whitespace.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenStream(Vec<String>);

impl TokenStream {
    /// Builds a stream from pre-split terms, re-tokenizing each so the
    /// invariants hold regardless of input.
    pub fn from_terms<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        TokenStream(
            terms
                .into_iter()
                .flat_map(|t| split_terms(t.as_ref(), 1).collect::<Vec<_>>())
                .collect(),
        )
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }

    pub fn join(&self) -> String {
        self.0.join(" ")
    }

    pub fn extend(&mut self, other: TokenStream) {
        self.0.extend(other.0);
    }
}

impl<'a> IntoIterator for &'a TokenStream {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

fn split_terms(text: &str, min_len: usize) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(move |t| t.chars().count() >= min_len.max(1))
        .map(str::to_lowercase)
}

/// Retrieval tokenizer: lowercase, split on any non-alphanumeric character,
/// drop tokens shorter than two characters. No stemming, no stop words.
pub fn tokenize(text: &str) -> TokenStream {
    TokenStream(split_terms(text, MIN_TOKEN_LEN).collect())
}

/// Evaluation tokenizer: same splitting rule but keeps single-character tokens.
pub fn tokenize_for_eval(text: &str) -> TokenStream {
    TokenStream(split_terms(text, 1).collect())
}

/// Canonical spectral-method names with their lowercase aliases.
const SPECTRAL_METHOD_ALIASES: &[(&str, &[&str])] = &[
    ("NIR", &["nir", "nirs", "near-infrared", "near infrared", "near-infrared spectroscopy", "near infrared spectroscopy", "near-infrared spectra"]),
    ("Vis-NIR", &["vis-nir", "vis/nir", "visible-near infrared", "visible near-infrared", "visible and near-infrared"]),
    ("MIR", &["mir", "mid-infrared", "mid infrared", "mid-infrared spectroscopy"]),
    ("FTIR", &["ftir", "ft-ir", "fourier transform infrared", "fourier-transform infrared"]),
    ("Raman", &["raman", "raman spectroscopy", "raman spectra"]),
    ("SERS", &["sers", "surface-enhanced raman", "surface enhanced raman"]),
    ("UV-Vis", &["uv-vis", "uv/vis", "uv-visible", "ultraviolet-visible", "ultraviolet visible"]),
    ("HSI", &["hsi", "hyperspectral", "hyperspectral imaging"]),
    ("LIBS", &["libs", "laser-induced breakdown spectroscopy", "laser induced breakdown spectroscopy"]),
    ("Fluorescence", &["fluorescence", "fluorescence spectroscopy"]),
    ("THz", &["thz", "terahertz", "terahertz spectroscopy"]),
];

/// Chemometrics vocabulary: preprocessing, feature processing, models.
const CHEMOMETRICS_ALIASES: &[(&str, &[&str])] = &[
    ("SNV", &["snv", "standard normal variate"]),
    ("MSC", &["msc", "multiplicative scatter correction"]),
    ("SG", &["sg", "savitzky-golay", "savitzky golay", "savitzky-golay smoothing"]),
    // feature processing
    ("PCA", &["pca", "principal component analysis"]),
    ("CARS", &["cars", "competitive adaptive reweighted sampling"]),
    ("SPA", &["spa", "successive projections algorithm"]),
    ("UVE", &["uve", "uninformative variable elimination"]),
    // models
    ("PLS", &["pls", "plsr", "partial least squares", "partial least squares regression"]),
    ("PLS-DA", &["pls-da", "plsda", "partial least squares discriminant analysis"]),
    ("SVM", &["svm", "support vector machine", "support vector machines"]),
    ("LS-SVM", &["ls-svm", "lssvm", "least squares support vector machine"]),
    ("RF", &["rf", "random forest", "random forests"]),
    ("ANN", &["ann", "artificial neural network", "artificial neural networks"]),
    ("CNN", &["cnn", "convolutional neural network", "convolutional neural networks"]),
];

fn collapse(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn alias_lookup(collapsed: &str) -> Option<&'static str> {
    SPECTRAL_METHOD_ALIASES
        .iter()
        .chain(CHEMOMETRICS_ALIASES)
        .find(|(_, aliases)| aliases.contains(&collapsed))
        .map(|(canonical, _)| *canonical)
}

/// Equality key for label values: lowercase, trimmed, whitespace collapsed,
/// aliases mapped to their canonical name (also lowercased).
pub fn normalize_label(raw: &str) -> String {
    let collapsed = collapse(raw);
    match alias_lookup(&collapsed) {
        Some(canonical) => canonical.to_lowercase(),
        None => collapsed,
    }
}

/// Display form: the canonical name when an alias is known, else the trimmed input.
pub fn canonical_label(raw: &str) -> String {
    match alias_lookup(&collapse(raw)) {
        Some(canonical) => canonical.to_string(),
        None => raw.trim().to_string(),
    }
}

/// Canonical names of known spectral methods, paired with their aliases.
pub fn spectral_method_aliases() -> impl Iterator<Item = (&'static str, &'static [&'static str])> {
    SPECTRAL_METHOD_ALIASES.iter().copied()
}

/// Corpus-level statistics. Term ids are assigned in order of first
/// appearance, so a fixed document order gives a fixed vocabulary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TermStats {
    vocabulary: HashMap<String, u32>,
    terms: Vec<String>,
    doc_freq: Vec<u32>,
    doc_ids: Vec<String>,
    doc_lengths: Vec<u32>,
    avg_doc_len: f64,
}

impl TermStats {
    pub fn from_tokenized<S: AsRef<str>>(docs: &[(S, TokenStream)]) -> Result<Self, TextError> {
        let mut stats = TermStats::default();
        let mut seen_docs = HashSet::new();
        let mut total: u64 = 0;

        for (id, tokens) in docs {
            let id = id.as_ref();
            if !seen_docs.insert(id) {
                return Err(TextError::DuplicateDoc(id.to_string()));
            }
            let mut in_doc = HashSet::new();
            for tok in tokens {
                let tid = stats.intern(tok);
                if in_doc.insert(tid) {
                    stats.doc_freq[tid as usize] += 1;
                }
            }
            stats.doc_ids.push(id.to_string());
            stats.doc_lengths.push(tokens.len() as u32);
            total += tokens.len() as u64;
        }
        if !docs.is_empty() {
            stats.avg_doc_len = total as f64 / docs.len() as f64;
        }
        Ok(stats)
    }

    fn intern(&mut self, term: &str) -> u32 {
        if let Some(&id) = self.vocabulary.get(term) {
            return id;
        }
        let id = self.terms.len() as u32;
        self.vocabulary.insert(term.to_string(), id);
        self.terms.push(term.to_string());
        self.doc_freq.push(0);
        id
    }

    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.terms.len()
    }

    pub fn term_id(&self, term: &str) -> Option<u32> {
        self.vocabulary.get(term).copied()
    }

    pub fn term(&self, id: u32) -> &str {
        &self.terms[id as usize]
    }

    /// 0 for terms outside the vocabulary.
    pub fn doc_freq(&self, term: &str) -> u32 {
        self.term_id(term).map_or(0, |id| self.doc_freq[id as usize])
    }

    pub(crate) fn doc_freq_by_id(&self, id: u32) -> u32 {
        self.doc_freq[id as usize]
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_lengths(&self) -> &[u32] {
        &self.doc_lengths
    }

    pub fn doc_length(&self, doc: &str) -> Option<u32> {
        self.doc_ids.iter().position(|d| d == doc).map(|i| self.doc_lengths[i])
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }
}

/// Tokenizes each document's fields (joined by a space) and gathers statistics.
pub fn build_stats<S, F>(docs: &[(S, Vec<F>)]) -> Result<TermStats, TextError>
where
    S: AsRef<str>,
    F: AsRef<str>,
{
    let tokenized: Vec<(&str, TokenStream)> = docs
        .iter()
        .map(|(id, fields)| {
            let text = fields.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" ");
            (id.as_ref(), tokenize(&text))
        })
        .collect();
    TermStats::from_tokenized(&tokenized)
}
