//! Lexical retrievers over the labeled corpus: bag-of-words cosine, Okapi
//! BM25 and TF-IDF cosine, sharing one index layout and one top-k contract.
//!
//! Weights:
//!
//! * TF-IDF: `w(t, x) = tf(t, x) * (ln((1 + N) / (1 + df)) + 1)`, cosine of
//!   query and document vectors.
//! * BoW: cosine of raw term-count vectors.
//! * BM25: `Σ idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * |d| / avgdl))`
//!   with `idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))`, each distinct query
//!   term counted once.
//!
//! The vector space is the index vocabulary: query terms never seen at build
//! time carry no weight in any scorer.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusSnapshot, Paper, PaperId};
use crate::textproc::{normalize_label, tokenize, TermStats, TokenStream};

/// Largest gap between adjacent ranked scores still treated as a tie.
pub const TIE_EPSILON: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RetrievalError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("scorer {requested} called on a {actual} index")]
    KindMismatch { requested: RetrieverKind, actual: RetrieverKind },
    #[error("document {0} is not in the index")]
    UnknownDoc(String),
    #[error("invalid BM25 parameters: {0}")]
    InvalidParams(String),
    #[error("accuracy needs at least one query")]
    NoQueries,
    #[error("query {0} has an empty relevant set")]
    EmptyRelevant(usize),
    #[error("duplicate document id {0:?}")]
    DuplicateDoc(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RetrieverKind {
    #[serde(rename = "bow")]
    BagOfWords,
    #[serde(rename = "bm25")]
    Bm25,
    #[serde(rename = "tfidf")]
    TfidfCosine,
}

impl RetrieverKind {
    pub const ALL: [RetrieverKind; 3] =
        [RetrieverKind::BagOfWords, RetrieverKind::Bm25, RetrieverKind::TfidfCosine];

    pub fn as_str(self) -> &'static str {
        match self {
            RetrieverKind::BagOfWords => "bow",
            RetrieverKind::Bm25 => "bm25",
            RetrieverKind::TfidfCosine => "tfidf",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            RetrieverKind::BagOfWords => "Bag of Words",
            RetrieverKind::Bm25 => "BM25",
            RetrieverKind::TfidfCosine => "TF-IDF cosine similarity",
        }
    }
}

impl fmt::Display for RetrieverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RetrieverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bow" | "bagofwords" | "bag-of-words" => Ok(RetrieverKind::BagOfWords),
            "bm25" => Ok(RetrieverKind::Bm25),
            "tfidf" | "tf-idf" | "tfidf-cosine" => Ok(RetrieverKind::TfidfCosine),
            other => Err(format!("unknown retriever {other:?} (expected bow, bm25 or tfidf)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Bm25Params {
    pub fn new(k1: f64, b: f64) -> Result<Self, RetrievalError> {
        if !(k1 > 0.0 && k1.is_finite()) {
            return Err(RetrievalError::InvalidParams(format!("k1 = {k1} must be > 0")));
        }
        if !(0.0..=1.0).contains(&b) {
            return Err(RetrievalError::InvalidParams(format!("b = {b} must be in [0, 1]")));
        }
        Ok(Self { k1, b })
    }
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.5, b: 0.75 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedHit {
    pub paper_id: PaperId,
    pub score: f64,
    pub rank: usize,
}

/// Text indexed for a paper: title, abstract, then every label string.
/// Label values go through alias normalization first.
pub fn indexed_text(paper: &Paper) -> String {
    let a = &paper.label_a;
    let b = &paper.label_b;
    let mut parts: Vec<String> = vec![
        paper.title.clone(),
        paper.abstract_text.clone(),
        a.research_object.clone(),
        a.measured_property.clone(),
    ];
    parts.extend(a.spectral_methods.iter().map(|m| normalize_label(m)));
    parts.extend(a.outcome_summary.iter().cloned());
    for list in [&b.preprocessing_methods, &b.feature_processing_methods, &b.models] {
        parts.extend(list.iter().map(|m| normalize_label(m)));
    }
    parts.extend(b.metrics_and_outcomes.iter().map(|m| m.render()));
    parts.join(" ")
}

#[derive(Debug, Clone)]
struct DocEntry {
    id: PaperId,
    /// (term id, tf) sorted by term id
    terms: Vec<(u32, u32)>,
    len: u32,
}

/// Immutable lexical index. Rebuilding from the same documents gives
/// bit-identical scores.
#[derive(Debug, Clone)]
pub struct Index {
    kind: RetrieverKind,
    params: Option<Bm25Params>,
    stats: TermStats,
    docs: Vec<DocEntry>,
    by_id: HashMap<PaperId, usize>,
    postings: Vec<Vec<(u32, u32)>>,
    idf: Vec<f64>,
    doc_norms: Vec<f64>,
    built_from_revision: u64,
}

impl Index {
    /// Indexes every paper of the snapshot in id order.
    pub fn build(
        snapshot: &CorpusSnapshot,
        kind: RetrieverKind,
        params: Option<Bm25Params>,
    ) -> Index {
        let docs = snapshot.papers().map(|p| (p.id.clone(), tokenize(&indexed_text(p))));
        // ids in a snapshot are unique by construction
        Self::from_tokenized(kind, params, docs, snapshot.revision())
            .expect("snapshot ids are unique")
    }

    pub fn from_texts<I, S>(
        kind: RetrieverKind,
        params: Option<Bm25Params>,
        docs: I,
        revision: u64,
    ) -> Result<Index, RetrievalError>
    where
        I: IntoIterator<Item = (PaperId, S)>,
        S: AsRef<str>,
    {
        Self::from_tokenized(
            kind,
            params,
            docs.into_iter().map(|(id, text)| (id, tokenize(text.as_ref()))),
            revision,
        )
    }

    pub fn from_tokenized<I>(
        kind: RetrieverKind,
        params: Option<Bm25Params>,
        docs: I,
        revision: u64,
    ) -> Result<Index, RetrievalError>
    where
        I: IntoIterator<Item = (PaperId, TokenStream)>,
    {
        let docs: Vec<(PaperId, TokenStream)> = docs.into_iter().collect();
        let stats = TermStats::from_tokenized(
            &docs.iter().map(|(id, t)| (id.as_str(), t.clone())).collect::<Vec<_>>(),
        )
        .map_err(|e| match e {
            crate::textproc::TextError::DuplicateDoc(d) => RetrievalError::DuplicateDoc(d),
        })?;

        let params = match kind {
            RetrieverKind::Bm25 => Some(params.unwrap_or_default()),
            _ => None,
        };

        let mut postings: Vec<Vec<(u32, u32)>> = vec![Vec::new(); stats.vocab_size()];
        let mut entries = Vec::with_capacity(docs.len());
        let mut by_id = HashMap::with_capacity(docs.len());
        for (doc_idx, (id, tokens)) in docs.into_iter().enumerate() {
            let mut counts: HashMap<u32, u32> = HashMap::new();
            for tok in &tokens {
                let tid = stats.term_id(tok).expect("token interned during stats build");
                *counts.entry(tid).or_default() += 1;
            }
            let mut terms: Vec<(u32, u32)> = counts.into_iter().collect();
            terms.sort_unstable();
            for &(tid, tf) in &terms {
                postings[tid as usize].push((doc_idx as u32, tf));
            }
            by_id.insert(id.clone(), doc_idx);
            entries.push(DocEntry { id, terms, len: tokens.len() as u32 });
        }

        let n = stats.num_docs() as f64;
        let idf: Vec<f64> = (0..stats.vocab_size() as u32)
            .map(|tid| {
                let df = stats.doc_freq_by_id(tid) as f64;
                match kind {
                    RetrieverKind::TfidfCosine => tfidf_idf(n, df),
                    RetrieverKind::Bm25 => bm25_idf(n, df),
                    RetrieverKind::BagOfWords => 1.0,
                }
            })
            .collect();

        let doc_norms = entries
            .iter()
            .map(|d| match kind {
                RetrieverKind::Bm25 => 0.0,
                _ => d
                    .terms
                    .iter()
                    .map(|&(tid, tf)| {
                        let w = tf as f64 * idf[tid as usize];
                        w * w
                    })
                    .sum::<f64>()
                    .sqrt(),
            })
            .collect();

        Ok(Index {
            kind,
            params,
            stats,
            docs: entries,
            by_id,
            postings,
            idf,
            doc_norms,
            built_from_revision: revision,
        })
    }

    pub fn kind(&self) -> RetrieverKind {
        self.kind
    }

    pub fn params(&self) -> Option<Bm25Params> {
        self.params
    }

    pub fn stats(&self) -> &TermStats {
        &self.stats
    }

    pub fn built_from_revision(&self) -> u64 {
        self.built_from_revision
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &PaperId> {
        self.docs.iter().map(|d| &d.id)
    }

    /// Term frequency of `term` in `doc`; 0 when either is unknown.
    pub fn term_frequency(&self, doc: &PaperId, term: &str) -> u32 {
        let (Some(&idx), Some(tid)) = (self.by_id.get(doc), self.stats.term_id(term)) else {
            return 0;
        };
        lookup_tf(&self.docs[idx].terms, tid)
    }

    /// Query as (term id, query weight) in first-occurrence order.
    /// Cosine kinds weight by query tf (times idf); BM25 keeps each term once.
    fn query_weights(&self, query: &TokenStream) -> Vec<(u32, f64)> {
        let mut order: Vec<u32> = Vec::new();
        let mut counts: HashMap<u32, u32> = HashMap::new();
        for tok in query {
            if let Some(tid) = self.stats.term_id(tok) {
                let c = counts.entry(tid).or_insert(0);
                if *c == 0 {
                    order.push(tid);
                }
                *c += 1;
            }
        }
        order
            .into_iter()
            .map(|tid| {
                let w = match self.kind {
                    RetrieverKind::Bm25 => 1.0,
                    _ => counts[&tid] as f64 * self.idf[tid as usize],
                };
                (tid, w)
            })
            .collect()
    }

    fn bm25_term(&self, tid: u32, tf: u32, doc_len: u32) -> f64 {
        let p = self.params.unwrap_or_default();
        bm25_term_score(self.idf[tid as usize], tf as f64, doc_len as f64, self.stats.avg_doc_len(), p)
    }

    /// Score of one document under this index's own scorer.
    pub fn score(&self, query: &TokenStream, doc: &PaperId) -> Result<f64, RetrievalError> {
        let &idx = self.by_id.get(doc).ok_or_else(|| RetrievalError::UnknownDoc(doc.to_string()))?;
        let entry = &self.docs[idx];
        let weights = self.query_weights(query);

        match self.kind {
            RetrieverKind::Bm25 => Ok(weights
                .iter()
                .map(|&(tid, _)| match lookup_tf(&entry.terms, tid) {
                    0 => 0.0,
                    tf => self.bm25_term(tid, tf, entry.len),
                })
                .fold(0.0, |acc, s| acc + s)),
            _ => {
                let mut dot = 0.0;
                for &(tid, qw) in &weights {
                    let tf = lookup_tf(&entry.terms, tid);
                    dot += qw * (tf as f64 * self.idf[tid as usize]);
                }
                Ok(cosine(dot, query_norm(&weights), self.doc_norms[idx]))
            }
        }
    }

    fn scores_all(&self, query: &TokenStream) -> Vec<f64> {
        let weights = self.query_weights(query);
        let mut acc = vec![0.0f64; self.docs.len()];
        for &(tid, qw) in &weights {
            for &(doc, tf) in &self.postings[tid as usize] {
                let d = doc as usize;
                acc[d] += match self.kind {
                    RetrieverKind::Bm25 => self.bm25_term(tid, tf, self.docs[d].len),
                    _ => qw * (tf as f64 * self.idf[tid as usize]),
                };
            }
        }
        if self.kind != RetrieverKind::Bm25 {
            let qn = query_norm(&weights);
            for (d, s) in acc.iter_mut().enumerate() {
                *s = cosine(*s, qn, self.doc_norms[d]);
            }
        }
        acc
    }

    /// Every document with a positive score, best first, ties by ascending id.
    /// Scores within [`TIE_EPSILON`] of their neighbour count as tied, so
    /// rounding noise between equal scores does not decide the order.
    pub fn rank_all(&self, query: &TokenStream) -> Vec<RankedHit> {
        let scores = self.scores_all(query);
        let mut scored: Vec<(usize, f64)> =
            scores.into_iter().enumerate().filter(|&(_, s)| s > 0.0).collect();
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(Ordering::Equal)
                .then_with(|| self.docs[a.0].id.cmp(&self.docs[b.0].id))
        });
        let mut start = 0;
        for end in 1..=scored.len() {
            if end == scored.len() || scored[end - 1].1 - scored[end].1 > TIE_EPSILON {
                scored[start..end].sort_by(|a, b| self.docs[a.0].id.cmp(&self.docs[b.0].id));
                start = end;
            }
        }
        scored
            .into_iter()
            .enumerate()
            .map(|(i, (d, score))| RankedHit { paper_id: self.docs[d].id.clone(), score, rank: i + 1 })
            .collect()
    }

    pub fn retrieve_top_k(
        &self,
        query: &TokenStream,
        k: usize,
    ) -> Result<Vec<RankedHit>, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::ZeroK);
        }
        let mut hits = self.rank_all(query);
        hits.truncate(k);
        Ok(hits)
    }
}

fn lookup_tf(terms: &[(u32, u32)], tid: u32) -> u32 {
    terms
        .binary_search_by_key(&tid, |&(t, _)| t)
        .map_or(0, |i| terms[i].1)
}

fn query_norm(weights: &[(u32, f64)]) -> f64 {
    weights.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt()
}

fn cosine(dot: f64, a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    (dot / (a * b)).clamp(0.0, 1.0)
}

pub fn tfidf_idf(n: f64, df: f64) -> f64 {
    ((1.0 + n) / (1.0 + df)).ln() + 1.0
}

pub fn bm25_idf(n: f64, df: f64) -> f64 {
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

/// One term's BM25 contribution.
pub fn bm25_term_score(idf: f64, tf: f64, doc_len: f64, avg_doc_len: f64, p: Bm25Params) -> f64 {
    if tf == 0.0 {
        return 0.0;
    }
    let norm = if avg_doc_len > 0.0 { doc_len / avg_doc_len } else { 0.0 };
    idf * tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * norm))
}

fn expect_kind(index: &Index, requested: RetrieverKind) -> Result<(), RetrievalError> {
    if index.kind == requested {
        Ok(())
    } else {
        Err(RetrievalError::KindMismatch { requested, actual: index.kind })
    }
}

pub fn score_tfidf_cosine(index: &Index, query: &TokenStream, doc: &PaperId) -> Result<f64, RetrievalError> {
    expect_kind(index, RetrieverKind::TfidfCosine)?;
    index.score(query, doc)
}

pub fn score_bm25(index: &Index, query: &TokenStream, doc: &PaperId) -> Result<f64, RetrievalError> {
    expect_kind(index, RetrieverKind::Bm25)?;
    index.score(query, doc)
}

pub fn score_bow(index: &Index, query: &TokenStream, doc: &PaperId) -> Result<f64, RetrievalError> {
    expect_kind(index, RetrieverKind::BagOfWords)?;
    index.score(query, doc)
}

/// A query with the set of papers that answer it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgedQuery {
    pub query: TokenStream,
    pub relevant: BTreeSet<PaperId>,
}

/// Mean over queries of `|top-k ∩ relevant| / |relevant|`.
pub fn retrieval_accuracy(
    index: &Index,
    queries: &[JudgedQuery],
    k: usize,
) -> Result<f64, RetrievalError> {
    if queries.is_empty() {
        return Err(RetrievalError::NoQueries);
    }
    if let Some(i) = queries.iter().position(|q| q.relevant.is_empty()) {
        return Err(RetrievalError::EmptyRelevant(i));
    }
    let mut total = 0.0;
    for q in queries {
        let hits = index.retrieve_top_k(&q.query, k)?;
        let found = hits.iter().filter(|h| q.relevant.contains(&h.paper_id)).count();
        total += found as f64 / q.relevant.len() as f64;
    }
    Ok(total / queries.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pid(s: &str) -> PaperId {
        PaperId::new(s).unwrap()
    }

    fn idx(kind: RetrieverKind, docs: &[(&str, &str)]) -> Index {
        Index::from_texts(kind, None, docs.iter().map(|(i, t)| (pid(i), *t)), 0).unwrap()
    }

    const THREE: [(&str, &str); 3] = [
        ("d1", "apple sweetness nir"),
        ("d2", "apple firmness raman"),
        ("d3", "wheat protein nir"),
    ];

    #[test]
    fn empty_index_returns_nothing() {
        for kind in RetrieverKind::ALL {
            let index = idx(kind, &[]);
            assert_eq!(index.stats().num_docs(), 0);
            assert!(index.retrieve_top_k(&tokenize("apple"), 10).unwrap().is_empty());
        }
    }

    #[test]
    fn tfidf_identity_and_orthogonality() {
        let index = idx(RetrieverKind::TfidfCosine, &[("d1", "nir"), ("d2", "raman")]);
        let s = score_tfidf_cosine(&index, &tokenize("nir"), &pid("d1")).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(score_tfidf_cosine(&index, &tokenize("nir"), &pid("d2")).unwrap(), 0.0);
    }

    #[test]
    fn tfidf_three_doc_ranking() {
        let index = idx(RetrieverKind::TfidfCosine, &THREE);
        let hits = index.retrieve_top_k(&tokenize("apple nir"), 10).unwrap();
        let ids: Vec<_> = hits.iter().map(|h| h.paper_id.as_str()).collect();
        assert_eq!(hits.len(), 3);
        assert_eq!(ids[0], "d1");
        assert!(hits[0].score > hits[1].score);
        // idf(apple) = idf(nir) = ln(4/3) + 1; d2 and d3 tie, then id order
        assert_eq!(ids[1..], ["d2", "d3"]);
        assert_eq!(hits[1].score, hits[2].score);
    }

    #[test]
    fn bm25_single_doc_hand_value() {
        let index = idx(RetrieverKind::Bm25, &[("d1", "nir")]);
        let s = score_bm25(&index, &tokenize("nir"), &pid("d1")).unwrap();
        let expected = (4.0f64 / 3.0).ln();
        assert!((s - expected).abs() < 1e-12);
        assert!((s - 0.2877).abs() < 1e-4);
        assert_eq!(score_bm25(&index, &tokenize("raman"), &pid("d1")).unwrap(), 0.0);
    }

    #[test]
    fn bm25_monotone_in_tf() {
        let mut last = 0.0;
        for tf in 1..6 {
            let s = bm25_term_score(0.5, tf as f64, 10.0, 10.0, Bm25Params::default());
            assert!(s > last);
            last = s;
        }
    }

    #[test]
    fn bm25_query_terms_deduplicated() {
        let index = idx(RetrieverKind::Bm25, &[("d1", "nir apple"), ("d2", "wheat")]);
        let once = score_bm25(&index, &tokenize("nir"), &pid("d1")).unwrap();
        let twice = score_bm25(&index, &tokenize("nir nir"), &pid("d1")).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn bow_hand_value() {
        let index = idx(RetrieverKind::BagOfWords, &[("d1", "apple nir"), ("d2", "x")]);
        let s = score_bow(&index, &tokenize("apple apple"), &pid("d1")).unwrap();
        assert!((s - 2.0 / (2.0 * 2f64.sqrt())).abs() < 1e-12);
        assert!((s - 0.7071).abs() < 1e-4);
        let s = score_bow(&index, &tokenize("nir apple"), &pid("d1")).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scorer_kind_is_checked() {
        let index = idx(RetrieverKind::Bm25, &THREE);
        assert!(matches!(
            score_bow(&index, &tokenize("nir"), &pid("d1")),
            Err(RetrievalError::KindMismatch { .. })
        ));
    }

    #[test]
    fn zero_k_is_rejected() {
        let index = idx(RetrieverKind::TfidfCosine, &THREE);
        assert_eq!(index.retrieve_top_k(&tokenize("nir"), 0), Err(RetrievalError::ZeroK));
    }

    #[test]
    fn no_indexed_terms_no_hits() {
        let index = idx(RetrieverKind::Bm25, &THREE);
        assert!(index.retrieve_top_k(&tokenize("banana"), 5).unwrap().is_empty());
    }

    #[test]
    fn equal_scores_order_by_id() {
        let index = idx(RetrieverKind::TfidfCosine, &[("zz", "nir"), ("aa", "nir"), ("mm", "nir")]);
        let hits = index.retrieve_top_k(&tokenize("nir"), 3).unwrap();
        let ids: Vec<_> = hits.iter().map(|h| h.paper_id.as_str()).collect();
        assert_eq!(ids, ["aa", "mm", "zz"]);
        assert_eq!(hits.iter().map(|h| h.rank).collect::<Vec<_>>(), [1, 2, 3]);
    }

    #[test]
    fn accuracy_cases() {
        let index = idx(RetrieverKind::TfidfCosine, &THREE);
        let q = |t: &str, rel: &[&str]| JudgedQuery {
            query: tokenize(t),
            relevant: rel.iter().map(|r| pid(r)).collect(),
        };
        assert_eq!(retrieval_accuracy(&index, &[q("apple nir", &["d1"])], 10).unwrap(), 1.0);
        assert_eq!(retrieval_accuracy(&index, &[q("wheat", &["d1"])], 10).unwrap(), 0.0);
        assert_eq!(retrieval_accuracy(&index, &[q("apple", &["d1", "d3"])], 10).unwrap(), 0.5);
        assert_eq!(retrieval_accuracy(&index, &[], 10), Err(RetrievalError::NoQueries));
        assert_eq!(
            retrieval_accuracy(&index, &[q("apple", &[])], 10),
            Err(RetrievalError::EmptyRelevant(0))
        );
    }

    #[test]
    fn bm25_params_validated() {
        assert!(Bm25Params::new(0.0, 0.5).is_err());
        assert!(Bm25Params::new(1.2, 1.1).is_err());
        assert!(Bm25Params::new(1.2, 0.0).is_ok());
    }

    #[test]
    fn retriever_kind_parses() {
        assert_eq!("TFIDF".parse::<RetrieverKind>().unwrap(), RetrieverKind::TfidfCosine);
        assert!("dense".parse::<RetrieverKind>().is_err());
    }
}
