//! Lexical generation metrics (BLEU, ROUGE-1 F1, exact-match METEOR), batch
//! evaluation over JSON Lines, and the LLM judge.
//!
//! BLEU uses uniform weights over 1..=max_n, clipped n-gram precision, add-one
//! smoothing for n >= 2 and brevity penalty `exp(1 - r/c)` when `c <= r`.
//!
//! METEOR is the exact-match variant: no stemming, synonyms or paraphrase
//! tables. `F_mean = 10PR / (R + 9P)`, `penalty = 0.5 * (chunks / m)^3`.

mod batch;
mod judge;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::GatewayError;
use crate::textproc::{tokenize_for_eval, TokenStream};

pub use batch::{evaluate_batch, BatchItem, BatchReport, MetricMeans};
pub use judge::{ai_judge, JudgeRubric, JudgeVerdict, JUDGE_MARKER};

pub const DEFAULT_BLEU_N: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("reference is empty")]
    EmptyReference,
    #[error("line {line}: {reason}")]
    BadRecord { line: usize, reason: String },
    #[error("batch contains no records")]
    EmptyBatch,
    #[error("judge reply has no score in [1, 5]: {raw:?}")]
    JudgeMalformed { raw: String },
    #[error("judge gateway failed: {0}")]
    Gateway(#[from] GatewayError),
    #[error("rubric template: {0}")]
    Rubric(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub bleu: f64,
    pub rouge1_f: f64,
    pub meteor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ai_score: Option<f64>,
}

impl MetricReport {
    /// Lexical metrics of `candidate` against `reference`, both tokenized with
    /// [`tokenize_for_eval`].
    pub fn lexical(candidate: &str, reference: &str) -> Result<Self, EvalError> {
        let c = tokenize_for_eval(candidate);
        let r = tokenize_for_eval(reference);
        Ok(Self {
            bleu: bleu(&c, &r, DEFAULT_BLEU_N)?,
            rouge1_f: rouge1_f(&c, &r)?,
            meteor: meteor(&c, &r)?,
            ai_score: None,
        })
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

fn clipped_overlap(candidate: &[String], reference: &[String], n: usize) -> usize {
    let reference = ngram_counts(reference, n);
    ngram_counts(candidate, n)
        .into_iter()
        .map(|(gram, c)| c.min(reference.get(gram).copied().unwrap_or(0)))
        .sum()
}

pub fn bleu(candidate: &TokenStream, reference: &TokenStream, max_n: usize) -> Result<f64, EvalError> {
    if reference.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    let max_n = max_n.max(1);
    let (c, r) = (candidate.tokens(), reference.tokens());
    if c.is_empty() {
        return Ok(0.0);
    }

    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let matched = clipped_overlap(c, r, n) as f64;
        let total = c.len().saturating_sub(n - 1) as f64;
        let precision = if n == 1 { matched / total } else { (matched + 1.0) / (total + 1.0) };
        if precision == 0.0 {
            return Ok(0.0);
        }
        log_sum += precision.ln();
    }
    let (c_len, r_len) = (c.len() as f64, r.len() as f64);
    let brevity = if c_len <= r_len { (1.0 - r_len / c_len).exp() } else { 1.0 };
    Ok((brevity * (log_sum / max_n as f64).exp()).clamp(0.0, 1.0))
}

pub fn rouge1_f(candidate: &TokenStream, reference: &TokenStream) -> Result<f64, EvalError> {
    if reference.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    let overlap = clipped_overlap(candidate.tokens(), reference.tokens(), 1) as f64;
    if overlap == 0.0 {
        return Ok(0.0);
    }
    let p = overlap / candidate.len() as f64;
    let r = overlap / reference.len() as f64;
    Ok(2.0 * p * r / (p + r))
}

/// Exact unigram alignment, left to right over the candidate. Each token
/// prefers the reference position right after the previous alignment (to
/// extend the current chunk), otherwise the leftmost unused match.
/// Returns (candidate index, reference index) pairs.
fn align_exact(candidate: &[String], reference: &[String]) -> Vec<(usize, usize)> {
    let mut used = vec![false; reference.len()];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (ci, tok) in candidate.iter().enumerate() {
        let next = pairs.last().map(|&(_, ri)| ri + 1);
        let continues = next.filter(|&ri| ri < reference.len() && !used[ri] && reference[ri] == *tok);
        let chosen = continues
            .or_else(|| (0..reference.len()).find(|&ri| !used[ri] && reference[ri] == *tok));
        if let Some(ri) = chosen {
            used[ri] = true;
            pairs.push((ci, ri));
        }
    }
    pairs
}

fn count_chunks(pairs: &[(usize, usize)]) -> usize {
    pairs
        .iter()
        .enumerate()
        .filter(|&(i, &(c, r))| i == 0 || pairs[i - 1] != (c.wrapping_sub(1), r.wrapping_sub(1)))
        .count()
}

pub fn meteor(candidate: &TokenStream, reference: &TokenStream) -> Result<f64, EvalError> {
    if reference.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    let pairs = align_exact(candidate.tokens(), reference.tokens());
    let m = pairs.len() as f64;
    if m == 0.0 {
        return Ok(0.0);
    }
    let p = m / candidate.len() as f64;
    let r = m / reference.len() as f64;
    let f_mean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (count_chunks(&pairs) as f64 / m).powi(3);
    Ok(f_mean * (1.0 - penalty))
}
