//! Labeled-paper data model, validation, ingestion and JSON Lines persistence.
//!
//! Every paper carries two label groups: [`LabelA`] describes the spectral
//! experiment (object, property, spectral methods) and [`LabelB`] the
//! chemometrics workflow (preprocessing, feature processing, models, metrics).
//! Stored values are kept exactly as ingested; alias normalization happens at
//! index time.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CorpusError {
    #[error("paper not found: {0}")]
    NotFound(String),
    #[error("malformed paper id {id:?}: {reason}")]
    MalformedId { id: String, reason: &'static str },
}

/// Opaque, case-sensitive paper identifier (DOI or internal key).
///
/// Ids may not contain whitespace or square brackets, since answers cite
/// papers as `[paper_id]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PaperId(String);

impl PaperId {
    pub fn new(value: impl Into<String>) -> Result<Self, CorpusError> {
        let value = value.into();
        match id_problem(&value) {
            None => Ok(PaperId(value)),
            Some(reason) => Err(CorpusError::MalformedId { id: value, reason }),
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

fn id_problem(value: &str) -> Option<&'static str> {
    if value.is_empty() {
        Some("empty")
    } else if value.chars().any(|c| c.is_whitespace() || c == '[' || c == ']') {
        Some("contains whitespace or brackets")
    } else {
        None
    }
}

impl fmt::Display for PaperId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for PaperId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Spectral-experiment labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelA {
    pub research_object: String,
    pub measured_property: String,
    pub spectral_methods: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome_summary: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricOutcome {
    pub metric_name: String,
    pub value_text: String,
}

impl MetricOutcome {
    pub fn new(metric_name: impl Into<String>, value_text: impl Into<String>) -> Self {
        Self { metric_name: metric_name.into(), value_text: value_text.into() }
    }

    /// `metric_name: value_text`
    pub fn render(&self) -> String {
        format!("{}: {}", self.metric_name, self.value_text)
    }
}

/// Chemometrics labels.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelB {
    pub preprocessing_methods: Vec<String>,
    pub feature_processing_methods: Vec<String>,
    pub models: Vec<String>,
    pub metrics_and_outcomes: Vec<MetricOutcome>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paper {
    pub id: PaperId,
    pub title: String,
    pub year: i32,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub label_a: LabelA,
    pub label_b: LabelB,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<FieldError>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn messages(&self) -> Vec<String> {
        self.errors.iter().map(ToString::to_string).collect()
    }
}

pub const MIN_YEAR: i32 = 1900;
pub const MAX_YEAR: i32 = 2100;

/// Checks every `Paper` invariant and reports each violation once.
pub fn validate_paper(paper: &Paper) -> ValidationReport {
    let mut errors = Vec::new();

    if let Some(reason) = id_problem(paper.id.as_str()) {
        errors.push(FieldError::new("id", reason));
    }
    if !(MIN_YEAR..=MAX_YEAR).contains(&paper.year) {
        errors.push(FieldError::new(
            "year",
            format!("{} outside [{MIN_YEAR}, {MAX_YEAR}]", paper.year),
        ));
    }
    if paper.abstract_text.trim().is_empty() {
        errors.push(FieldError::new("abstract", "empty"));
    }

    let a = &paper.label_a;
    if a.spectral_methods.is_empty() {
        errors.push(FieldError::new("label_a.spectral_methods", "empty"));
    }
    check_string_list("label_a.spectral_methods", &a.spectral_methods, &mut errors);
    if let Some(summary) = &a.outcome_summary {
        if summary.trim().is_empty() {
            errors.push(FieldError::new("label_a.outcome_summary", "blank"));
        }
    }

    let b = &paper.label_b;
    check_string_list("label_b.preprocessing_methods", &b.preprocessing_methods, &mut errors);
    check_string_list(
        "label_b.feature_processing_methods",
        &b.feature_processing_methods,
        &mut errors,
    );
    check_string_list("label_b.models", &b.models, &mut errors);

    let mut seen = BTreeSet::new();
    let mut reported = BTreeSet::new();
    for (i, m) in b.metrics_and_outcomes.iter().enumerate() {
        if m.metric_name.trim().is_empty() {
            errors.push(FieldError::new(
                format!("label_b.metrics_and_outcomes[{i}].metric_name"),
                "blank",
            ));
        }
        if m.value_text.trim().is_empty() {
            errors.push(FieldError::new(
                format!("label_b.metrics_and_outcomes[{i}].value_text"),
                "blank",
            ));
        }
        if !seen.insert(m) && reported.insert(m) {
            errors.push(FieldError::new(
                "label_b.metrics_and_outcomes",
                format!("duplicate entry {:?}", m.render()),
            ));
        }
    }

    ValidationReport { errors }
}

fn check_string_list(field: &str, items: &[String], errors: &mut Vec<FieldError>) {
    let mut seen = BTreeSet::new();
    let mut reported = BTreeSet::new();
    for (i, item) in items.iter().enumerate() {
        if item.trim().is_empty() {
            errors.push(FieldError::new(format!("{field}[{i}]"), "blank"));
            continue;
        }
        if !seen.insert(item.as_str()) && reported.insert(item.as_str()) {
            errors.push(FieldError::new(field, format!("duplicate entry {item:?}")));
        }
    }
}

/// A record that failed ingestion. `line` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    pub line: usize,
    pub id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub rejected: Vec<Rejection>,
}

/// Id-keyed paper store with a revision counter.
///
/// Cloning is cheap: papers sit behind an `Arc` and are copied only when a
/// batch actually mutates the store.
#[derive(Debug, Clone, Default)]
pub struct CorpusStore {
    papers: Arc<BTreeMap<PaperId, Paper>>,
    revision: u64,
}

impl CorpusStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn len(&self) -> usize {
        self.papers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.papers.is_empty()
    }

    pub fn get_paper(&self, id: &PaperId) -> Result<&Paper, CorpusError> {
        self.papers.get(id).ok_or_else(|| CorpusError::NotFound(id.to_string()))
    }

    /// Lookup by raw string; a malformed id is reported distinctly from a
    /// well-formed id that is absent.
    pub fn get_by_str(&self, raw: &str) -> Result<&Paper, CorpusError> {
        let id = PaperId::new(raw)?;
        self.papers.get(&id).ok_or(CorpusError::NotFound(raw.to_string()))
    }

    /// Immutable view for indexing and knowledge assembly.
    pub fn snapshot(&self) -> CorpusSnapshot {
        CorpusSnapshot { papers: Arc::clone(&self.papers), revision: self.revision }
    }

    /// Validates and inserts already-parsed papers as one batch.
    pub fn insert_batch(&mut self, papers: Vec<Paper>) -> IngestReport {
        self.apply_batch(papers.into_iter().enumerate().map(|(i, p)| (i + 1, Ok(p))))
    }

    /// Ingests newline-delimited JSON records. Blank lines are skipped.
    pub fn ingest_str(&mut self, text: &str) -> IngestReport {
        self.apply_batch(
            text.lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
                .map(|(i, l)| (i + 1, parse_line(l))),
        )
    }

    pub fn ingest_reader<R: BufRead>(&mut self, reader: R) -> IngestReport {
        let lines: Vec<(usize, Result<Paper, String>)> = reader
            .lines()
            .enumerate()
            .filter_map(|(i, l)| match l {
                Ok(l) if l.trim().is_empty() => None,
                Ok(l) => Some((i + 1, parse_line(&l))),
                Err(e) => Some((i + 1, Err(format!("unreadable line: {e}")))),
            })
            .collect();
        self.apply_batch(lines.into_iter())
    }

    fn apply_batch(
        &mut self,
        records: impl Iterator<Item = (usize, Result<Paper, String>)>,
    ) -> IngestReport {
        let mut staged: BTreeMap<PaperId, Paper> = BTreeMap::new();
        let mut report = IngestReport::default();

        for (line, parsed) in records {
            let paper = match parsed {
                Ok(p) => p,
                Err(reason) => {
                    report.rejected.push(Rejection { line, id: None, reason });
                    continue;
                }
            };
            let id = Some(paper.id.to_string());
            let validation = validate_paper(&paper);
            if !validation.is_ok() {
                report.rejected.push(Rejection {
                    line,
                    id,
                    reason: validation.messages().join("; "),
                });
                continue;
            }
            if self.papers.contains_key(&paper.id) || staged.contains_key(&paper.id) {
                report.rejected.push(Rejection { line, id, reason: "duplicate id".into() });
                continue;
            }
            staged.insert(paper.id.clone(), paper);
        }

        report.accepted = staged.len();
        if !staged.is_empty() {
            Arc::make_mut(&mut self.papers).extend(staged);
            self.revision += 1;
        }
        report
    }

    /// JSON Lines, sorted by id, fixed field order.
    pub fn export_jsonl(&self) -> String {
        self.snapshot().export_jsonl()
    }
}

fn parse_line(line: &str) -> Result<Paper, String> {
    serde_json::from_str::<Paper>(line).map_err(|e| format!("parse error: {e}"))
}

/// Read-only view of the store at one revision.
#[derive(Debug, Clone, Default)]
pub struct CorpusSnapshot {
    papers: Arc<BTreeMap<PaperId, Paper>>,
    revision: u64,
}

impl CorpusSnapshot {
    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn len(&self) -> usize {
        self.papers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.papers.is_empty()
    }

    pub fn get(&self, id: &PaperId) -> Option<&Paper> {
        self.papers.get(id)
    }

    /// Papers in ascending id order.
    pub fn papers(&self) -> impl Iterator<Item = &Paper> {
        self.papers.values()
    }

    pub fn export_jsonl(&self) -> String {
        let mut out = String::new();
        for paper in self.papers.values() {
            // Serializing plain structs with string keys cannot fail.
            out.push_str(&serde_json::to_string(paper).expect("paper serializes"));
            out.push('\n');
        }
        out
    }
}
