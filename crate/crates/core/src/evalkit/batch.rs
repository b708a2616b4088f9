use serde::{Deserialize, Serialize};

use super::{EvalError, MetricReport};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    candidate: String,
    reference: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchItem {
    pub line: usize,
    pub bleu: f64,
    pub rouge1_f: f64,
    pub meteor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricMeans {
    pub bleu: f64,
    pub rouge1_f: f64,
    pub meteor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub count: usize,
    pub items: Vec<BatchItem>,
    pub mean: MetricMeans,
}

/// Scores JSON Lines of `{candidate, reference}`. Blank lines are skipped;
/// any unreadable record or empty reference fails the whole batch.
pub fn evaluate_batch(jsonl: &str) -> Result<BatchReport, EvalError> {
    let mut items = Vec::new();
    for (i, line) in jsonl.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let record: Record = serde_json::from_str(line)
            .map_err(|e| EvalError::BadRecord { line: line_no, reason: e.to_string() })?;
        let m = MetricReport::lexical(&record.candidate, &record.reference)
            .map_err(|e| EvalError::BadRecord { line: line_no, reason: e.to_string() })?;
        items.push(BatchItem { line: line_no, bleu: m.bleu, rouge1_f: m.rouge1_f, meteor: m.meteor });
    }
    if items.is_empty() {
        return Err(EvalError::EmptyBatch);
    }
    let n = items.len() as f64;
    let mean = MetricMeans {
        bleu: items.iter().map(|i| i.bleu).sum::<f64>() / n,
        rouge1_f: items.iter().map(|i| i.rouge1_f).sum::<f64>() / n,
        meteor: items.iter().map(|i| i.meteor).sum::<f64>() / n,
    };
    Ok(BatchReport { count: items.len(), items, mean })
}
