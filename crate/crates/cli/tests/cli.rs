use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn demo_corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/demo_corpus.jsonl")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spectraqa"))
        .arg("--corpus")
        .arg(demo_corpus())
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("spectraqa-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn ask_mock_json_cites_retrieved_papers() {
    let out = run(&[
        "--json",
        "ask",
        "--mock",
        "Which spectral method is suitable for the prediction of adulteration in barley?",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let body: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let hits: Vec<&str> = body["hits"].as_array().unwrap().iter().map(|h| h["paper_id"].as_str().unwrap()).collect();
    let cited: Vec<&str> = body["answer"]["citations"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
    assert!(!cited.is_empty());
    assert!(cited.iter().all(|c| hits.contains(c)), "{cited:?} not in {hits:?}");
}

#[test]
fn ask_without_gateway_is_usage_error() {
    let out = run(&["ask", "Which spectral method is suitable for the prediction of fat in milk?"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_report_is_reproducible() {
    let a = run(&["bench-retrieval", "--seed", "42"]);
    let b = run(&["bench-retrieval", "--seed", "42"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    for name in ["Bag of Words", "BM25", "TF-IDF cosine similarity"] {
        assert!(text.contains(name), "{text}");
    }
    let json: Value = serde_json::from_str(&stdout(&run(&["--json", "bench-retrieval"]))).unwrap();
    assert_eq!(json["seed"], 42);
    assert_eq!(json["results"].as_array().unwrap().len(), 3);
}

#[test]
fn bench_rejects_zero_sizes() {
    assert_eq!(run(&["bench-retrieval", "--docs", "0"]).status.code(), Some(2));
}

#[test]
fn missing_input_is_data_error() {
    let out = run(&["ingest", "definitely-missing.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(run(&["retrieve", "--nope", "apples"]).status.code(), Some(2));
    assert_eq!(run(&["retrieve", "--retriever", "lsi", "apples"]).status.code(), Some(2));
    assert_eq!(run(&["retrieve", "--k", "0", "apples"]).status.code(), Some(2));
}

#[test]
fn ingest_merges_and_reports_rejections() {
    let dir = scratch("ingest");
    let corpus = dir.join("corpus.jsonl");
    let _ = std::fs::remove_file(&corpus);
    let input = dir.join("in.jsonl");
    let demo = std::fs::read_to_string(demo_corpus()).unwrap();
    let first_two: Vec<&str> = demo.lines().take(2).collect();
    std::fs::write(&input, format!("{}\n{}\n{{\"id\":\"BAD\"}}\n", first_two[0], first_two[1])).unwrap();

    let out = Command::new(env!("CARGO_BIN_EXE_spectraqa"))
        .args(["--json", "--corpus"])
        .arg(&corpus)
        .arg("ingest")
        .arg(&input)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let summary: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(summary["accepted"], 2);
    assert_eq!(summary["rejected"].as_array().unwrap().len(), 1);
    assert_eq!(std::fs::read_to_string(&corpus).unwrap().lines().count(), 2);
}

#[test]
fn retrieve_json_is_ranked() {
    let out = run(&["--json", "retrieve", "--retriever", "bm25", "--k", "5", "barley adulteration"]);
    assert!(out.status.success());
    let body: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let hits = body["hits"].as_array().unwrap();
    assert!(!hits.is_empty() && hits.len() <= 5);
    let scores: Vec<f64> = hits.iter().map(|h| h["score"].as_f64().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn eval_metrics_scores_lines() {
    let dir = scratch("eval");
    let input = dir.join("pairs.jsonl");
    std::fs::write(&input, "{\"candidate\":\"a b c\",\"reference\":\"a b d\"}\n").unwrap();
    let out = run(&["--json", "eval-metrics", input.to_str().unwrap()]);
    assert!(out.status.success());
    let body: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((body["items"][0]["rouge1_f"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);

    std::fs::write(&input, "{\"candidate\":\"a\"}\n").unwrap();
    assert_eq!(run(&["eval-metrics", input.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn ift_export_is_byte_stable() {
    let corpus = demo_corpus();
    let a = run(&["ift-gen", "--mock", corpus.to_str().unwrap()]);
    let b = run(&["ift-gen", "--mock", corpus.to_str().unwrap()]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.lines().count() > 100);
    for line in text.lines() {
        let item: Value = serde_json::from_str(line).unwrap();
        assert!(item["source_paper"].as_str().unwrap().starts_with("DEMO-"));
    }
}

#[test]
fn demo_corpus_matches_shipped_file() {
    let out = run(&["demo-corpus"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), std::fs::read_to_string(demo_corpus()).unwrap());
}
