use std::sync::Arc;
use std::time::Duration;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;

use spectraqa::demo::{demo_papers, demo_store};
use spectraqa::gateway::{MockGateway, MockReply};
use spectraqa::pipeline::QaPipeline;
use spectraqa::qparse::RuleBasedExtractor;
use spectraqa_server::{app, gateway_state, offline_state, AppState};

fn demo_app() -> Router {
    app(Arc::new(offline_state(demo_store())), None).unwrap()
}

async fn call(app: &Router, method: &str, uri: &str, body: impl Into<Body>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).body(body.into()).unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = to_bytes(res.into_body(), usize::MAX).await.unwrap();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn post_json(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, "POST", uri, body.to_string()).await
}

fn method_question() -> String {
    let p = &demo_papers()[0];
    format!(
        "Which spectral method is suitable for the prediction of {} in {}?",
        p.label_a.measured_property, p.label_a.research_object
    )
}

fn ids(values: &Value) -> Vec<String> {
    values.as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect()
}

#[tokio::test]
async fn ask_returns_cited_answer_with_trace() {
    let app = demo_app();
    let (status, body) = post_json(&app, "/api/ask", json!({ "question": method_question() })).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert!(!body["hits"].as_array().unwrap().is_empty());
    assert_eq!(body["retriever"], "tfidf");
    assert_eq!(body["parsed"]["task"], "spectral_method_selection");
    let citations = ids(&body["answer"]["citations"]);
    assert!(!citations.is_empty());
    let snippet_ids: Vec<String> =
        body["snippets"].as_array().unwrap().iter().map(|s| s["paper_id"].as_str().unwrap().to_string()).collect();
    assert!(citations.iter().all(|c| snippet_ids.contains(c)));
}

#[tokio::test]
async fn ask_accepts_retriever_and_k() {
    let app = demo_app();
    let (status, body) =
        post_json(&app, "/api/ask", json!({ "question": method_question(), "retriever": "bm25", "k": 3 })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["retriever"], "bm25");
    assert!(body["hits"].as_array().unwrap().len() <= 3);
    let (status, _) = post_json(&app, "/api/ask", json!({ "question": method_question(), "retriever": "lsi" })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn empty_question_is_400() {
    let (status, body) = post_json(&demo_app(), "/api/ask", json!({ "question": "  " })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["stage"], "extraction");
    let (status, _) = call(&demo_app(), "POST", "/api/ask", "not json").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn unparseable_question_is_422() {
    let (status, body) = post_json(&demo_app(), "/api/ask", json!({ "question": "hello there" })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["stage"], "extraction");
}

#[tokio::test]
async fn gateway_down_names_stage() {
    let down = Arc::new(MockGateway::new(MockReply::Unavailable));
    let llm_app = app(Arc::new(gateway_state(demo_store(), down.clone())), None).unwrap();
    let (status, body) = post_json(&llm_app, "/api/ask", json!({ "question": method_question() })).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(body["stage"], "extraction");

    let extractor = Arc::new(RuleBasedExtractor);
    let state = AppState::new(demo_store(), QaPipeline::new(extractor.clone(), down), extractor);
    let rule_app = app(Arc::new(state), None).unwrap();
    let (status, body) = post_json(&rule_app, "/api/ask", json!({ "question": method_question() })).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(body["stage"], "generation");
}

#[tokio::test]
async fn retrieve_bounds_and_ranks() {
    let app = demo_app();
    let p = &demo_papers()[0];
    let terms = format!("{} {}", p.label_a.research_object, p.label_a.measured_property);
    for retriever in ["bow", "bm25", "tfidf"] {
        let (status, body) =
            post_json(&app, "/api/retrieve", json!({ "query_terms": terms, "retriever": retriever, "k": 10 })).await;
        assert_eq!(status, StatusCode::OK);
        let hits = body["hits"].as_array().unwrap();
        assert!(!hits.is_empty() && hits.len() <= 10);
        for (i, h) in hits.iter().enumerate() {
            assert_eq!(h["rank"].as_u64().unwrap() as usize, i + 1);
        }
    }
    let (status, body) = post_json(&app, "/api/retrieve", json!({ "question": method_question() })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["hits"][0]["rank"], 1);
    let (status, _) = post_json(&app, "/api/retrieve", json!({ "query_terms": ["apples"], "k": 0 })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = post_json(&app, "/api/retrieve", json!({})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn paper_lookup() {
    let app = demo_app();
    let (status, body) = call(&app, "GET", "/api/papers/DEMO-001", Body::empty()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["id"], "DEMO-001");
    assert!(body["label_a"]["spectral_methods"].is_array());
    let (status, _) = call(&app, "GET", "/api/papers/NOPE-999", Body::empty()).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

fn new_paper(id: &str) -> Value {
    json!({
        "id": id,
        "title": "Terahertz imaging of durian ripeness",
        "year": 2023,
        "abstract": "Durian ripeness was predicted from terahertz spectra.",
        "label_a": {
            "research_object": "durian",
            "measured_property": "ripeness",
            "spectral_methods": ["THz"]
        },
        "label_b": {
            "preprocessing_methods": ["SNV"],
            "feature_processing_methods": [],
            "models": ["SVM"],
            "metrics_and_outcomes": [{"metric_name": "accuracy", "value_text": "94%"}]
        }
    })
}

#[tokio::test]
async fn ingest_then_rebuild_is_visible() {
    let app = demo_app();
    let (_, before) = call(&app, "GET", "/api/status", Body::empty()).await;
    let jsonl = format!("{}\n{}\n{{broken\n", new_paper("NEW-1"), new_paper("NEW-2"));
    let (status, body) = call(&app, "POST", "/api/papers:ingest", jsonl).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["accepted"], 2);
    assert_eq!(body["rejected"].as_array().unwrap().len(), 1);

    let mut status_body = Value::Null;
    for _ in 0..200 {
        status_body = call(&app, "GET", "/api/status", Body::empty()).await.1;
        if status_body["rebuilding"] == false {
            break;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    assert_eq!(status_body["index_revision"], status_body["corpus_revision"]);
    assert!(status_body["index_revision"].as_u64() > before["index_revision"].as_u64());
    assert_eq!(status_body["papers"], 52);

    let (_, hits) = post_json(&app, "/api/retrieve", json!({ "query_terms": "durian ripeness" })).await;
    let found: Vec<&str> = hits["hits"].as_array().unwrap().iter().map(|h| h["paper_id"].as_str().unwrap()).collect();
    let mut top: Vec<&str> = found[..2].to_vec();
    top.sort();
    assert_eq!(top, ["NEW-1", "NEW-2"]);
    let (status, _) = call(&app, "GET", "/api/papers/NEW-2", Body::empty()).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn index_revision_is_never_mixed() {
    let state = Arc::new(offline_state(demo_store()));
    let app = app(state.clone(), None).unwrap();
    let writer = {
        let app = app.clone();
        tokio::spawn(async move {
            for i in 0..10 {
                let (status, _) = call(&app, "POST", "/api/papers:ingest", new_paper(&format!("W-{i}")).to_string()).await;
                assert_eq!(status, StatusCode::OK);
            }
        })
    };
    for _ in 0..50 {
        let published = state.current();
        for index in published.indexes.values() {
            assert_eq!(index.built_from_revision(), published.revision());
            assert_eq!(index.num_docs(), published.snapshot.len());
        }
        tokio::task::yield_now().await;
    }
    writer.await.unwrap();
}

#[tokio::test]
async fn metrics_endpoint() {
    let app = demo_app();
    let jsonl = "{\"candidate\":\"a b c\",\"reference\":\"a b d\"}\n{\"candidate\":\"x\",\"reference\":\"x\"}\n";
    let (status, body) = call(&app, "POST", "/api/eval:metrics", jsonl).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["count"], 2);
    assert!((body["items"][0]["rouge1_f"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    let (status, _) = call(&app, "POST", "/api/eval:metrics", "{\"candidate\":\"a\",\"reference\":\"\"}").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn cors_preflight() {
    let app = app(Arc::new(offline_state(demo_store())), Some("http://localhost:5173")).unwrap();
    let req = Request::builder()
        .method("OPTIONS")
        .uri("/api/ask")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "POST")
        .body(Body::empty())
        .unwrap();
    let res = app.oneshot(req).await.unwrap();
    assert_eq!(res.headers()["access-control-allow-origin"], "http://localhost:5173");
}

#[test]
fn example_config_parses() {
    let text = include_str!("../../../config.example.toml");
    let (server, gateway) = spectraqa_server::load_config(text).unwrap();
    assert_eq!(server.bind.port(), 8080);
    assert!(!server.mock);
    let gateway = gateway.unwrap();
    assert_eq!(gateway.max_retries, 3);
    assert_eq!(gateway.completions_url(), "http://localhost:8000/v1/chat/completions");
}
