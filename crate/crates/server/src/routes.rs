use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use spectraqa::corpus::{CorpusError, PaperId};
use spectraqa::evalkit::{evaluate_batch, EvalError};
use spectraqa::generation::GenerationError;
use spectraqa::pipeline::{query_terms, AskOptions, PipelineError, Stage};
use spectraqa::qparse::{extract_entities, ExtractionError};
use spectraqa::retrieval::{RankedHit, RetrievalError, RetrieverKind};
use spectraqa::textproc::tokenize;

use crate::state::{AppState, Published};

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    stage: Option<Stage>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into(), stage: None }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = match self.stage {
            Some(stage) => json!({ "error": self.message, "stage": stage.as_str() }),
            None => json!({ "error": self.message }),
        };
        (self.status, Json(body)).into_response()
    }
}

fn extraction_status(e: &ExtractionError) -> StatusCode {
    match e {
        ExtractionError::EmptyQuestion => StatusCode::BAD_REQUEST,
        ExtractionError::NoMatch | ExtractionError::Malformed { .. } => StatusCode::UNPROCESSABLE_ENTITY,
        ExtractionError::Gateway(_) => StatusCode::BAD_GATEWAY,
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let status = match &e {
            PipelineError::Extraction(x) => extraction_status(x),
            PipelineError::Retrieval(_) => StatusCode::BAD_REQUEST,
            PipelineError::Knowledge(_) => StatusCode::INTERNAL_SERVER_ERROR,
            // an answer that cannot be tied to the bundle is an upstream failure
            PipelineError::Generation(GenerationError::Gateway(_) | GenerationError::CitationMissing { .. }) => {
                StatusCode::BAD_GATEWAY
            }
            PipelineError::Generation(GenerationError::Template(_)) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self { status, stage: Some(e.stage()), message: e.to_string() }
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

fn retriever(raw: Option<&str>) -> Result<RetrieverKind, ApiError> {
    raw.map_or(Ok(RetrieverKind::TfidfCosine), |r| r.parse().map_err(ApiError::bad_request))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("worker failed: {e}")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AskRequest {
    question: String,
    #[serde(default)]
    retriever: Option<String>,
    #[serde(default)]
    k: Option<usize>,
}

async fn ask(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: AskRequest = parse_body(&body)?;
    if req.question.trim().is_empty() {
        return Err(ApiError { stage: Some(Stage::Extraction), ..ApiError::bad_request("question is empty") });
    }
    let kind = retriever(req.retriever.as_deref())?;
    let mut options = AskOptions::default();
    if let Some(k) = req.k {
        options.k = k;
    }
    let published = state.current();
    let response = blocking(move || {
        let index = published.index(kind);
        state.pipeline.ask(&req.question, index, &published.snapshot, options)
    })
    .await??;
    Ok(Json(response).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RetrieveRequest {
    #[serde(default)]
    query_terms: Option<QueryTerms>,
    #[serde(default)]
    question: Option<String>,
    #[serde(default)]
    retriever: Option<String>,
    #[serde(default)]
    k: Option<usize>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum QueryTerms {
    Text(String),
    List(Vec<String>),
}

#[derive(Serialize)]
struct RetrieveResponse {
    retriever: RetrieverKind,
    index_revision: u64,
    query: Vec<String>,
    hits: Vec<RankedHit>,
}

async fn retrieve(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: RetrieveRequest = parse_body(&body)?;
    let kind = retriever(req.retriever.as_deref())?;
    let k = req.k.unwrap_or(AskOptions::default().k);
    let query = match (req.query_terms, req.question) {
        (Some(QueryTerms::Text(t)), None) => tokenize(&t),
        (Some(QueryTerms::List(l)), None) => tokenize(&l.join(" ")),
        (None, Some(q)) => {
            let extractor = state.extractor.clone();
            let parsed = blocking(move || extract_entities(&q, extractor.as_ref())).await?.map_err(|e| ApiError {
                status: extraction_status(&e),
                message: e.to_string(),
                stage: Some(Stage::Extraction),
            })?;
            query_terms(&parsed)
        }
        _ => return Err(ApiError::bad_request("give exactly one of query_terms or question")),
    };
    let published = state.current();
    let hits = published.index(kind).retrieve_top_k(&query, k).map_err(|e| match e {
        RetrievalError::ZeroK => ApiError::bad_request(e.to_string()),
        other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, other.to_string()),
    })?;
    Ok(Json(RetrieveResponse {
        retriever: kind,
        index_revision: published.revision(),
        query: query.tokens().to_vec(),
        hits,
    })
    .into_response())
}

async fn paper(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let id = PaperId::new(id).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let published = state.current();
    match published.snapshot.get(&id) {
        Some(p) => Ok(Json(p).into_response()),
        None => Err(ApiError::new(StatusCode::NOT_FOUND, CorpusError::NotFound(id.to_string()).to_string())),
    }
}

async fn ingest(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::bad_request("body is not UTF-8"))?.to_string();
    let (report, snapshot) = {
        let state = state.clone();
        blocking(move || state.ingest(&text)).await?
    };
    let revision = state.corpus_revision();
    if let Some(snapshot) = snapshot {
        // indexes are rebuilt off the request path and published atomically
        let state = state.clone();
        tokio::task::spawn_blocking(move || {
            state.publish(Published::build(snapshot));
        });
    }
    let body = json!({
        "accepted": report.accepted,
        "rejected": report.rejected,
        "corpus_revision": revision,
    });
    Ok(Json(body).into_response())
}

async fn eval_metrics(body: Bytes) -> Result<Response, ApiError> {
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::bad_request("body is not UTF-8"))?;
    match evaluate_batch(text) {
        Ok(report) => Ok(Json(report).into_response()),
        Err(e @ (EvalError::BadRecord { .. } | EvalError::EmptyBatch | EvalError::EmptyReference)) => {
            Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))
        }
        Err(e) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())),
    }
}

#[derive(Serialize)]
pub struct Status {
    pub corpus_revision: u64,
    pub index_revision: u64,
    pub papers: usize,
    pub rebuilding: bool,
    pub retrievers: Vec<RetrieverKind>,
}

async fn status(State(state): State<Arc<AppState>>) -> Json<Status> {
    let published = state.current();
    let corpus_revision = state.corpus_revision();
    Json(Status {
        corpus_revision,
        index_revision: published.revision(),
        papers: published.snapshot.len(),
        rebuilding: corpus_revision != published.revision(),
        retrievers: RetrieverKind::ALL.to_vec(),
    })
}

pub fn api_routes(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/ask", post(ask))
        .route("/api/retrieve", post(retrieve))
        .route("/api/papers/{id}", get(paper))
        .route("/api/papers:ingest", post(ingest))
        .route("/api/eval:metrics", post(eval_metrics))
        .route("/api/status", get(status))
        .with_state(state)
}
