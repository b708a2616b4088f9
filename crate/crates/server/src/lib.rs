//! HTTP front end for the question answering pipeline.
//!
//! | method | path | body |
//! |---|---|---|
//! | POST | `/api/ask` | `{question, retriever?, k?}` |
//! | POST | `/api/retrieve` | `{query_terms \| question, retriever?, k?}` |
//! | GET | `/api/papers/{id}` | |
//! | POST | `/api/papers:ingest` | JSON Lines of papers |
//! | POST | `/api/eval:metrics` | JSON Lines of `{candidate, reference}` |
//! | GET | `/api/status` | |

mod routes;
mod state;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::http::{HeaderValue, Method};
use axum::Router;
use serde::Deserialize;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use spectraqa::corpus::CorpusStore;
use spectraqa::gateway::{GatewayConfig, HttpGateway, LlmGateway};
use spectraqa::offline::offline_gateway;
use spectraqa::pipeline::QaPipeline;
use spectraqa::qparse::{EntityExtractor, LlmExtractor, RuleBasedExtractor};

pub use routes::{ApiError, Status};
pub use state::{AppState, Published};

/// `[server]` table of the config file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: SocketAddr,
    pub corpus: Option<PathBuf>,
    /// Origin allowed by CORS; any origin when unset.
    pub cors_origin: Option<String>,
    /// Use the offline gateway and the rule-based extractor.
    pub mock: bool,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self { bind: ([127, 0, 0, 1], 8080).into(), corpus: None, cors_origin: None, mock: false }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
struct ConfigFile {
    server: ServerConfig,
    gateway: Option<toml::Value>,
}

/// Reads `[server]` and, when present, `[gateway]` from one TOML file.
pub fn load_config(text: &str) -> Result<(ServerConfig, Option<GatewayConfig>), String> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| e.to_string())?;
    let gateway = match file.gateway {
        Some(table) => {
            let text = toml::to_string(&table).map_err(|e| e.to_string())?;
            Some(GatewayConfig::from_toml(&text).map_err(|e| e.to_string())?)
        }
        None => None,
    };
    Ok((file.server, gateway))
}

/// Offline pipeline: rule-based extraction and the deterministic gateway.
pub fn offline_state(store: CorpusStore) -> AppState {
    let extractor: Arc<dyn EntityExtractor> = Arc::new(RuleBasedExtractor);
    let gateway: Arc<dyn LlmGateway> = Arc::new(offline_gateway());
    AppState::new(store, QaPipeline::new(extractor.clone(), gateway), extractor)
}

/// Model-backed pipeline over any gateway.
pub fn gateway_state(store: CorpusStore, gateway: Arc<dyn LlmGateway>) -> AppState {
    let extractor: Arc<dyn EntityExtractor> = Arc::new(LlmExtractor::new(gateway.clone()));
    AppState::new(store, QaPipeline::new(extractor.clone(), gateway), extractor)
}

pub fn http_state(store: CorpusStore, config: GatewayConfig) -> Result<AppState, String> {
    let gateway = HttpGateway::new(config.with_api_key_from_env()).map_err(|e| e.to_string())?;
    Ok(gateway_state(store, Arc::new(gateway)))
}

pub fn app(state: Arc<AppState>, cors_origin: Option<&str>) -> Result<Router, String> {
    let origin = match cors_origin {
        Some(o) => AllowOrigin::exact(HeaderValue::from_str(o).map_err(|e| format!("cors origin: {e}"))?),
        None => AllowOrigin::from(Any),
    };
    let cors = CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers(Any);
    Ok(routes::api_routes(state).layer(cors))
}
