use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;

use spectraqa::corpus::CorpusStore;
use spectraqa_server::{app, http_state, load_config, offline_state, ServerConfig};

#[derive(Parser)]
#[command(name = "spectraqa-server", about = "Serve the question answering API over HTTP")]
struct Args {
    /// TOML file with [server] and [gateway] tables.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Corpus JSON Lines file loaded at start-up.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    bind: Option<SocketAddr>,
    /// Use the offline gateway instead of a model endpoint.
    #[arg(long)]
    mock: bool,
}

fn setup(args: Args) -> Result<(SocketAddr, axum::Router), String> {
    let (mut server, gateway) = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            load_config(&text)?
        }
        None => (ServerConfig::default(), None),
    };
    server.corpus = args.corpus.or(server.corpus);
    server.bind = args.bind.unwrap_or(server.bind);
    server.mock |= args.mock;

    let mut store = CorpusStore::new();
    if let Some(path) = &server.corpus {
        let file = std::fs::File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let report = store.ingest_reader(std::io::BufReader::new(file));
        eprintln!("loaded {} papers, {} rejected", report.accepted, report.rejected.len());
    }

    let state = if server.mock {
        offline_state(store)
    } else {
        let gateway = gateway.ok_or("no [gateway] table in the config; pass --mock to run offline")?;
        http_state(store, gateway)?
    };
    let router = app(Arc::new(state), server.cors_origin.as_deref())?;
    Ok((server.bind, router))
}

#[tokio::main]
async fn main() -> ExitCode {
    let (bind, router) = match setup(Args::parse()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let listener = match tokio::net::TcpListener::bind(bind).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: cannot bind {bind}: {e}");
            return ExitCode::from(1);
        }
    };
    eprintln!("listening on http://{bind}");
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    match axum::serve(listener, router).with_graceful_shutdown(shutdown).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
