//! `spectraqa`: ingest, query, evaluate and generate instruction data from the
//! command line.
//!
//! Exit codes: 0 success, 1 data or runtime error, 2 usage error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "spectraqa", version, about = "Spectral-detection literature question answering")]
pub struct Cli {
    /// TOML config file with a [gateway] table for model-backed commands.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Corpus JSON Lines file used by ingest, ask and retrieve.
    #[arg(long, global = true, default_value = "data/demo_corpus.jsonl")]
    corpus: PathBuf,
    /// Print machine-readable JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct RetrieveOpts {
    /// bow, bm25 or tfidf.
    #[arg(long, default_value = "tfidf")]
    retriever: String,
    /// Number of papers to retrieve.
    #[arg(long, default_value_t = 10)]
    k: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Validate papers from a JSON Lines file and merge them into the corpus file.
    Ingest {
        input: PathBuf,
        /// Only validate; leave the corpus file untouched.
        #[arg(long)]
        dry_run: bool,
    },
    /// Answer a question with cited knowledge from the corpus.
    Ask {
        question: String,
        #[command(flatten)]
        opts: RetrieveOpts,
        /// Use the offline deterministic gateway.
        #[arg(long)]
        mock: bool,
    },
    /// Rank papers for a list of query terms.
    Retrieve {
        terms: String,
        #[command(flatten)]
        opts: RetrieveOpts,
    },
    /// Compare the retrievers on a seeded synthetic corpus.
    BenchRetrieval {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        docs: usize,
        #[arg(long, default_value_t = 100)]
        queries: usize,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Score JSON Lines of {candidate, reference} with BLEU, ROUGE-1 and METEOR.
    EvalMetrics { input: PathBuf },
    /// Generate instruction-tuning items from a corpus file.
    IftGen {
        input: PathBuf,
        /// Output JSON Lines file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        mock: bool,
        /// Add one model paraphrase per template question.
        #[arg(long)]
        paraphrase: bool,
    },
    /// Write the built-in 50-paper demo corpus.
    DemoCorpus {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub enum CliError {
    Usage(String),
    Data(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
