use std::fs;
use std::io::{BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use spectraqa::corpus::{CorpusSnapshot, CorpusStore, IngestReport};
use spectraqa::demo::demo_jsonl;
use spectraqa::evalkit::evaluate_batch;
use spectraqa::gateway::{GatewayConfig, HttpGateway, LlmGateway};
use spectraqa::ift::{build_dataset, export_ift, AnswerPrompt, CleaningRules, IftOptions, QuestionTemplates};
use spectraqa::offline::offline_gateway;
use spectraqa::pipeline::{AskOptions, AskResponse, QaPipeline};
use spectraqa::qparse::{EntityExtractor, LlmExtractor, RuleBasedExtractor};
use spectraqa::retrieval::{Index, RankedHit, RetrieverKind};
use spectraqa::synth::{run_benchmark, SynthConfig};
use spectraqa::textproc::tokenize;

use crate::{Cli, CliError, Command, RetrieveOpts};

type Result<T> = std::result::Result<T, CliError>;

/// `println!` that stays quiet when stdout is closed early (e.g. piped to `head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| CliError::Data(format!("stdout: {e}")))
        }
    }
}

fn print_json<T: Serialize>(value: &T) {
    say!("{}", serde_json::to_string_pretty(value).expect("output serializes"));
}

fn print_rejections(report: &IngestReport) {
    for r in &report.rejected {
        eprintln!("line {}: {} ({})", r.line, r.reason, r.id.as_deref().unwrap_or("no id"));
    }
}

/// Loads a corpus file; any rejected record is a data error.
fn load_corpus(path: &Path) -> Result<CorpusSnapshot> {
    let file = fs::File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut store = CorpusStore::new();
    let report = store.ingest_reader(BufReader::new(file));
    if !report.rejected.is_empty() {
        print_rejections(&report);
        return Err(CliError::Data(format!("{}: {} invalid records", path.display(), report.rejected.len())));
    }
    Ok(store.snapshot())
}

fn retriever(raw: &str) -> Result<RetrieverKind> {
    raw.parse().map_err(CliError::Usage)
}

fn model_gateway(cli_config: Option<&Path>, mock: bool) -> Result<Arc<dyn LlmGateway>> {
    if mock {
        return Ok(Arc::new(offline_gateway()));
    }
    let path = cli_config.ok_or_else(|| CliError::Usage("pass --config with a [gateway] table, or --mock".into()))?;
    let config = GatewayConfig::from_toml(&read_file(path)?).map_err(|e| CliError::Usage(e.to_string()))?;
    let gateway = HttpGateway::new(config.with_api_key_from_env()).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(Arc::new(gateway))
}

pub fn run(cli: Cli) -> Result<()> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Ingest { input, dry_run } => ingest(&input, &cli.corpus, dry_run, cli.json),
        Command::Ask { question, opts, mock } => ask(&question, &opts, mock, config, &cli.corpus, cli.json),
        Command::Retrieve { terms, opts } => retrieve(&terms, &opts, &cli.corpus, cli.json),
        Command::BenchRetrieval { seed, docs, queries, k } => bench(seed, docs, queries, k, cli.json),
        Command::EvalMetrics { input } => eval_metrics(&input, cli.json),
        Command::IftGen { input, out, mock, paraphrase } => {
            ift_gen(&input, out.as_deref(), mock, paraphrase, config, cli.json)
        }
        Command::DemoCorpus { out } => write_output(out.as_deref(), &demo_jsonl()),
    }
}

#[derive(Serialize)]
struct IngestSummary<'a> {
    accepted: usize,
    rejected: &'a [spectraqa::corpus::Rejection],
    corpus_size: usize,
    written: bool,
}

fn ingest(input: &Path, corpus: &Path, dry_run: bool, json: bool) -> Result<()> {
    let text = read_file(input)?;
    let mut store = CorpusStore::new();
    if corpus.exists() {
        let existing = read_file(corpus)?;
        let report = store.ingest_str(&existing);
        if !report.rejected.is_empty() {
            print_rejections(&report);
            return Err(CliError::Data(format!("{}: existing corpus has invalid records", corpus.display())));
        }
    }
    let report = store.ingest_str(&text);
    let written = !dry_run && report.accepted > 0;
    if written {
        fs::write(corpus, store.export_jsonl()).map_err(|e| CliError::Data(format!("{}: {e}", corpus.display())))?;
    }
    if json {
        print_json(&IngestSummary { accepted: report.accepted, rejected: &report.rejected, corpus_size: store.len(), written });
    } else {
        say!("accepted {} / rejected {}; corpus now {} papers", report.accepted, report.rejected.len(), store.len());
        print_rejections(&report);
    }
    if report.rejected.is_empty() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{} records rejected", report.rejected.len())))
    }
}

fn print_hits(hits: &[RankedHit], snapshot: &CorpusSnapshot) {
    say!("{:>4}  {:<12} {:>8}  title", "rank", "paper", "score");
    for h in hits {
        let title = snapshot.get(&h.paper_id).map_or("", |p| p.title.as_str());
        say!("{:>4}  {:<12} {:>8.4}  {}", h.rank, h.paper_id, h.score, title);
    }
}

fn ask(question: &str, opts: &RetrieveOpts, mock: bool, config: Option<&Path>, corpus: &Path, json: bool) -> Result<()> {
    let kind = retriever(&opts.retriever)?;
    if opts.k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    let gateway = model_gateway(config, mock)?;
    let snapshot = load_corpus(corpus)?;
    let extractor: Arc<dyn EntityExtractor> =
        if mock { Arc::new(RuleBasedExtractor) } else { Arc::new(LlmExtractor::new(gateway.clone())) };
    let pipeline = QaPipeline::new(extractor, gateway);
    let index = Index::build(&snapshot, kind, None);
    let options = AskOptions { k: opts.k, ..AskOptions::default() };
    let response = pipeline
        .ask(question, &index, &snapshot, options)
        .map_err(|e| CliError::Data(format!("{} stage failed: {e}", e.stage().as_str())))?;
    if json {
        print_json(&response);
    } else {
        print_answer(&response, &snapshot);
    }
    Ok(())
}

fn print_answer(r: &AskResponse, snapshot: &CorpusSnapshot) {
    let p = &r.parsed;
    say!("Task: {} (object: {}, property: {}, method: {}, objective: {})",
        p.task().as_str(),
        p.research_object(),
        p.measured_property().unwrap_or("-"),
        p.spectral_method().unwrap_or("-"),
        p.question_objective().map_or("-", |o| o.as_str()),
    );
    say!("\n{}\n", r.answer.text);
    let cited: Vec<&str> = r.answer.citations.iter().map(|c| c.as_str()).collect();
    say!("Citations: {}", if cited.is_empty() { "none".to_string() } else { cited.join(", ") });
    say!("\nRetrieved with {}:", r.retriever.display_name());
    print_hits(&r.hits, snapshot);
}

#[derive(Serialize)]
struct RetrieveOutput<'a> {
    retriever: RetrieverKind,
    query: &'a [String],
    hits: &'a [RankedHit],
}

fn retrieve(terms: &str, opts: &RetrieveOpts, corpus: &Path, json: bool) -> Result<()> {
    let kind = retriever(&opts.retriever)?;
    if opts.k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    let snapshot = load_corpus(corpus)?;
    let query = tokenize(terms);
    let hits = Index::build(&snapshot, kind, None)
        .retrieve_top_k(&query, opts.k)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if json {
        print_json(&RetrieveOutput { retriever: kind, query: query.tokens(), hits: &hits });
    } else {
        print_hits(&hits, &snapshot);
    }
    Ok(())
}

fn bench(seed: u64, docs: usize, queries: usize, k: usize, json: bool) -> Result<()> {
    if docs == 0 || queries == 0 || k == 0 {
        return Err(CliError::Usage("--docs, --queries and --k must be at least 1".into()));
    }
    let cfg = SynthConfig { seed, docs, queries, k, ..SynthConfig::default() };
    let report = run_benchmark(&cfg).map_err(|e| CliError::Data(e.to_string()))?;
    if json {
        say!("{}", report.to_json());
    } else {
        let _ = std::io::stdout().write_all(report.to_table().as_bytes());
    }
    Ok(())
}

fn eval_metrics(input: &Path, json: bool) -> Result<()> {
    let report = evaluate_batch(&read_file(input)?).map_err(|e| CliError::Data(e.to_string()))?;
    if json {
        print_json(&report);
    } else {
        say!("{:>5}  {:>7}  {:>7}  {:>7}", "line", "BLEU", "ROUGE-1", "METEOR");
        for i in &report.items {
            say!("{:>5}  {:>7.4}  {:>7.4}  {:>7.4}", i.line, i.bleu, i.rouge1_f, i.meteor);
        }
        let m = &report.mean;
        say!("{:>5}  {:>7.4}  {:>7.4}  {:>7.4}", "mean", m.bleu, m.rouge1_f, m.meteor);
    }
    Ok(())
}

#[derive(Serialize)]
struct IftSummary {
    items: usize,
    skipped: usize,
}

fn ift_gen(input: &Path, out: Option<&Path>, mock: bool, paraphrase: bool, config: Option<&Path>, json: bool) -> Result<()> {
    let gateway = model_gateway(config, mock)?;
    let snapshot = load_corpus(input)?;
    let rules = CleaningRules::shipped();
    let options = IftOptions { paraphrase, ..IftOptions::default() };
    let run = build_dataset(
        &snapshot,
        &QuestionTemplates::default(),
        &AnswerPrompt::default(),
        &rules,
        gateway.as_ref(),
        &options,
    )
    .map_err(|e| CliError::Data(e.to_string()))?;
    let text = export_ift(&run.items, &snapshot, &rules).map_err(|e| CliError::Data(e.to_string()))?;
    write_output(out, &text)?;
    let summary = IftSummary { items: run.items.len(), skipped: run.skipped.len() };
    if json && out.is_some() {
        print_json(&summary);
    } else {
        eprintln!("{} items written, {} skipped", summary.items, summary.skipped);
    }
    Ok(())
}
