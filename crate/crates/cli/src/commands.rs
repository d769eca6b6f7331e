use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pantry_core::assistant::{Assistant, ChatClient, ChatConfig, HttpChatClient, Session, StubChatClient};
use pantry_core::corpus::PantryCorpus;
use pantry_core::dataset::{load_dataset, save_dataset};
use pantry_core::eval::{load_cases, render_report, run_eval, AssistantUnderTest, ReportFormat};
use pantry_core::ingest::audit::{audit_dataset, DEFAULT_FRESHNESS_DAYS};
use pantry_core::ingest::fetch::fetch_live;
use pantry_core::ingest::html::PageParser;
use pantry_core::ingest::{ingest_html_dir, ingest_pages};
use pantry_core::retriever::DEFAULT_K;
use pantry_core::vector::{build_index, load_index, save_index, EmbeddingProvider, RemoteEmbedder, StubEmbedder};
use pantry_core::Gazetteer;
use pantry_service::{AppState, ServiceConfig};

/// Food-pantry directory assistant: ingest, index, query, evaluate, serve.
#[derive(Debug, Parser)]
#[command(name = "pantry", version, about)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and normalize pantry pages into a dataset file and print an audit.
    /// Exits 2 when the audit reports findings (the dataset is still written).
    Ingest(IngestArgs),
    /// Embed every record and write the binary vector index.
    Index(IndexArgs),
    /// Answer one query and print the grounded response.
    Query(QueryArgs),
    /// Run a case file and write an accuracy report. Exits 0 once every case
    /// has been judged, whatever the accuracy.
    Eval(EvalArgs),
    /// Start the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProviderKind {
    /// Deterministic hashed bag-of-words embedder.
    Stub,
    /// HTTP embedding service (see --embed-endpoint).
    Remote,
}

#[derive(Debug, Args)]
struct ProviderArgs {
    /// Embedding provider; must match the one used to build the index.
    #[arg(long, value_enum, default_value = "stub")]
    provider: ProviderKind,
    /// Endpoint for --provider remote.
    #[arg(long, env = "PANTRY_EMBED_ENDPOINT")]
    embed_endpoint: Option<String>,
    /// Vector dimension for --provider remote.
    #[arg(long, env = "PANTRY_EMBED_DIM", default_value_t = 384)]
    embed_dim: usize,
}

impl ProviderArgs {
    fn build(&self) -> Result<Arc<dyn EmbeddingProvider>> {
        Ok(match self.provider {
            ProviderKind::Stub => Arc::new(StubEmbedder::default()),
            ProviderKind::Remote => {
                let endpoint = self
                    .embed_endpoint
                    .clone()
                    .context("--provider remote needs --embed-endpoint or PANTRY_EMBED_ENDPOINT")?;
                Arc::new(RemoteEmbedder::new(endpoint, self.embed_dim, Duration::from_secs(30))?)
            }
        })
    }
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Directory of saved pantry pages (*.html).
    #[arg(long, required_unless_present = "live")]
    fixtures: Option<PathBuf>,
    /// Gazetteer JSON; the bundled Kansas file is used when omitted.
    #[arg(long)]
    gazetteer: Option<PathBuf>,
    /// Output dataset file.
    #[arg(long)]
    out: PathBuf,
    /// Crawl a live directory instead of reading saved pages.
    #[arg(long, requires = "source")]
    live: bool,
    /// Listing page URL for --live.
    #[arg(long)]
    source: Option<String>,
    /// Requests per minute for --live.
    #[arg(long, default_value_t = 6)]
    rate: u32,
    /// Audit reference time (RFC 3339); defaults to now.
    #[arg(long)]
    now: Option<DateTime<Utc>>,
    /// Records older than this many days are reported stale.
    #[arg(long, default_value_t = DEFAULT_FRESHNESS_DAYS)]
    freshness_days: i64,
    /// Also write the audit report as JSON.
    #[arg(long)]
    audit_json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IndexArgs {
    /// Dataset file written by `ingest`.
    #[arg(long)]
    data: PathBuf,
    /// Output index file.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    provider: ProviderArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Text,
}

#[derive(Debug, Args)]
struct CorpusArgs {
    /// Dataset file written by `ingest`.
    #[arg(long)]
    data: PathBuf,
    /// Index file written by `index`.
    #[arg(long)]
    index: PathBuf,
    #[command(flatten)]
    provider: ProviderArgs,
}

impl CorpusArgs {
    fn load(&self) -> Result<PantryCorpus> {
        let records = load_dataset(&self.data)?;
        let index = load_index(&self.index)?;
        Ok(PantryCorpus::with_index(records, index, self.provider.build()?)?)
    }
}

#[derive(Debug, Args)]
struct QueryArgs {
    /// The question to answer.
    text: String,
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Number of pantries to retrieve.
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// Use the deterministic template generator instead of a chat endpoint.
    #[arg(long)]
    no_llm: bool,
    /// Continue a session (e.g. to answer a clarification question).
    #[arg(long)]
    session: Option<String>,
    /// Where session files are kept between invocations.
    #[arg(long, env = "PANTRY_STATE_DIR")]
    state_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: OutputFormat,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Case file, one JSON object per line.
    #[arg(long)]
    cases: PathBuf,
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    no_llm: bool,
    /// Report output path.
    #[arg(long)]
    report: PathBuf,
    /// Report format: text, csv or json.
    #[arg(long, default_value = "text")]
    format: ReportFormat,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "PANTRY_PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, env = "PANTRY_HOST", default_value = "127.0.0.1")]
    host: String,
    #[arg(long, env = "PANTRY_DATA")]
    data: PathBuf,
    /// Index file; rebuilt from the dataset when missing or stale.
    #[arg(long, env = "PANTRY_INDEX")]
    index: Option<PathBuf>,
    /// Gazetteer JSON; the bundled Kansas file is used when omitted.
    #[arg(long, env = "PANTRY_GAZETTEER")]
    gazetteer: Option<PathBuf>,
    /// Allowed CORS origin (repeatable, or comma-separated in the env var).
    #[arg(long = "cors-origin", env = "PANTRY_CORS_ORIGINS", value_delimiter = ',', default_value = "*")]
    cors_origins: Vec<String>,
    #[arg(long)]
    no_llm: bool,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[command(flatten)]
    provider: ProviderArgs,
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Index(a) => index(a),
        Command::Query(a) => query(a),
        Command::Eval(a) => eval(a),
        Command::Serve(a) => serve(a),
    }
}

fn gazetteer(path: Option<&Path>) -> Result<Gazetteer> {
    Ok(match path {
        Some(p) => Gazetteer::load(p)?,
        None => Gazetteer::kansas(),
    })
}

fn chat_client(no_llm: bool) -> Result<Arc<dyn ChatClient>> {
    if no_llm {
        return Ok(Arc::new(StubChatClient));
    }
    Ok(match ChatConfig::from_env() {
        Some(cfg) => Arc::new(HttpChatClient::new(cfg)?),
        None => Arc::new(StubChatClient),
    })
}

fn ingest(a: IngestArgs) -> Result<ExitCode> {
    let gaz = gazetteer(a.gazetteer.as_deref())?;
    let parser = PageParser::default();
    let started = Utc::now();
    let outcome = if a.live {
        let source = a.source.as_deref().context("--live needs --source")?;
        let fetched = fetch_live(source, a.rate)?;
        for e in &fetched.errors {
            eprintln!("warning: {e}");
        }
        ingest_pages(&fetched.pages, &gaz, &parser, started)
    } else {
        let dir = a.fixtures.as_deref().context("--fixtures is required without --live")?;
        ingest_html_dir(dir, &gaz, &parser, started)?
    };
    for e in &outcome.errors {
        eprintln!("warning: {e}");
    }
    if outcome.records.is_empty() {
        bail!("no records were produced");
    }
    save_dataset(&a.out, &outcome.records)?;

    let report = audit_dataset(&outcome.records, a.now.unwrap_or(started), a.freshness_days);
    print!("{}", report.to_text());
    if let Some(p) = &a.audit_json {
        fs::write(p, serde_json::to_string_pretty(&report)? + "\n").with_context(|| format!("writing {}", p.display()))?;
    }
    println!("wrote {} records to {}", outcome.records.len(), a.out.display());
    Ok(if report.has_findings() || !outcome.errors.is_empty() { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn index(a: IndexArgs) -> Result<ExitCode> {
    let records = load_dataset(&a.data)?;
    let provider = a.provider.build()?;
    let index = build_index(&records, provider.as_ref())?;
    save_index(&index, &a.out)?;
    println!("indexed {} records ({}) into {}", index.len(), index.fingerprint(), a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn state_dir(explicit: Option<PathBuf>) -> PathBuf {
    explicit.unwrap_or_else(|| std::env::temp_dir().join("pantry-sessions"))
}

fn session_path(dir: &Path, id: &str) -> Result<PathBuf> {
    if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
        bail!("session ids may contain only letters, digits, '-' and '_'");
    }
    Ok(dir.join(format!("{id}.json")))
}

fn load_session(dir: &Path, id: Option<&str>, now: DateTime<Utc>) -> Result<Session> {
    let Some(id) = id else { return Ok(Session::new_random(now)) };
    let path = session_path(dir, id)?;
    let existing: Option<Session> = match fs::read_to_string(&path) {
        Ok(text) => Some(serde_json::from_str(&text).with_context(|| format!("reading {}", path.display()))?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(e).with_context(|| format!("reading {}", path.display())),
    };
    Ok(existing.filter(|s| !s.is_expired(now)).unwrap_or_else(|| Session::new(id, now)))
}

fn query(a: QueryArgs) -> Result<ExitCode> {
    let corpus = a.corpus.load()?;
    let assistant = Assistant::new(Arc::new(Gazetteer::kansas()), chat_client(a.no_llm)?).with_k(a.k);
    let dir = state_dir(a.state_dir);
    let now = Utc::now();
    let mut session = load_session(&dir, a.session.as_deref(), now)?;
    let out = assistant.handle_turn_at(&mut session, &a.text, &corpus, now)?;

    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = session_path(&dir, &session.session_id)?;
    fs::write(&path, serde_json::to_string(&session)?).with_context(|| format!("writing {}", path.display()))?;

    match a.format {
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&out.response)?),
        OutputFormat::Text => {
            println!("{}", out.response.text);
            println!();
            println!("session: {}", out.response.session_id);
            if !out.response.cited_ids.is_empty() {
                println!("cited: {}", out.response.cited_ids.join(", "));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn eval(a: EvalArgs) -> Result<ExitCode> {
    let cases = load_cases(&a.cases)?;
    let corpus = a.corpus.load()?;
    let assistant = Assistant::new(Arc::new(Gazetteer::kansas()), chat_client(a.no_llm)?).with_k(a.k);
    let sut = AssistantUnderTest { assistant: &assistant, corpus: &corpus };
    let report = run_eval(&cases, &sut, corpus.records());
    let rendered = render_report(&report, a.format);
    fs::write(&a.report, &rendered).with_context(|| format!("writing {}", a.report.display()))?;
    print!("{}", render_report(&report, ReportFormat::Text));
    Ok(if report.overall.count == cases.len() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn serve(a: ServeArgs) -> Result<ExitCode> {
    let addr: SocketAddr = format!("{}:{}", a.host, a.port).parse().context("invalid --host/--port")?;
    let gaz = gazetteer(a.gazetteer.as_deref())?;
    // blocking HTTP clients must be built outside the async runtime
    let assistant = Assistant::new(Arc::new(gaz), chat_client(a.no_llm)?).with_k(a.k);
    let config = ServiceConfig { data_path: a.data, index_path: a.index, cors_origins: a.cors_origins };
    let state = Arc::new(AppState::new(config, assistant, a.provider.build()?));
    let snap = state.load()?;
    eprintln!(
        "loaded {} records (index {}) from snapshot {}",
        snap.corpus.records().len(),
        &snap.fingerprint[..12],
        snap.corpus.snapshot_at().map(|t| t.to_rfc3339()).unwrap_or_else(|| "-".into())
    );
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(pantry_service::serve(state, addr))?;
    Ok(ExitCode::SUCCESS)
}
