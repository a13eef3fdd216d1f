//! `examforge` command-line front end. Every command prints JSON; domain
//! errors go to stderr as `{"error_code", "message"}` with exit code 1,
//! usage errors exit with 2.

mod commands;
mod config;
mod error;
mod store;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use examforge_core::assessment::DifficultyTier;

#[derive(Parser, Debug)]
#[command(name = "examforge", version, about = "Knowledge-graph-driven exam generation and item analysis")]
pub struct Cli {
    /// Snapshot directory holding one graph per subject.
    #[arg(long, global = true, default_value = "kg-store")]
    pub store: PathBuf,
    /// JSON config (rubric, provider, pagerank, seed, ...). Flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run every data-parallel loop sequentially.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Extract triples from documents into a subject graph.
    Ingest(IngestArgs),
    /// Inspect or export a subject graph.
    #[command(subcommand)]
    Graph(GraphCommand),
    /// PageRank scores for a whole graph, a chapter's concepts or a concept's facts.
    Rank(RankArgs),
    /// Check exam blueprints.
    #[command(subcommand)]
    Blueprint(BlueprintCommand),
    /// Generate an exam for a blueprint.
    Generate(GenerateArgs),
    /// Rate one item against a difficulty tier.
    EvaluateItem(EvaluateArgs),
    /// Item statistics and group comparisons from a response CSV.
    Analyze(AnalyzeArgs),
    /// Run the agent pipeline on the message bus.
    #[command(subcommand)]
    Agents(AgentsCommand),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExtractorKind {
    Rules,
    Llm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GeneratorKind {
    Llm,
    Template,
}

/// Where LLM calls go.
#[derive(Args, Debug, Clone)]
pub struct LlmArgs {
    /// Use the deterministic offline completer instead of the configured provider.
    #[arg(long)]
    pub mock: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long)]
    pub subject: String,
    /// Document to ingest (.md/.markdown as Markdown, anything else as plain text).
    #[arg(long = "doc", required = true)]
    pub docs: Vec<PathBuf>,
    /// Chapter path such as `Ecology/Food Webs`; defaults to the file stem.
    #[arg(long)]
    pub chapter: Option<String>,
    /// JSON object mapping entity labels to concept labels.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "rules")]
    pub extractor: ExtractorKind,
    /// Fail if the subject already has a graph instead of adding to it.
    #[arg(long)]
    pub new: bool,
    #[command(flatten)]
    pub llm: LlmArgs,
}

#[derive(Subcommand, Debug)]
pub enum GraphCommand {
    /// Write the subject's snapshot.
    Export {
        #[arg(long)]
        subject: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Node and edge counts.
    Stats {
        #[arg(long)]
        subject: String,
    },
}

#[derive(Args, Debug)]
pub struct RankArgs {
    #[arg(long)]
    pub subject: String,
    /// Rank the concepts of this chapter.
    #[arg(long, conflicts_with = "concept")]
    pub chapter: Option<String>,
    /// Rank the facts attached to this concept.
    #[arg(long)]
    pub concept: Option<String>,
    #[arg(long)]
    pub top: Option<usize>,
    #[arg(long)]
    pub damping: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum BlueprintCommand {
    /// Check a blueprint, and its chapters when the subject is in the store.
    Validate {
        #[arg(long)]
        blueprint: PathBuf,
    },
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long)]
    pub blueprint: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "llm")]
    pub generator: GeneratorKind,
    #[arg(long)]
    pub max_retries: Option<u32>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[command(flatten)]
    pub llm: LlmArgs,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Item JSON (stem, options, answer_index, optional tier).
    #[arg(long)]
    pub item: PathBuf,
    /// Target tier; defaults to the item's own tier.
    #[arg(long)]
    pub tier: Option<DifficultyTier>,
    /// Subject whose graph supplies the domain vocabulary.
    #[arg(long)]
    pub subject: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub responses: PathBuf,
    /// JSON `{"groups": {item: level}, "factor_b": {item: level}}`.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    #[arg(long)]
    pub fraction: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum AgentsCommand {
    /// Start the bus and the pipeline agents.
    Run(AgentsRunArgs),
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("work").required(true).multiple(true).args(["listen", "requests"]))]
pub struct AgentsRunArgs {
    /// Accept remote agents on this address and keep serving.
    #[arg(long)]
    pub listen: Option<String>,
    /// JSON lines `{"topic", "payload", "correlation_id"?}` to send through
    /// the pipeline; replies are printed one per line.
    #[arg(long)]
    pub requests: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "llm")]
    pub generator: GeneratorKind,
    #[command(flatten)]
    pub llm: LlmArgs,
}

fn main() -> ExitCode {
    tracing_init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e).expect("error serializes"));
            ExitCode::from(1)
        }
    }
}

fn tracing_init() {
    // library diagnostics stay quiet unless RUST_LOG asks for them
    if std::env::var_os("RUST_LOG").is_some() {
        tracing_subscriber::fmt().with_writer(std::io::stderr).with_env_filter(tracing_subscriber::EnvFilter::from_default_env()).init();
    }
}
