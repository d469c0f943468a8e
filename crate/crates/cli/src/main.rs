//! `chronoweave`: build background timelines for a news article from a local
//! corpus, with an LLM deciding which earlier articles are relevant.

/// `println!` that tolerates a closed stdout, e.g. when piped into `head`.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use chronoweave_core::timeline::{ExportFormat, Order};
use chronoweave_core::PromptVariant;
use clap::{Args, Parser, Subcommand};

use crate::config::BackendKind;

#[derive(Debug, Parser)]
#[command(
    name = "chronoweave",
    version,
    about = "LLM-judged background timelines for news articles"
)]
pub struct Cli {
    /// TOML file whose keys mirror the command-line flags.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Completion backend.
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendKind>,

    /// Response cache directory [default: ./.cache].
    #[arg(long, global = true, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,

    /// Output path: a file for ingest and candidates, a directory otherwise.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Prompt variant for the timeline command [default: extended].
    #[arg(long, global = true)]
    pub variant: Option<PromptVariant>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize a corpus file and/or fetched pages into a corpus file.
    Ingest(IngestArgs),
    /// Show the scored candidate set for a target.
    Candidates(CandidatesArgs),
    /// Run the full pipeline for one target and export its timeline.
    Timeline(TimelineArgs),
    /// Score both variants against gold labels.
    Eval(EvalArgs),
    /// Inspect or clear the response cache.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Corpus JSON-lines file to normalize.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Page to fetch and add; may be repeated.
    #[arg(long = "fetch", value_name = "URL")]
    pub fetch: Vec<String>,
    /// File with one url per line to fetch.
    #[arg(long, value_name = "FILE")]
    pub fetch_list: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct RetrievalArgs {
    #[arg(long)]
    pub window_days: Option<u32>,
    #[arg(long)]
    pub max_candidates: Option<usize>,
    #[arg(long)]
    pub halflife_days: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CandidatesArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Article id or url of the target.
    #[arg(long)]
    pub target: Option<String>,
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
}

#[derive(Debug, Args, Default)]
pub struct GenerationArgs {
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_output_tokens: Option<u32>,
    /// Token budget per rendered prompt.
    #[arg(long)]
    pub budget_tokens: Option<usize>,
    /// Base url of the live chat-completion endpoint.
    #[arg(long)]
    pub base_url: Option<String>,
    /// Cap on concurrent backend calls.
    #[arg(long)]
    pub max_in_flight: Option<usize>,
    #[arg(long, value_name = "FILE")]
    pub baseline_template: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub extended_template: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TimelineArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Article id or url of the target.
    #[arg(long)]
    pub target: Option<String>,
    /// Export format; may be repeated [default: all].
    #[arg(long = "format", value_name = "FORMAT")]
    pub formats: Vec<ExportFormat>,
    /// Entry order in Markdown and HTML exports [default: asc].
    #[arg(long)]
    pub order: Option<Order>,
    /// Timestamp recorded in the timeline [default: the target's publication time].
    #[arg(long, value_name = "RFC3339")]
    pub generated_at: Option<String>,
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
    #[command(flatten)]
    pub generation: GenerationArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Gold labels as JSON-lines.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    /// Score existing baseline judgments instead of running the pipeline.
    #[arg(long, value_name = "FILE", requires = "judgments_extended")]
    pub judgments_baseline: Option<PathBuf>,
    /// Score existing extended judgments instead of running the pipeline.
    #[arg(long, value_name = "FILE", requires = "judgments_baseline")]
    pub judgments_extended: Option<PathBuf>,
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
    #[command(flatten)]
    pub generation: GenerationArgs,
}

#[derive(Debug, Subcommand)]
pub enum CacheAction {
    /// List cached responses.
    Inspect,
    /// Delete every cached response.
    Clear,
}

fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_env("CHRONOWEAVE_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    let runtime = match tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
    {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start runtime: {e}");
            return ExitCode::from(1);
        }
    };
    match runtime.block_on(commands::run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
