use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use chronoweave_core::corpus::{
    article_from_document, export_corpus, fetch_article, load_corpus, CorpusError, FetchOptions,
    NewsArticle,
};
use chronoweave_core::evaluation::{
    self, compare_variants, evaluate, format_table, EvalReport, GoldLabel,
};
use chronoweave_core::fsutil::{canonical_json, canonical_jsonl, write_atomic};
use chronoweave_core::llm::{
    Backend, HttpBackend, HttpBackendConfig, LlmClient, MockBackend, ResponseCache, RetryPolicy,
    API_KEY_ENV, DEFAULT_MAX_IN_FLIGHT,
};
use chronoweave_core::parsing::{Label, ParseDiagnostics, RelevanceJudgment};
use chronoweave_core::pipeline::{
    build_timeline, find_target, run_variant, GenerationParams, VariantRun,
};
use chronoweave_core::prompting::Template;
use chronoweave_core::retrieval::{select_candidates, RetrievalParams};
use chronoweave_core::timeline::{export, ExportFormat};
use chronoweave_core::PromptVariant;
use serde::Serialize;

use crate::config::{
    require_file, BackendKind, FileConfig, DEFAULT_BASE_URL, DEFAULT_CACHE_DIR, DEFAULT_OUT_DIR,
};
use crate::error::CliError;
use crate::{
    CacheAction, CandidatesArgs, Cli, Command, EvalArgs, GenerationArgs, IngestArgs, RetrievalArgs,
    TimelineArgs,
};

/// Global flags merged over the config file.
struct Globals {
    file: FileConfig,
    backend: BackendKind,
    cache_dir: PathBuf,
    out: Option<PathBuf>,
    variant: PromptVariant,
}

pub async fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let g = Globals {
        backend: cli.backend.or(file.backend).unwrap_or_default(),
        cache_dir: cli
            .cache_dir
            .or_else(|| file.cache_dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR)),
        out: cli.out.or_else(|| file.out.clone()),
        variant: cli
            .variant
            .or(file.variant)
            .unwrap_or(PromptVariant::ExtendedTask),
        file,
    };
    match cli.command {
        Command::Ingest(args) => ingest(&g, args).await,
        Command::Candidates(args) => candidates(&g, args),
        Command::Timeline(args) => timeline(&g, args).await,
        Command::Eval(args) => eval(&g, args).await,
        Command::Cache { action } => cache(&g, action),
    }
}

fn required<T>(what: &str, value: Option<T>) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Input(format!("missing {what} (flag or config key)")))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    write_atomic(path, text.as_bytes())
        .map_err(|e| CliError::io(format!("cannot write {}", path.display()), e))
}

fn ensure_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::io(format!("cannot create {}", path.display()), e))
}

fn load_articles(path: &Path) -> Result<Vec<NewsArticle>, CliError> {
    require_file("corpus", path)?;
    Ok(load_corpus(path)?.articles)
}

fn retrieval_params(g: &Globals, args: &RetrievalArgs) -> Result<RetrievalParams, CliError> {
    let mut p = g.file.retrieval.clone().unwrap_or_default();
    if let Some(v) = args.window_days {
        p.window_days = v;
    }
    if let Some(v) = args.max_candidates {
        p.max_candidates = v;
    }
    if let Some(v) = args.halflife_days {
        p.halflife_days = v;
    }
    p.validate()?;
    Ok(p)
}

fn generation_params(g: &Globals, args: &GenerationArgs) -> GenerationParams {
    let defaults = GenerationParams::default();
    let section = &g.file.generation;
    GenerationParams {
        model: args
            .model
            .clone()
            .or_else(|| section.model.clone())
            .unwrap_or(defaults.model),
        temperature: args
            .temperature
            .or(section.temperature)
            .unwrap_or(defaults.temperature),
        max_output_tokens: args
            .max_output_tokens
            .or(section.max_output_tokens)
            .unwrap_or(defaults.max_output_tokens),
        budget_tokens: args
            .budget_tokens
            .or(g.file.budget_tokens)
            .unwrap_or(defaults.budget_tokens),
    }
}

fn load_template(
    g: &Globals,
    args: &GenerationArgs,
    variant: PromptVariant,
) -> Result<Template, CliError> {
    let path = match variant {
        PromptVariant::BaselineOnly => args
            .baseline_template
            .clone()
            .or_else(|| g.file.templates.baseline.clone()),
        PromptVariant::ExtendedTask => args
            .extended_template
            .clone()
            .or_else(|| g.file.templates.extended.clone()),
    };
    Ok(match path {
        Some(p) => Template::load(&p)?,
        None => match variant {
            PromptVariant::BaselineOnly => Template::default_baseline(),
            PromptVariant::ExtendedTask => Template::default_extended(),
        },
    })
}

/// Builds the completion client. The mock path never constructs an HTTP client.
fn make_client(g: &Globals, args: &GenerationArgs) -> Result<LlmClient, CliError> {
    let cache = ResponseCache::open(&g.cache_dir)?;
    let live = &g.file.live;
    let backend: Arc<dyn Backend> = match g.backend {
        BackendKind::Mock => Arc::new(MockBackend),
        BackendKind::Live => {
            let base_url = args
                .base_url
                .clone()
                .or_else(|| live.base_url.clone())
                .unwrap_or_else(|| DEFAULT_BASE_URL.to_string());
            let mut config = HttpBackendConfig::from_env(base_url);
            if config.api_key.is_none() {
                tracing::warn!("{API_KEY_ENV} is not set; sending requests without a bearer token");
            }
            if let Some(secs) = live.timeout_secs {
                config.timeout = Duration::from_secs(secs);
            }
            Arc::new(HttpBackend::new(config).map_err(CliError::Backend)?)
        }
    };
    let mut retry = RetryPolicy::default();
    if let Some(n) = live.max_retries {
        retry.max_retries = n;
    }
    let in_flight = args
        .max_in_flight
        .or(live.max_in_flight)
        .unwrap_or(DEFAULT_MAX_IN_FLIGHT);
    if in_flight == 0 {
        return Err(CliError::Input("max_in_flight must be at least 1".into()));
    }
    Ok(LlmClient::new(backend, cache)
        .with_retry(retry)
        .with_max_in_flight(in_flight))
}

async fn ingest(g: &Globals, args: IngestArgs) -> Result<(), CliError> {
    let out = required("--out", g.out.clone())?;
    let corpus_path = args.corpus.or_else(|| g.file.corpus.clone());
    let mut urls = args.fetch;
    if let Some(list) = &args.fetch_list {
        require_file("fetch list", list)?;
        let text = std::fs::read_to_string(list)
            .map_err(|e| CliError::io(format!("cannot read {}", list.display()), e))?;
        urls.extend(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_string),
        );
    }
    if corpus_path.is_none() && urls.is_empty() {
        return Err(CliError::Input(
            "nothing to ingest: give --corpus and/or --fetch".into(),
        ));
    }

    let (mut articles, mut duplicates) = match &corpus_path {
        Some(p) => {
            require_file("corpus", p)?;
            let loaded = load_corpus(p)?;
            let d = loaded.duplicate_count();
            (loaded.articles, d)
        }
        None => (Vec::new(), 0),
    };
    let mut rejected: Vec<(String, String)> = Vec::new();
    let opts = FetchOptions::default();
    for url in &urls {
        let doc = fetch_article(url, &opts).await?;
        match article_from_document(&doc) {
            Ok(a) if articles.iter().any(|b| b.id == a.id) => duplicates += 1,
            Ok(a) => articles.push(a),
            Err(
                e
                @ (CorpusError::Extraction(_) | CorpusError::Validation(_) | CorpusError::Date(_)),
            ) => rejected.push((url.clone(), e.to_string())),
            Err(e) => return Err(e.into()),
        }
    }

    export_corpus(&articles, &out)?;
    for (url, reason) in &rejected {
        say!("rejected {url}: {reason}");
    }
    say!(
        "{} loaded, {} duplicates, {} rejected",
        articles.len(),
        duplicates,
        rejected.len()
    );
    Ok(())
}

fn candidates(g: &Globals, args: CandidatesArgs) -> Result<(), CliError> {
    let corpus_path = required("--corpus", args.corpus.or_else(|| g.file.corpus.clone()))?;
    let selector = required("--target", args.target.or_else(|| g.file.target.clone()))?;
    let params = retrieval_params(g, &args.retrieval)?;
    let corpus = load_articles(&corpus_path)?;
    let target = find_target(&corpus, &selector)
        .ok_or_else(|| CliError::Input(format!("target {selector:?} is not in the corpus")))?;
    let set = select_candidates(&target.id, &corpus, &params)?;

    for (i, c) in set.entries.iter().enumerate() {
        let a = corpus
            .iter()
            .find(|a| a.id == c.article_id)
            .expect("candidates come from the corpus");
        say!(
            "{:>3}. {:.4}  {}  {}  {}",
            i + 1,
            c.score,
            a.published_at.format("%Y-%m-%d"),
            c.article_id,
            a.title
        );
    }
    say!("{} candidates for {}", set.entries.len(), target.id);
    if let Some(out) = &g.out {
        write_file(out, &canonical_json(&set))?;
    }
    Ok(())
}

#[derive(Debug, Default)]
struct DiagTotals {
    unparsed: usize,
    missing: usize,
    duplicates: usize,
    citation_violations: usize,
    defaulted: usize,
}

impl DiagTotals {
    fn add(&mut self, diags: &[ParseDiagnostics]) {
        for d in diags {
            self.unparsed += d.unparsed_lines.len();
            self.missing += d.missing_indices.len();
            self.duplicates += d.duplicate_indices.len();
            self.citation_violations += d.citation_violations.len();
            self.defaulted += d.defaulted_indices.len();
        }
    }
}

impl std::fmt::Display for DiagTotals {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "unparsed_lines={} missing={} duplicates={} citation_violations={} defaulted={}",
            self.unparsed, self.missing, self.duplicates, self.citation_violations, self.defaulted
        )
    }
}

fn parse_generated_at(raw: Option<&str>, target: &NewsArticle) -> Result<DateTime<Utc>, CliError> {
    match raw {
        Some(s) => DateTime::parse_from_rfc3339(s)
            .map(|d| d.with_timezone(&Utc))
            .map_err(|e| CliError::Input(format!("--generated-at {s:?}: {e}"))),
        None => Ok(target.published_at),
    }
}

async fn timeline(g: &Globals, args: TimelineArgs) -> Result<(), CliError> {
    // Everything that can fail on input is checked before the first completion.
    let corpus_path = required("--corpus", args.corpus.or_else(|| g.file.corpus.clone()))?;
    let selector = required("--target", args.target.or_else(|| g.file.target.clone()))?;
    let retrieval = retrieval_params(g, &args.retrieval)?;
    let generation = generation_params(g, &args.generation);
    let template = load_template(g, &args.generation, g.variant)?;
    let order = args.order.or(g.file.order).unwrap_or_default();
    let formats: Vec<ExportFormat> = if args.formats.is_empty() {
        ExportFormat::ALL.to_vec()
    } else {
        ExportFormat::ALL
            .into_iter()
            .filter(|f| args.formats.contains(f))
            .collect()
    };
    let corpus = load_articles(&corpus_path)?;
    let target = find_target(&corpus, &selector)
        .ok_or_else(|| CliError::Input(format!("target {selector:?} is not in the corpus")))?;
    let generated_at = parse_generated_at(args.generated_at.as_deref(), target)?;
    let out_dir = g
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    ensure_dir(&out_dir)?;
    let client = make_client(g, &args.generation)?;

    let run = run_variant(
        target,
        &corpus,
        &retrieval,
        &generation,
        g.variant,
        &template,
        &client,
    )
    .await?;
    let tl = build_timeline(target, &corpus, &run, generated_at)?;

    write_stage_files(&out_dir, &run, "")?;
    let mut written = Vec::new();
    for f in formats {
        let path = out_dir.join(format!("timeline.{}", f.extension()));
        export(&tl, f, order, &path)?;
        written.push(path.display().to_string());
    }

    let mut totals = DiagTotals::default();
    totals.add(&run.diagnostics);
    let relevant = run
        .judgments
        .iter()
        .filter(|j| j.label == Label::Relevant)
        .count();
    say!(
        "timeline: {} entries ({}) -> {}",
        tl.entries.len(),
        g.variant.tag(),
        written.join(", ")
    );
    say!(
        "judgments: {} ({} relevant) over {} bundle(s), stories: {}",
        run.judgments.len(),
        relevant,
        run.bundles.len(),
        tl.stories.len()
    );
    say!("diagnostics: {totals}");
    print_call_stats(&client);
    Ok(())
}

fn print_call_stats(client: &LlmClient) {
    let s = client.stats();
    say!(
        "backend calls: {}, cache hits: {}, retries: {}",
        s.backend_calls(),
        s.cache_hits(),
        s.retries()
    );
}

/// Replayable per-stage outputs: candidates, rendered bundles, judgments and
/// parser diagnostics.
fn write_stage_files(dir: &Path, run: &VariantRun, suffix: &str) -> Result<(), CliError> {
    write_file(
        &dir.join(format!("candidates{suffix}.json")),
        &canonical_json(&run.candidates),
    )?;
    write_file(
        &dir.join(format!("bundles{suffix}.jsonl")),
        &canonical_jsonl(&run.bundles),
    )?;
    write_file(
        &dir.join(format!("judgments{suffix}.jsonl")),
        &canonical_jsonl(&run.judgments),
    )?;
    write_file(
        &dir.join(format!("diagnostics{suffix}.jsonl")),
        &canonical_jsonl(&run.diagnostics),
    )
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    baseline: &'a EvalReport,
    extended: &'a EvalReport,
    comparison: &'a evaluation::VariantComparison,
}

/// Distinct gold targets in first-appearance order.
fn gold_targets(gold: &[GoldLabel]) -> Vec<chronoweave_core::ArticleId> {
    let mut seen = BTreeSet::new();
    gold.iter()
        .filter(|g| seen.insert(g.target_id.clone()))
        .map(|g| g.target_id.clone())
        .collect()
}

async fn eval(g: &Globals, args: EvalArgs) -> Result<(), CliError> {
    let gold_path = required("--gold", args.gold.clone().or_else(|| g.file.gold.clone()))?;
    require_file("gold", &gold_path)?;
    let gold = evaluation::load_gold(&gold_path)?;
    let out_dir = g
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));

    let (base_j, ext_j, client) = match (&args.judgments_baseline, &args.judgments_extended) {
        (Some(b), Some(e)) => {
            require_file("judgments", b)?;
            require_file("judgments", e)?;
            ensure_dir(&out_dir)?;
            (
                evaluation::load_judgments(b)?,
                evaluation::load_judgments(e)?,
                None,
            )
        }
        _ => {
            let (b, e, client) = run_both(g, &args, &gold, &out_dir).await?;
            (b, e, Some(client))
        }
    };

    let base = evaluate(PromptVariant::BaselineOnly, &base_j, &gold)?;
    let ext = evaluate(PromptVariant::ExtendedTask, &ext_j, &gold)?;
    let cmp = compare_variants(&base, &ext)?;
    let report_path = out_dir.join("eval.json");
    write_file(
        &report_path,
        &canonical_json(&EvalOutput {
            baseline: &base,
            extended: &ext,
            comparison: &cmp,
        }),
    )?;
    say!("{}", format_table(&base, &ext, &cmp).trim_end());
    say!("report: {}", report_path.display());
    if let Some(client) = client {
        print_call_stats(&client);
    }
    Ok(())
}

/// Runs both variants over every gold target with the same candidate sets.
async fn run_both(
    g: &Globals,
    args: &EvalArgs,
    gold: &[GoldLabel],
    out_dir: &Path,
) -> Result<(Vec<RelevanceJudgment>, Vec<RelevanceJudgment>, LlmClient), CliError> {
    let corpus_path = required(
        "--corpus",
        args.corpus.clone().or_else(|| g.file.corpus.clone()),
    )?;
    let retrieval = retrieval_params(g, &args.retrieval)?;
    let generation = generation_params(g, &args.generation);
    let templates = [
        load_template(g, &args.generation, PromptVariant::BaselineOnly)?,
        load_template(g, &args.generation, PromptVariant::ExtendedTask)?,
    ];
    let corpus = load_articles(&corpus_path)?;
    let targets = gold_targets(gold);
    for t in &targets {
        if !corpus.iter().any(|a| &a.id == t) {
            return Err(CliError::Eval(format!(
                "gold target {t} is not in the corpus"
            )));
        }
    }
    ensure_dir(out_dir)?;
    let client = make_client(g, &args.generation)?;

    let mut judgments = [Vec::new(), Vec::new()];
    let mut diagnostics = [Vec::new(), Vec::new()];
    for t in &targets {
        let target = corpus.iter().find(|a| &a.id == t).expect("checked above");
        for (i, variant) in PromptVariant::BOTH.into_iter().enumerate() {
            let run = run_variant(
                target,
                &corpus,
                &retrieval,
                &generation,
                variant,
                &templates[i],
                &client,
            )
            .await?;
            judgments[i].extend(run.judgments);
            diagnostics[i].extend(run.diagnostics);
        }
    }
    let mut totals = DiagTotals::default();
    for (i, variant) in PromptVariant::BOTH.into_iter().enumerate() {
        let tag = variant.tag();
        write_file(
            &out_dir.join(format!("judgments-{tag}.jsonl")),
            &canonical_jsonl(&judgments[i]),
        )?;
        write_file(
            &out_dir.join(format!("diagnostics-{tag}.jsonl")),
            &canonical_jsonl(&diagnostics[i]),
        )?;
        totals.add(&diagnostics[i]);
    }
    say!("targets: {}, diagnostics: {totals}", targets.len());
    let [b, e] = judgments;
    Ok((b, e, client))
}

fn cache(g: &Globals, action: CacheAction) -> Result<(), CliError> {
    let cache = ResponseCache::open(&g.cache_dir)?;
    match action {
        CacheAction::Inspect => {
            let entries = cache.entries()?;
            for e in &entries {
                say!(
                    "{}  {}  {}  {}  {} chars",
                    e.key,
                    e.backend,
                    e.request.model,
                    e.created_at.to_rfc3339(),
                    e.text.chars().count()
                );
            }
            say!("{} entries in {}", entries.len(), cache.dir().display());
        }
        CacheAction::Clear => {
            let n = cache.clear()?;
            say!("removed {n} entries from {}", cache.dir().display());
        }
    }
    Ok(())
}
