//! One target article through retrieve, chunk, render, complete and parse.

use chrono::{DateTime, Utc};
use futures::future::join_all;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ArticleId, NewsArticle};
use crate::llm::{LlmClient, LlmError, LlmRequest};
use crate::parsing::{
    parse_judgments, parse_story, validate_story_citations, BackgroundStory, ParseDiagnostics,
    RelevanceJudgment,
};
use crate::prompting::{
    chunk_candidates, prompt_overhead, render_prompt, ContextSnippet, PromptBundle, PromptError,
    PromptVariant, Template, DEFAULT_BUDGET_TOKENS,
};
use crate::retrieval::{select_candidates, CandidateSet, RetrievalError, RetrievalParams};
use crate::timeline::{assemble, Timeline, TimelineError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Timeline(#[from] TimelineError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationParams {
    pub model: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub budget_tokens: usize,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            model: "gpt-3.5-turbo".into(),
            temperature: 0.0,
            max_output_tokens: 1024,
            budget_tokens: DEFAULT_BUDGET_TOKENS,
        }
    }
}

/// Everything one variant produced for one target.
#[derive(Debug, Clone)]
pub struct VariantRun {
    pub variant: PromptVariant,
    pub candidates: CandidateSet,
    pub bundles: Vec<PromptBundle>,
    pub judgments: Vec<RelevanceJudgment>,
    pub diagnostics: Vec<ParseDiagnostics>,
    pub stories: Vec<BackgroundStory>,
    /// Completions served by the backend rather than the cache.
    pub backend_calls: usize,
}

/// Looks a target up by article id or by url.
pub fn find_target<'a>(corpus: &'a [NewsArticle], selector: &str) -> Option<&'a NewsArticle> {
    let selector = selector.trim();
    match ArticleId::parse(selector) {
        Some(id) => corpus.iter().find(|a| a.id == id),
        None => corpus.iter().find(|a| a.url == selector),
    }
}

/// Renders the prompt bundles for one variant over a candidate set.
pub fn build_bundles(
    target: &NewsArticle,
    corpus: &[NewsArticle],
    candidates: &CandidateSet,
    variant: PromptVariant,
    template: &Template,
    budget_tokens: usize,
) -> Result<Vec<PromptBundle>, PipelineError> {
    let snippets: Vec<ContextSnippet> = candidates
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            corpus
                .iter()
                .find(|a| a.id == e.article_id)
                .map(|a| ContextSnippet::from_article(a, i + 1))
                .ok_or_else(|| RetrievalError::Lookup(e.article_id.to_string()))
        })
        .collect::<Result<_, _>>()?;
    let overhead = prompt_overhead(target, variant, template)?;
    chunk_candidates(&snippets, budget_tokens, overhead)?
        .iter()
        .map(|batch| render_prompt(target, batch, variant, template).map_err(PipelineError::from))
        .collect()
}

pub async fn run_variant(
    target: &NewsArticle,
    corpus: &[NewsArticle],
    retrieval: &RetrievalParams,
    generation: &GenerationParams,
    variant: PromptVariant,
    template: &Template,
    client: &LlmClient,
) -> Result<VariantRun, PipelineError> {
    let candidates = select_candidates(&target.id, corpus, retrieval)?;
    let bundles = build_bundles(
        target,
        corpus,
        &candidates,
        variant,
        template,
        generation.budget_tokens,
    )?;

    let requests: Vec<LlmRequest> = bundles
        .iter()
        .map(|b| LlmRequest {
            model: generation.model.clone(),
            prompt: b.rendered.clone(),
            temperature: generation.temperature,
            max_output_tokens: generation.max_output_tokens,
        })
        .collect();
    let responses = join_all(requests.iter().map(|r| client.complete(r)))
        .await
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let mut run = VariantRun {
        variant,
        candidates,
        bundles: Vec::new(),
        judgments: Vec::new(),
        diagnostics: Vec::new(),
        stories: Vec::new(),
        backend_calls: responses.iter().filter(|r| !r.cached).count(),
    };
    for (bundle, response) in bundles.into_iter().zip(responses) {
        let (judgments, mut diag) = parse_judgments(&response.text, &bundle);
        match parse_story(&response.text, &bundle) {
            Ok(Some(story)) => {
                let cites = validate_story_citations(&story, &judgments)
                    .expect("story and judgments come from the same bundle");
                diag.merge_citations(&cites);
                run.stories.push(story);
            }
            Ok(None) => {}
            Err(e) => tracing::warn!(error = %e, "dropping empty background story"),
        }
        run.judgments.extend(judgments);
        run.diagnostics.push(diag);
        run.bundles.push(bundle);
    }
    Ok(run)
}

pub fn build_timeline(
    target: &NewsArticle,
    corpus: &[NewsArticle],
    run: &VariantRun,
    generated_at: DateTime<Utc>,
) -> Result<Timeline, PipelineError> {
    Ok(assemble(
        target,
        &run.judgments,
        corpus,
        run.stories.clone(),
        run.variant,
        generated_at,
    )?)
}
