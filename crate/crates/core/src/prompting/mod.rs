//! Prompt rendering for the two prompt variants.
//!
//! Every prompt carries the relevance-labelling task. The extended variant
//! also asks the model to write a background story for the target article
//! from the items it labelled relevant, introduced by the marker line
//! [`STORY_MARKER`]. The marker never appears in baseline prompts.

mod chunk;
mod template;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ArticleId, NewsArticle};
use crate::digest;

pub use chunk::pack_greedy;
pub use template::{Placeholder, Template, DEFAULT_BASELINE, DEFAULT_EXTENDED};

/// Line that introduces the background story in extended responses.
pub const STORY_MARKER: &str = "Background Story:";
/// Prefix of the line that carries the target title in shipped templates.
pub const TARGET_TITLE_PREFIX: &str = "Target title: ";
pub const CONTEXT_BEGIN: &str = "### CONTEXT NEWS BEGIN";
pub const CONTEXT_END: &str = "### CONTEXT NEWS END";

pub const EXCERPT_TOKENS: usize = 60;
pub const DEFAULT_BUDGET_TOKENS: usize = 3000;

pub const TASK_INSTRUCTIONS: &str = "\
Task 1 (relevance): For every numbered Context News item, decide whether it is part of the background of the Target News.
Answer with exactly one line per item, in item order, using this format:
<index>. <LABEL> - <one-sentence rationale>
where <LABEL> is either RELEVANT or IRRELEVANT.
";

pub const EXTENDED_INSTRUCTIONS: &str = "\
Task 2 (background story): After all label lines, write a line that reads exactly
Background Story:
and below it write a short narrative of the background of the Target News. Use only the Context News items you labelled RELEVANT and cite each one you use as [index].
";

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("unknown template placeholder {{{{{0}}}}}")]
    UnknownPlaceholder(String),
    #[error("template is missing required placeholder {{{{{0}}}}}")]
    MissingPlaceholder(String),
    #[error("cannot read template {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error(
        "snippet for article {article_id} needs {needed} tokens with overhead, budget is {budget}"
    )]
    Budget {
        article_id: ArticleId,
        needed: usize,
        budget: usize,
    },
    #[error("cannot render a prompt over an empty batch")]
    EmptyBatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PromptVariant {
    #[serde(rename = "baseline")]
    BaselineOnly,
    #[serde(rename = "extended")]
    ExtendedTask,
}

impl PromptVariant {
    pub const BOTH: [PromptVariant; 2] = [PromptVariant::BaselineOnly, PromptVariant::ExtendedTask];

    pub fn tag(self) -> &'static str {
        match self {
            PromptVariant::BaselineOnly => "baseline",
            PromptVariant::ExtendedTask => "extended",
        }
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for PromptVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(PromptVariant::BaselineOnly),
            "extended" => Ok(PromptVariant::ExtendedTask),
            other => Err(format!(
                "unknown variant {other:?} (expected baseline or extended)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSnippet {
    pub index: usize,
    pub article_id: ArticleId,
    pub date: String,
    pub title: String,
    pub excerpt: String,
}

/// First `n` whitespace-delimited tokens of `text`, joined by single spaces.
pub fn excerpt(text: &str, n: usize) -> String {
    text.split_whitespace()
        .take(n)
        .collect::<Vec<_>>()
        .join(" ")
}

/// ceil(chars / 4), counting Unicode scalar values.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

// Keeps article text from impersonating the story marker.
fn sanitize(text: &str) -> String {
    text.replace(STORY_MARKER, "Background Story -")
}

impl ContextSnippet {
    pub fn from_article(article: &NewsArticle, index: usize) -> Self {
        Self {
            index,
            article_id: article.id.clone(),
            date: article.published_at.format("%Y-%m-%d").to_string(),
            title: article.title.clone(),
            excerpt: excerpt(&article.body, EXCERPT_TOKENS),
        }
    }

    /// The snippet's entry in the context list, including its trailing newline.
    pub fn render_item(&self) -> String {
        self.render_item_with_index(self.index)
    }

    fn render_item_with_index(&self, index: usize) -> String {
        let excerpt = if self.excerpt.is_empty() {
            "(no text)".to_string()
        } else {
            sanitize(&self.excerpt)
        };
        format!(
            "{index}. [{}] {}\n   Excerpt: {excerpt}\n",
            self.date,
            sanitize(&self.title)
        )
    }
}

fn render_context_list(snippets: &[ContextSnippet]) -> String {
    let mut s = String::new();
    s.push_str(CONTEXT_BEGIN);
    s.push('\n');
    for snip in snippets {
        s.push_str(&snip.render_item());
    }
    s.push_str(CONTEXT_END);
    s.push('\n');
    s
}

fn render_text(
    target: &NewsArticle,
    snippets: &[ContextSnippet],
    variant: PromptVariant,
    template: &Template,
) -> String {
    template.fill(|p| match p {
        Placeholder::TargetTitle => sanitize(&target.title),
        Placeholder::TargetDate => target.published_at.format("%Y-%m-%d").to_string(),
        Placeholder::TargetExcerpt => sanitize(&excerpt(&target.body, EXCERPT_TOKENS)),
        Placeholder::ContextList => render_context_list(snippets),
        Placeholder::TaskInstructions => TASK_INSTRUCTIONS.to_string(),
        Placeholder::ExtendedInstructions => match variant {
            PromptVariant::BaselineOnly => String::new(),
            PromptVariant::ExtendedTask => EXTENDED_INSTRUCTIONS.to_string(),
        },
    })
}

/// Token estimate of the prompt rendered with an empty context list.
pub fn prompt_overhead(
    target: &NewsArticle,
    variant: PromptVariant,
    template: &Template,
) -> Result<usize, PromptError> {
    template.check_required()?;
    Ok(estimate_tokens(&render_text(
        target,
        &[],
        variant,
        template,
    )))
}

/// Batches snippets greedily in order under `budget_tokens` and renumbers
/// each batch from 1.
///
/// Snippet estimates are taken with the widest index the list can produce,
/// so that renumbering never makes a batch grow.
pub fn chunk_candidates(
    snippets: &[ContextSnippet],
    budget_tokens: usize,
    overhead_tokens: usize,
) -> Result<Vec<Vec<ContextSnippet>>, PromptError> {
    let estimates = snippet_estimates(snippets);
    let ranges = pack_greedy(&estimates, budget_tokens, overhead_tokens).map_err(|i| {
        PromptError::Budget {
            article_id: snippets[i].article_id.clone(),
            needed: overhead_tokens + estimates[i],
            budget: budget_tokens,
        }
    })?;
    Ok(ranges
        .into_iter()
        .map(|r| {
            snippets[r]
                .iter()
                .enumerate()
                .map(|(k, s)| ContextSnippet {
                    index: k + 1,
                    ..s.clone()
                })
                .collect()
        })
        .collect())
}

/// Per-snippet token estimates used by [`chunk_candidates`].
pub fn snippet_estimates(snippets: &[ContextSnippet]) -> Vec<usize> {
    let widest = snippets.len().max(1);
    snippets
        .iter()
        .map(|s| estimate_tokens(&s.render_item_with_index(widest)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub bundle_id: String,
    pub target_id: ArticleId,
    pub variant: PromptVariant,
    pub snippets: Vec<ContextSnippet>,
    pub template_id: String,
    pub rendered: String,
    pub token_estimate: usize,
}

impl PromptBundle {
    pub fn snippet(&self, index: usize) -> Option<&ContextSnippet> {
        index.checked_sub(1).and_then(|i| self.snippets.get(i))
    }
}

pub fn bundle_id(
    target_id: &ArticleId,
    variant: PromptVariant,
    members: &[ContextSnippet],
    template_id: &str,
) -> String {
    let ids = members
        .iter()
        .map(|s| s.article_id.as_str())
        .collect::<Vec<_>>()
        .join(",");
    digest::digest_fields(&[target_id.as_str(), variant.tag(), &ids, template_id])
}

pub fn render_prompt(
    target: &NewsArticle,
    batch: &[ContextSnippet],
    variant: PromptVariant,
    template: &Template,
) -> Result<PromptBundle, PromptError> {
    if batch.is_empty() {
        return Err(PromptError::EmptyBatch);
    }
    template.check_required()?;
    let snippets: Vec<ContextSnippet> = batch
        .iter()
        .enumerate()
        .map(|(k, s)| ContextSnippet {
            index: k + 1,
            ..s.clone()
        })
        .collect();
    let rendered = render_text(target, &snippets, variant, template);
    Ok(PromptBundle {
        bundle_id: bundle_id(&target.id, variant, &snippets, template.id()),
        target_id: target.id.clone(),
        variant,
        token_estimate: estimate_tokens(&rendered),
        snippets,
        template_id: template.id().to_string(),
        rendered,
    })
}
