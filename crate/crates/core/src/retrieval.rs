//! Lexical-temporal candidate selection.
//!
//! Context candidates are the articles published inside a window ending at
//! the target's publication instant. Each is scored as
//! `lexical_weight * J + recency_weight * exp(-days / halflife_days)`, where
//! `J` is the Jaccard similarity of the term sets built from the title plus
//! the first [`BODY_PREFIX_TOKENS`] body tokens.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ArticleId, NewsArticle};

pub const BODY_PREFIX_TOKENS: usize = 50;

#[derive(Debug, Error, PartialEq)]
pub enum RetrievalError {
    #[error("candidate {candidate} is published after target {target}")]
    Ordering {
        target: ArticleId,
        candidate: ArticleId,
    },
    #[error("target {0} is not in the corpus")]
    Lookup(String),
    #[error("invalid retrieval parameters: {0}")]
    Params(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalParams {
    pub window_days: u32,
    pub max_candidates: usize,
    pub halflife_days: f64,
    pub lexical_weight: f64,
    pub recency_weight: f64,
}

impl Default for RetrievalParams {
    fn default() -> Self {
        Self {
            window_days: 365,
            max_candidates: 20,
            halflife_days: 30.0,
            lexical_weight: 0.7,
            recency_weight: 0.3,
        }
    }
}

impl RetrievalParams {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if self.window_days < 1 {
            return Err(RetrievalError::Params("window_days must be >= 1".into()));
        }
        if self.max_candidates < 1 {
            return Err(RetrievalError::Params("max_candidates must be >= 1".into()));
        }
        if !(self.halflife_days > 0.0 && self.halflife_days.is_finite()) {
            return Err(RetrievalError::Params("halflife_days must be > 0".into()));
        }
        let (l, r) = (self.lexical_weight, self.recency_weight);
        if !(l >= 0.0 && r >= 0.0 && ((l + r) - 1.0).abs() < 1e-9) {
            return Err(RetrievalError::Params(
                "weights must be non-negative and sum to 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub article_id: ArticleId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub target_id: ArticleId,
    pub entries: Vec<ScoredCandidate>,
}

/// Lowercased alphanumeric runs of at least two characters, in order.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_lowercase)
        .collect()
}

fn term_set(article: &NewsArticle) -> HashSet<String> {
    tokenize(&article.title)
        .into_iter()
        .chain(tokenize(&article.body).into_iter().take(BODY_PREFIX_TOKENS))
        .collect()
}

/// Jaccard similarity; two empty sets score 0.
pub fn jaccard(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

fn combine(j: f64, delta_days: i64, params: &RetrievalParams) -> f64 {
    let decay = (-(delta_days as f64) / params.halflife_days).exp();
    (params.lexical_weight * j + params.recency_weight * decay).clamp(0.0, 1.0)
}

pub fn score_candidate(
    target: &NewsArticle,
    candidate: &NewsArticle,
    params: &RetrievalParams,
) -> Result<f64, RetrievalError> {
    if candidate.published_at > target.published_at {
        return Err(RetrievalError::Ordering {
            target: target.id.clone(),
            candidate: candidate.id.clone(),
        });
    }
    let j = jaccard(&term_set(target), &term_set(candidate));
    let delta = (target.published_at - candidate.published_at).num_days();
    Ok(combine(j, delta, params))
}

/// Scores every in-window article and keeps the top `max_candidates`,
/// ordered by score descending then id ascending.
pub fn select_candidates(
    target_id: &ArticleId,
    corpus: &[NewsArticle],
    params: &RetrievalParams,
) -> Result<CandidateSet, RetrievalError> {
    params.validate()?;
    let target = corpus
        .iter()
        .find(|a| &a.id == target_id)
        .ok_or_else(|| RetrievalError::Lookup(target_id.to_string()))?;
    let earliest = target.published_at - chrono::Duration::days(i64::from(params.window_days));
    let target_terms = term_set(target);

    let mut best: HashMap<&ArticleId, f64> = HashMap::new();
    for a in corpus {
        if a.id == target.id || a.published_at < earliest || a.published_at > target.published_at {
            continue;
        }
        let j = jaccard(&target_terms, &term_set(a));
        let delta = (target.published_at - a.published_at).num_days();
        best.entry(&a.id)
            .or_insert_with(|| combine(j, delta, params));
    }

    let mut entries: Vec<ScoredCandidate> = best
        .into_iter()
        .map(|(id, score)| ScoredCandidate {
            article_id: id.clone(),
            score,
        })
        .collect();
    entries.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.article_id.cmp(&b.article_id))
    });
    entries.truncate(params.max_candidates);

    Ok(CandidateSet {
        target_id: target.id.clone(),
        entries,
    })
}
