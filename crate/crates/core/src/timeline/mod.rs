//! Timeline assembly from relevance judgments.

mod export;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{collapse_whitespace, ArticleId, NewsArticle};
use crate::parsing::{BackgroundStory, Label, RelevanceJudgment};
use crate::prompting::{excerpt, PromptVariant, EXCERPT_TOKENS};

pub use export::{export, render, ExportFormat, Order};

pub const SCHEMA_VERSION: &str = "v1";

#[derive(Debug, Error, PartialEq)]
pub enum TimelineError {
    #[error("judged article {0} is not in the corpus")]
    Lookup(ArticleId),
    #[error("conflicting labels for {}", .0.iter().map(ArticleId::as_str).collect::<Vec<_>>().join(", "))]
    Conflict(Vec<ArticleId>),
    #[error("judgment for target {found} passed to timeline of {expected}")]
    TargetMismatch {
        expected: ArticleId,
        found: ArticleId,
    },
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
    #[error("unsupported timeline schema version {0:?}")]
    Version(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub article_id: ArticleId,
    pub date: NaiveDate,
    pub headline: String,
    pub excerpt: String,
    pub is_target: bool,
}

impl TimelineEntry {
    fn from_article(a: &NewsArticle, is_target: bool) -> Self {
        Self {
            article_id: a.id.clone(),
            date: a.published_at.date_naive(),
            headline: a.title.clone(),
            excerpt: excerpt(&a.body, EXCERPT_TOKENS),
            is_target,
        }
    }

    fn dedup_key(&self) -> (NaiveDate, String) {
        (
            self.date,
            collapse_whitespace(&self.headline).to_lowercase(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub version: String,
    pub target_id: ArticleId,
    pub entries: Vec<TimelineEntry>,
    pub generated_at: DateTime<Utc>,
    pub variant: PromptVariant,
    /// Background stories, one per prompt bundle that produced one.
    pub stories: Vec<BackgroundStory>,
}

impl Timeline {
    pub fn target(&self) -> Option<&TimelineEntry> {
        self.entries.iter().find(|e| e.is_target)
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Builds the timeline for `target` from judgments gathered across bundles.
///
/// Entries with equal dates and equal casefolded titles collapse to the one
/// with the smaller article id; the target itself always survives.
pub fn assemble(
    target: &NewsArticle,
    judgments: &[RelevanceJudgment],
    corpus: &[NewsArticle],
    stories: Vec<BackgroundStory>,
    variant: PromptVariant,
    generated_at: DateTime<Utc>,
) -> Result<Timeline, TimelineError> {
    let mut labels: BTreeMap<&ArticleId, Label> = BTreeMap::new();
    let mut conflicts = BTreeSet::new();
    for j in judgments {
        if j.target_id != target.id {
            return Err(TimelineError::TargetMismatch {
                expected: target.id.clone(),
                found: j.target_id.clone(),
            });
        }
        match labels.get(&j.context_id) {
            Some(l) if *l != j.label => {
                conflicts.insert(j.context_id.clone());
            }
            _ => {
                labels.insert(&j.context_id, j.label);
            }
        }
    }
    if !conflicts.is_empty() {
        return Err(TimelineError::Conflict(conflicts.into_iter().collect()));
    }

    let by_id: HashMap<&ArticleId, &NewsArticle> = corpus.iter().map(|a| (&a.id, a)).collect();
    let target_entry = TimelineEntry::from_article(target, true);
    let mut kept: BTreeMap<(NaiveDate, String), TimelineEntry> = BTreeMap::new();
    for (id, label) in labels {
        if label != Label::Relevant || *id == target.id {
            continue;
        }
        let article = by_id
            .get(id)
            .ok_or_else(|| TimelineError::Lookup(id.clone()))?;
        let entry = TimelineEntry::from_article(article, false);
        let key = entry.dedup_key();
        if key == target_entry.dedup_key() {
            continue;
        }
        // labels iterate in ascending id order, so the first entry per key is the smallest id.
        kept.entry(key).or_insert(entry);
    }

    let mut entries: Vec<TimelineEntry> = kept.into_values().collect();
    entries.push(target_entry);
    entries.sort_by(|a, b| {
        a.date
            .cmp(&b.date)
            .then_with(|| a.article_id.cmp(&b.article_id))
    });

    Ok(Timeline {
        version: SCHEMA_VERSION.to_string(),
        target_id: target.id.clone(),
        entries,
        generated_at,
        variant,
        stories,
    })
}
