//! Typed relevance judgments and background stories from completion text.
//!
//! Parsing never fails on label text: every snippet of the bundle gets exactly
//! one judgment, and anything that could not be read lands in
//! [`ParseDiagnostics`]. Snippets without a readable label default to
//! irrelevant with the rationale [`UNPARSED_DEFAULT`].

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ArticleId;
use crate::prompting::{PromptBundle, STORY_MARKER};

pub const UNPARSED_DEFAULT: &str = "unparsed-default";

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("bundle {bundle_id}: background story marker is present but the story is empty")]
    EmptyStory { bundle_id: String },
    #[error("story belongs to bundle {story} but judgments belong to bundle {judgments}")]
    BundleMismatch { story: String, judgments: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Relevant,
    Irrelevant,
}

impl Label {
    pub fn as_upper(self) -> &'static str {
        match self {
            Label::Relevant => "RELEVANT",
            Label::Irrelevant => "IRRELEVANT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceJudgment {
    pub target_id: ArticleId,
    pub context_id: ArticleId,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
    pub source_index: usize,
    pub bundle_id: String,
}

impl RelevanceJudgment {
    pub fn is_defaulted(&self) -> bool {
        self.rationale.as_deref() == Some(UNPARSED_DEFAULT)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundStory {
    pub target_id: ArticleId,
    pub text: String,
    pub cited_indices: BTreeSet<usize>,
    pub bundle_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnparsedLine {
    pub line_no: usize,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParseDiagnostics {
    pub bundle_id: String,
    pub unparsed_lines: Vec<UnparsedLine>,
    pub missing_indices: BTreeSet<usize>,
    pub duplicate_indices: BTreeSet<usize>,
    pub citation_violations: BTreeSet<usize>,
    /// Indices that received the unparsed default, whether mentioned or not.
    pub defaulted_indices: BTreeSet<usize>,
}

impl ParseDiagnostics {
    pub fn is_clean(&self) -> bool {
        self.unparsed_lines.is_empty()
            && self.missing_indices.is_empty()
            && self.duplicate_indices.is_empty()
            && self.citation_violations.is_empty()
            && self.defaulted_indices.is_empty()
    }

    pub fn merge_citations(&mut self, other: &ParseDiagnostics) {
        self.citation_violations
            .extend(other.citation_violations.iter().copied());
    }
}

fn judgment_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)^\s*(\d+)\s*[.):\-]\s*(RELEVANT|IRRELEVANT)\b(?:\s*[.):\-]\s*(.*?))?\s*$")
            .expect("static regex")
    })
}

fn index_prefix_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(\d+)\s*[.):\-]").expect("static regex"))
}

fn citation_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[(\d+)\]").expect("static regex"))
}

fn is_marker(line: &str) -> bool {
    line.trim() == STORY_MARKER
}

/// Formats one well-formed label line.
pub fn format_judgment_line(index: usize, label: Label, rationale: &str) -> String {
    format!("{index}. {} - {rationale}", label.as_upper())
}

pub fn parse_judgments(
    response_text: &str,
    bundle: &PromptBundle,
) -> (Vec<RelevanceJudgment>, ParseDiagnostics) {
    let n = bundle.snippets.len();
    let mut diag = ParseDiagnostics {
        bundle_id: bundle.bundle_id.clone(),
        ..Default::default()
    };
    let mut found: BTreeMap<usize, (Label, Option<String>)> = BTreeMap::new();
    let mut mentioned = BTreeSet::new();

    for (i, line) in response_text.lines().enumerate() {
        if is_marker(line) {
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let parsed = judgment_re().captures(line).and_then(|c| {
            let idx = c[1].parse::<usize>().ok().filter(|k| (1..=n).contains(k))?;
            let label = if c[2].eq_ignore_ascii_case("relevant") {
                Label::Relevant
            } else {
                Label::Irrelevant
            };
            let rationale = c
                .get(3)
                .map(|m| m.as_str().trim().to_string())
                .filter(|s| !s.is_empty());
            Some((idx, label, rationale))
        });
        match parsed {
            Some((idx, label, rationale)) => {
                mentioned.insert(idx);
                match found.entry(idx) {
                    Entry::Occupied(_) => {
                        diag.duplicate_indices.insert(idx);
                    }
                    Entry::Vacant(slot) => {
                        slot.insert((label, rationale));
                    }
                }
            }
            None => {
                if let Some(idx) = index_prefix_re()
                    .captures(line)
                    .and_then(|c| c[1].parse::<usize>().ok())
                    .filter(|k| (1..=n).contains(k))
                {
                    mentioned.insert(idx);
                }
                diag.unparsed_lines.push(UnparsedLine {
                    line_no,
                    text: line.to_string(),
                });
            }
        }
    }

    let judgments = bundle
        .snippets
        .iter()
        .enumerate()
        .map(|(pos, snip)| {
            let idx = pos + 1;
            let (label, rationale) = match found.remove(&idx) {
                Some(v) => v,
                None => {
                    if !mentioned.contains(&idx) {
                        diag.missing_indices.insert(idx);
                    }
                    diag.defaulted_indices.insert(idx);
                    (Label::Irrelevant, Some(UNPARSED_DEFAULT.to_string()))
                }
            };
            RelevanceJudgment {
                target_id: bundle.target_id.clone(),
                context_id: snip.article_id.clone(),
                label,
                rationale,
                source_index: idx,
                bundle_id: bundle.bundle_id.clone(),
            }
        })
        .collect();
    (judgments, diag)
}

/// Story following the first marker line, or `None` when there is no marker.
pub fn parse_story(
    response_text: &str,
    bundle: &PromptBundle,
) -> Result<Option<BackgroundStory>, ParseError> {
    let mut lines = response_text.lines();
    if !lines.by_ref().any(is_marker) {
        return Ok(None);
    }
    let text = lines.collect::<Vec<_>>().join("\n").trim().to_string();
    if text.is_empty() {
        return Err(ParseError::EmptyStory {
            bundle_id: bundle.bundle_id.clone(),
        });
    }
    let cited_indices = citation_re()
        .captures_iter(&text)
        .filter_map(|c| c[1].parse::<usize>().ok())
        .collect();
    Ok(Some(BackgroundStory {
        target_id: bundle.target_id.clone(),
        text,
        cited_indices,
        bundle_id: bundle.bundle_id.clone(),
    }))
}

/// Reports story citations that point at items not labelled relevant.
pub fn validate_story_citations(
    story: &BackgroundStory,
    judgments: &[RelevanceJudgment],
) -> Result<ParseDiagnostics, ParseError> {
    if let Some(j) = judgments.iter().find(|j| j.bundle_id != story.bundle_id) {
        return Err(ParseError::BundleMismatch {
            story: story.bundle_id.clone(),
            judgments: j.bundle_id.clone(),
        });
    }
    let relevant: BTreeSet<usize> = judgments
        .iter()
        .filter(|j| j.label == Label::Relevant)
        .map(|j| j.source_index)
        .collect();
    Ok(ParseDiagnostics {
        bundle_id: story.bundle_id.clone(),
        citation_violations: story.cited_indices.difference(&relevant).copied().collect(),
        ..Default::default()
    })
}
