//! Deterministic offline backend.
//!
//! The mock reads the target title and the numbered context items back out of
//! a rendered prompt and labels item `i` relevant iff its title shares at
//! least [`MIN_SHARED_TERMS`] distinct terms with the target title.

use std::collections::HashSet;
use std::sync::OnceLock;

use async_trait::async_trait;
use regex::Regex;

use super::{Backend, BackendFailure, LlmError, LlmRequest, LlmResponse};
use crate::parsing::{format_judgment_line, Label};
use crate::prompting::{CONTEXT_BEGIN, CONTEXT_END, STORY_MARKER, TARGET_TITLE_PREFIX};
use crate::retrieval::tokenize;

pub const MIN_SHARED_TERMS: usize = 2;
pub const MOCK_TAG: &str = "mock";

fn item_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(\d+)\. \[(\d{4}-\d{2}-\d{2})\] (.*)$").expect("static regex"))
}

fn term_set(text: &str) -> HashSet<String> {
    tokenize(text).into_iter().collect()
}

/// Label and shared-term count under the mock's relevance rule.
pub fn mock_label(target_title: &str, context_title: &str) -> (Label, usize) {
    let shared = term_set(target_title)
        .intersection(&term_set(context_title))
        .count();
    let label = if shared >= MIN_SHARED_TERMS {
        Label::Relevant
    } else {
        Label::Irrelevant
    };
    (label, shared)
}

struct Item<'a> {
    index: usize,
    date: &'a str,
    title: &'a str,
}

pub fn mock_completion_text(prompt: &str) -> Result<String, String> {
    let target_title = prompt
        .lines()
        .find_map(|l| l.strip_prefix(TARGET_TITLE_PREFIX))
        .ok_or_else(|| format!("prompt has no {TARGET_TITLE_PREFIX:?} line"))?
        .trim();

    let mut lines = prompt.lines();
    if !lines.by_ref().any(|l| l == CONTEXT_BEGIN) {
        return Err(format!("prompt has no {CONTEXT_BEGIN:?} line"));
    }
    let mut items = Vec::new();
    let mut closed = false;
    for line in lines {
        if line == CONTEXT_END {
            closed = true;
            break;
        }
        if let Some(c) = item_re().captures(line) {
            let index = c[1]
                .parse()
                .map_err(|_| format!("bad item index in {line:?}"))?;
            items.push(Item {
                index,
                date: c.get(2).expect("group").as_str(),
                title: c.get(3).expect("group").as_str(),
            });
        }
    }
    if !closed {
        return Err(format!("prompt has no {CONTEXT_END:?} line"));
    }
    if items.is_empty() {
        return Err("prompt lists no context items".into());
    }

    let extended = prompt.lines().any(|l| l == STORY_MARKER);
    let mut out = String::new();
    let mut relevant = Vec::new();
    for item in &items {
        let (label, shared) = mock_label(target_title, item.title);
        if label == Label::Relevant {
            relevant.push(item);
        }
        out.push_str(&format_judgment_line(
            item.index,
            label,
            &format!("shared terms: {shared}"),
        ));
        out.push('\n');
    }
    if extended {
        out.push_str(STORY_MARKER);
        out.push('\n');
        if relevant.is_empty() {
            out.push_str("None of the context items were judged relevant to the target news.\n");
        } else {
            let sentences: Vec<String> = relevant
                .iter()
                .map(|it| {
                    let title: String = it
                        .title
                        .chars()
                        .filter(|c| !matches!(c, '[' | ']'))
                        .collect();
                    format!("On {} [{}] reported: {}.", it.date, it.index, title)
                })
                .collect();
            out.push_str(&sentences.join(" "));
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn mock_complete(request: &LlmRequest) -> Result<LlmResponse, LlmError> {
    let text = mock_completion_text(&request.prompt).map_err(LlmError::Mock)?;
    Ok(LlmResponse {
        text,
        backend: MOCK_TAG.to_string(),
        cached: false,
        latency_ms: 0,
        retries: 0,
    })
}

#[derive(Debug, Default, Clone, Copy)]
pub struct MockBackend;

#[async_trait]
impl Backend for MockBackend {
    fn tag(&self) -> &str {
        MOCK_TAG
    }

    async fn call(&self, request: &LlmRequest) -> Result<String, BackendFailure> {
        mock_completion_text(&request.prompt).map_err(BackendFailure::Permanent)
    }
}
