//! Double-brace prompt templates.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;

use super::PromptError;
use crate::digest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Placeholder {
    TargetTitle,
    TargetDate,
    TargetExcerpt,
    ContextList,
    TaskInstructions,
    ExtendedInstructions,
}

impl Placeholder {
    pub const ALL: [Placeholder; 6] = [
        Placeholder::TargetTitle,
        Placeholder::TargetDate,
        Placeholder::TargetExcerpt,
        Placeholder::ContextList,
        Placeholder::TaskInstructions,
        Placeholder::ExtendedInstructions,
    ];

    /// Placeholders a template must contain to be renderable.
    pub const REQUIRED: [Placeholder; 4] = [
        Placeholder::TargetTitle,
        Placeholder::ContextList,
        Placeholder::TaskInstructions,
        Placeholder::ExtendedInstructions,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Placeholder::TargetTitle => "target_title",
            Placeholder::TargetDate => "target_date",
            Placeholder::TargetExcerpt => "target_excerpt",
            Placeholder::ContextList => "context_list",
            Placeholder::TaskInstructions => "task_instructions",
            Placeholder::ExtendedInstructions => "extended_instructions",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }
}

impl fmt::Display for Placeholder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Segment {
    Text(String),
    Slot(Placeholder),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    id: String,
    segments: Vec<Segment>,
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{\{\s*([^{}]*?)\s*\}\}").expect("static regex"))
}

pub const DEFAULT_BASELINE: &str = include_str!("../../templates/baseline.tmpl");
pub const DEFAULT_EXTENDED: &str = include_str!("../../templates/extended.tmpl");

impl Template {
    /// Parses template text; the id is the digest of its UTF-8 bytes.
    pub fn parse(text: &str) -> Result<Self, PromptError> {
        let mut segments = Vec::new();
        let mut last = 0;
        for caps in placeholder_re().captures_iter(text) {
            let whole = caps.get(0).expect("match");
            let name = &caps[1];
            let slot = Placeholder::from_name(name)
                .ok_or_else(|| PromptError::UnknownPlaceholder(name.to_string()))?;
            if whole.start() > last {
                segments.push(Segment::Text(text[last..whole.start()].to_string()));
            }
            segments.push(Segment::Slot(slot));
            last = whole.end();
        }
        if last < text.len() {
            segments.push(Segment::Text(text[last..].to_string()));
        }
        Ok(Self {
            id: digest::digest128(text.as_bytes()),
            segments,
        })
    }

    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let bytes = std::fs::read(path).map_err(|e| PromptError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let text = String::from_utf8(bytes).map_err(|_| PromptError::Io {
            path: path.to_path_buf(),
            message: "not valid UTF-8".into(),
        })?;
        Self::parse(&text)
    }

    pub fn default_baseline() -> Self {
        Self::parse(DEFAULT_BASELINE).expect("shipped template parses")
    }

    pub fn default_extended() -> Self {
        Self::parse(DEFAULT_EXTENDED).expect("shipped template parses")
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn placeholders(&self) -> BTreeSet<Placeholder> {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Slot(p) => Some(*p),
                Segment::Text(_) => None,
            })
            .collect()
    }

    pub fn check_required(&self) -> Result<(), PromptError> {
        let present = self.placeholders();
        match Placeholder::REQUIRED.iter().find(|p| !present.contains(p)) {
            Some(p) => Err(PromptError::MissingPlaceholder(p.name().to_string())),
            None => Ok(()),
        }
    }

    /// Single-pass substitution; expanded values are never re-scanned.
    pub(crate) fn fill(&self, value: impl Fn(Placeholder) -> String) -> String {
        let mut out = String::new();
        for seg in &self.segments {
            match seg {
                Segment::Text(t) => out.push_str(t),
                Segment::Slot(p) => out.push_str(&value(*p)),
            }
        }
        out
    }
}
