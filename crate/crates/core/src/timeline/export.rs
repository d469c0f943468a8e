//! Byte-deterministic JSON, Markdown and HTML renderings of a timeline.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Timeline, TimelineEntry, TimelineError};
use crate::fsutil;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Json,
    Markdown,
    Html,
}

impl ExportFormat {
    pub const ALL: [ExportFormat; 3] = [
        ExportFormat::Json,
        ExportFormat::Markdown,
        ExportFormat::Html,
    ];

    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Json => "json",
            ExportFormat::Markdown => "md",
            ExportFormat::Html => "html",
        }
    }
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ExportFormat::Json),
            "markdown" | "md" => Ok(ExportFormat::Markdown),
            "html" => Ok(ExportFormat::Html),
            other => Err(format!("unknown export format {other:?}")),
        }
    }
}

/// Presentation order for Markdown and HTML. JSON always stays ascending.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    #[default]
    Asc,
    Desc,
}

impl std::str::FromStr for Order {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "asc" => Ok(Order::Asc),
            "desc" => Ok(Order::Desc),
            other => Err(format!("unknown order {other:?} (expected asc or desc)")),
        }
    }
}

fn ordered(timeline: &Timeline, order: Order) -> Vec<&TimelineEntry> {
    let mut v: Vec<&TimelineEntry> = timeline.entries.iter().collect();
    if order == Order::Desc {
        v.reverse();
    }
    v
}

fn target_headline(timeline: &Timeline) -> &str {
    timeline.target().map(|e| e.headline.as_str()).unwrap_or("")
}

fn render_json(timeline: &Timeline) -> String {
    fsutil::canonical_json(timeline)
}

fn render_markdown(timeline: &Timeline, order: Order) -> String {
    let mut s = format!("# Timeline: {}\n\n", target_headline(timeline));
    for e in ordered(timeline, order) {
        let _ = writeln!(s, "- **{}** — {}", e.date.format("%Y-%m-%d"), e.headline);
    }
    if !timeline.stories.is_empty() {
        s.push_str("\n## Background\n");
        for story in &timeline.stories {
            let _ = write!(s, "\n{}\n", story.text);
        }
    }
    s
}

fn escape_html(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

const HTML_STYLE: &str =
    "body{font-family:sans-serif;max-width:48rem;margin:2rem auto;padding:0 1rem;line-height:1.5}\
ol{list-style:none;padding:0}li{margin:0 0 1rem;padding-left:1rem;border-left:3px solid #999}\
li.target{border-left-color:#c00}time{font-weight:bold}p.excerpt{margin:.25rem 0;color:#444}";

fn render_html(timeline: &Timeline, order: Order) -> String {
    let title = escape_html(target_headline(timeline));
    let mut s = String::new();
    s.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    let _ = writeln!(s, "<title>Timeline: {title}</title>");
    let _ = writeln!(s, "<style>{HTML_STYLE}</style>");
    s.push_str("</head>\n<body>\n");
    let _ = writeln!(s, "<h1>Timeline: {title}</h1>");
    s.push_str("<ol class=\"timeline\">\n");
    for e in ordered(timeline, order) {
        let class = if e.is_target { " class=\"target\"" } else { "" };
        let date = e.date.format("%Y-%m-%d");
        let _ = write!(
            s,
            "<li{class}><time datetime=\"{date}\">{date}</time> — {}",
            escape_html(&e.headline)
        );
        if !e.excerpt.is_empty() {
            let _ = write!(s, "<p class=\"excerpt\">{}</p>", escape_html(&e.excerpt));
        }
        s.push_str("</li>\n");
    }
    s.push_str("</ol>\n");
    if !timeline.stories.is_empty() {
        s.push_str("<h2>Background</h2>\n");
        for story in &timeline.stories {
            let _ = writeln!(s, "<p>{}</p>", escape_html(&story.text));
        }
    }
    s.push_str("</body>\n</html>\n");
    s
}

pub fn render(timeline: &Timeline, format: ExportFormat, order: Order) -> String {
    match format {
        ExportFormat::Json => render_json(timeline),
        ExportFormat::Markdown => render_markdown(timeline, order),
        ExportFormat::Html => render_html(timeline, order),
    }
}

pub fn export(
    timeline: &Timeline,
    format: ExportFormat,
    order: Order,
    path: &Path,
) -> Result<(), TimelineError> {
    fsutil::write_atomic(path, render(timeline, format, order).as_bytes()).map_err(|e| {
        TimelineError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    })
}
