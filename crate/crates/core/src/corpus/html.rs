//! Main-text extraction from fetched HTML.
//!
//! Boilerplate removal is a paragraph-length filter: only `<p>` elements with
//! at least [`MIN_PARAGRAPH_CHARS`] characters of collapsed text are kept.

use chrono::{DateTime, Utc};
use scraper::{Html, Selector};

use super::{collapse_whitespace, parse_date, CorpusError, RawDocument};

pub const MIN_PARAGRAPH_CHARS: usize = 40;

fn is_html(content_type: &str) -> bool {
    let mime = content_type
        .split(';')
        .next()
        .unwrap_or("")
        .trim()
        .to_ascii_lowercase();
    mime == "text/html" || mime == "application/xhtml+xml"
}

fn selector(css: &str) -> Selector {
    Selector::parse(css).expect("static selector")
}

fn element_text(el: scraper::ElementRef<'_>) -> String {
    collapse_whitespace(&el.text().collect::<String>())
}

/// Returns `(title, body)`; paragraphs in the body are separated by a blank line.
pub fn extract_main_text(raw: &RawDocument) -> Result<(String, String), CorpusError> {
    if !is_html(&raw.content_type) {
        return Err(CorpusError::Extraction(format!(
            "{} is {}, not HTML",
            raw.url, raw.content_type
        )));
    }
    let doc = Html::parse_document(&String::from_utf8_lossy(&raw.bytes));

    let title = doc
        .select(&selector("title"))
        .map(element_text)
        .find(|t| !t.is_empty())
        .or_else(|| {
            doc.select(&selector("h1"))
                .map(element_text)
                .find(|t| !t.is_empty())
        })
        .ok_or_else(|| CorpusError::Extraction(format!("{} has no <title> or <h1>", raw.url)))?;

    let body = doc
        .select(&selector("p"))
        .map(element_text)
        .filter(|t| t.chars().count() >= MIN_PARAGRAPH_CHARS)
        .collect::<Vec<_>>()
        .join("\n\n");

    Ok((title, body))
}

/// Best-effort publication time from common meta tags or a `<time datetime>`.
pub fn extract_published_time(raw: &RawDocument) -> Option<DateTime<Utc>> {
    let doc = Html::parse_document(&String::from_utf8_lossy(&raw.bytes));
    let metas = [
        r#"meta[property="article:published_time"]"#,
        r#"meta[name="pubdate"]"#,
        r#"meta[name="date"]"#,
    ];
    metas
        .iter()
        .filter_map(|css| doc.select(&selector(css)).next())
        .filter_map(|el| el.value().attr("content"))
        .chain(
            doc.select(&selector("time[datetime]"))
                .filter_map(|el| el.value().attr("datetime")),
        )
        .find_map(|s| parse_date(s).ok())
}
