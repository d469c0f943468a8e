//! News article model, normalization, and the JSON-lines corpus format.
//!
//! A corpus file holds one JSON object per line with the required keys
//! `url`, `title` and `published_at`, and the optional keys `body`, `lang`
//! and `fetched_at`. Unknown keys are ignored, so an exported corpus (which
//! also carries the derived `id` and `source`) loads back unchanged.

mod dates;
mod fetch;
mod html;

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::digest;
use crate::fsutil;

pub use dates::parse_date;
pub use fetch::{fetch_article, FetchOptions, RawDocument};
pub use html::{extract_main_text, extract_published_time, MIN_PARAGRAPH_CHARS};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unparseable date {0:?}")]
    Date(String),
    #[error("invalid article: {0}")]
    Validation(String),
    #[error("fetch of {url} failed: {cause}")]
    Fetch { url: String, cause: String },
    #[error("fetch of {url} returned HTTP {status}")]
    Status { url: String, status: u16 },
    #[error("fetch of {url} exceeded {limit} redirects")]
    Redirect { url: String, limit: usize },
    #[error("extraction failed: {0}")]
    Extraction(String),
}

/// 128-bit article digest as 32 lowercase hex characters.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArticleId(String);

impl ArticleId {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Accepts only well-formed ids (32 lowercase hex chars).
    pub fn parse(s: &str) -> Option<Self> {
        let ok = s.len() == digest::ID_HEX_LEN
            && s.bytes()
                .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
        ok.then(|| Self(s.to_string()))
    }
}

impl fmt::Display for ArticleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One normalized web news document. Whether it plays the target or a
/// context role is decided by the caller.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewsArticle {
    pub id: ArticleId,
    pub url: String,
    pub title: String,
    pub body: String,
    pub source: String,
    pub published_at: DateTime<Utc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fetched_at: Option<DateTime<Utc>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
}

/// Unvalidated article fields as they arrive from a corpus line or a fetch.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct RawArticle {
    pub url: String,
    pub title: String,
    #[serde(default)]
    pub body: String,
    pub published_at: String,
    #[serde(default)]
    pub lang: Option<String>,
    #[serde(default)]
    pub fetched_at: Option<String>,
}

/// Deterministic article id: digest of `url \n title \n YYYY-MM-DD`.
pub fn article_id(url: &str, title: &str, published_date: chrono::NaiveDate) -> ArticleId {
    let date = published_date.format("%Y-%m-%d").to_string();
    ArticleId(digest::digest_fields(&[url, title, &date]))
}

/// Collapses whitespace runs to single spaces, trims, and drops any
/// remaining control characters.
pub fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace()
        .map(|w| w.chars().filter(|c| !c.is_control()).collect::<String>())
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Registrable domain of the url's host, lowercased. IP hosts and hosts
/// without a known public suffix come back as the bare host.
pub fn registrable_domain(url: &Url) -> Option<String> {
    let host = url.host_str()?.trim_end_matches('.').to_ascii_lowercase();
    if host.parse::<std::net::IpAddr>().is_ok() || host.starts_with('[') {
        return Some(host);
    }
    let domain = psl::domain_str(&host).map(str::to_string).unwrap_or(host);
    Some(domain)
}

pub fn normalize_article(raw: &RawArticle) -> Result<NewsArticle, CorpusError> {
    let url_str = raw.url.trim();
    let url = Url::parse(url_str)
        .map_err(|e| CorpusError::Validation(format!("url {url_str:?} is not absolute: {e}")))?;
    let source = registrable_domain(&url)
        .ok_or_else(|| CorpusError::Validation(format!("url {url_str:?} has no host")))?;

    let title = collapse_whitespace(&raw.title);
    if title.is_empty() {
        return Err(CorpusError::Validation(
            "title is empty after trimming".into(),
        ));
    }
    let body = collapse_whitespace(&raw.body);
    let published_at = parse_date(&raw.published_at)?;
    let fetched_at = raw
        .fetched_at
        .as_deref()
        .filter(|s| !s.trim().is_empty())
        .map(parse_date)
        .transpose()?;
    if let Some(f) = fetched_at {
        if published_at > f {
            return Err(CorpusError::Validation(format!(
                "published_at {published_at} is after fetched_at {f}"
            )));
        }
    }
    let lang = raw
        .lang
        .as_deref()
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string);

    Ok(NewsArticle {
        id: article_id(url_str, &title, published_at.date_naive()),
        url: url_str.to_string(),
        title,
        body,
        source,
        published_at,
        fetched_at,
        lang,
    })
}

/// Builds an article from a fetched page. The publication time comes from the
/// page metadata when present, otherwise from the retrieval time.
pub fn article_from_document(doc: &RawDocument) -> Result<NewsArticle, CorpusError> {
    let (title, body) = extract_main_text(doc)?;
    let published_at = extract_published_time(doc)
        .filter(|p| *p <= doc.retrieved_at)
        .unwrap_or(doc.retrieved_at);
    normalize_article(&RawArticle {
        url: doc.url.clone(),
        title,
        body,
        published_at: published_at.to_rfc3339(),
        lang: None,
        fetched_at: Some(doc.retrieved_at.to_rfc3339()),
    })
}

/// Articles in file order plus the ids dropped as duplicates.
#[derive(Debug, Clone, Default)]
pub struct LoadedCorpus {
    pub articles: Vec<NewsArticle>,
    pub duplicates: Vec<ArticleId>,
}

impl LoadedCorpus {
    pub fn duplicate_count(&self) -> usize {
        self.duplicates.len()
    }
}

pub fn load_corpus(path: &Path) -> Result<LoadedCorpus, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_corpus(&text)
}

/// Parses corpus text. Whitespace-only lines are skipped; line numbers in
/// errors are 1-based.
pub fn parse_corpus(text: &str) -> Result<LoadedCorpus, CorpusError> {
    let mut out = LoadedCorpus::default();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawArticle = serde_json::from_str(line).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let article = normalize_article(&raw).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if seen.insert(article.id.clone()) {
            out.articles.push(article);
        } else {
            out.duplicates.push(article.id);
        }
    }
    Ok(out)
}

/// Serializes articles as corpus JSON-lines.
pub fn corpus_to_jsonl(articles: &[NewsArticle]) -> String {
    let mut s = String::new();
    for a in articles {
        s.push_str(&serde_json::to_string(a).expect("article serializes"));
        s.push('\n');
    }
    s
}

pub fn export_corpus(articles: &[NewsArticle], path: &Path) -> Result<(), CorpusError> {
    fsutil::write_atomic(path, corpus_to_jsonl(articles).as_bytes()).map_err(|source| {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    })
}
