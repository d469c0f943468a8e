//! Single-URL HTTP fetch.

use std::time::Duration;

use chrono::{DateTime, Utc};
use reqwest::redirect::Policy;

use super::CorpusError;

pub const MAX_REDIRECTS: usize = 5;

#[derive(Debug, Clone)]
pub struct RawDocument {
    pub url: String,
    pub content_type: String,
    pub bytes: Vec<u8>,
    pub retrieved_at: DateTime<Utc>,
}

#[derive(Debug, Clone)]
pub struct FetchOptions {
    pub timeout: Duration,
    pub user_agent: String,
}

impl Default for FetchOptions {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(20),
            user_agent: concat!("chronoweave/", env!("CARGO_PKG_VERSION")).to_string(),
        }
    }
}

pub async fn fetch_article(url: &str, opts: &FetchOptions) -> Result<RawDocument, CorpusError> {
    let parsed = url::Url::parse(url).map_err(|e| CorpusError::Fetch {
        url: url.to_string(),
        cause: e.to_string(),
    })?;
    if !matches!(parsed.scheme(), "http" | "https") {
        return Err(CorpusError::Fetch {
            url: url.to_string(),
            cause: format!("unsupported scheme {:?}", parsed.scheme()),
        });
    }

    let client = reqwest::Client::builder()
        .redirect(Policy::limited(MAX_REDIRECTS))
        .timeout(opts.timeout)
        .user_agent(opts.user_agent.as_str())
        .build()
        .map_err(|e| CorpusError::Fetch {
            url: url.to_string(),
            cause: e.to_string(),
        })?;

    let resp = client.get(parsed).send().await.map_err(|e| {
        if e.is_redirect() {
            CorpusError::Redirect {
                url: url.to_string(),
                limit: MAX_REDIRECTS,
            }
        } else {
            CorpusError::Fetch {
                url: url.to_string(),
                cause: e.to_string(),
            }
        }
    })?;

    let status = resp.status();
    if !status.is_success() {
        return Err(CorpusError::Status {
            url: url.to_string(),
            status: status.as_u16(),
        });
    }
    let content_type = resp
        .headers()
        .get(reqwest::header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("application/octet-stream")
        .to_string();
    let final_url = resp.url().to_string();
    let bytes = resp.bytes().await.map_err(|e| CorpusError::Fetch {
        url: url.to_string(),
        cause: e.to_string(),
    })?;
    if bytes.is_empty() {
        return Err(CorpusError::Fetch {
            url: url.to_string(),
            cause: "empty response body".into(),
        });
    }
    Ok(RawDocument {
        url: final_url,
        content_type,
        bytes: bytes.to_vec(),
        retrieved_at: Utc::now(),
    })
}
