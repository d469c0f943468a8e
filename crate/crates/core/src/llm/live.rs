//! HTTP chat-completion backend.
//!
//! Request: `POST {base_url}/chat/completions` with
//! `{"model", "messages": [{"role": "user", "content": prompt}], "temperature", "max_tokens"}`
//! and `Authorization: Bearer $CHRONOWEAVE_API_KEY` when the variable is set.
//! Response: the completion text is read from `choices[0].message.content`.

use std::time::Duration;

use async_trait::async_trait;
use serde_json::{json, Value};

use super::{Backend, BackendFailure, LlmRequest};

pub const API_KEY_ENV: &str = "CHRONOWEAVE_API_KEY";

#[derive(Debug, Clone)]
pub struct HttpBackendConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl HttpBackendConfig {
    pub fn from_env(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            timeout: Duration::from_secs(120),
        }
    }
}

pub struct HttpBackend {
    client: reqwest::Client,
    endpoint: String,
    api_key: Option<String>,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Result<Self, String> {
        let client = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| e.to_string())?;
        Ok(Self {
            client,
            endpoint: format!("{}/chat/completions", config.base_url.trim_end_matches('/')),
            api_key: config.api_key,
        })
    }
}

/// 408, 429 and 5xx are worth retrying; other statuses are not.
pub fn is_transient_status(status: u16) -> bool {
    status == 408 || status == 429 || (500..600).contains(&status)
}

fn extract_content(payload: &Value) -> Option<String> {
    payload
        .get("choices")?
        .get(0)?
        .get("message")?
        .get("content")?
        .as_str()
        .map(str::to_string)
}

#[async_trait]
impl Backend for HttpBackend {
    fn tag(&self) -> &str {
        "live"
    }

    async fn call(&self, request: &LlmRequest) -> Result<String, BackendFailure> {
        let body = json!({
            "model": request.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        });
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .await
            .map_err(|e| BackendFailure::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        if !resp.status().is_success() {
            let detail = resp.text().await.unwrap_or_default();
            let cause = format!(
                "HTTP {status}: {}",
                detail.chars().take(200).collect::<String>()
            );
            return Err(if is_transient_status(status) {
                BackendFailure::Transient(cause)
            } else {
                BackendFailure::Permanent(cause)
            });
        }
        let bytes = resp
            .bytes()
            .await
            .map_err(|e| BackendFailure::Transient(e.to_string()))?;
        let payload: Value =
            serde_json::from_slice(&bytes).map_err(|e| BackendFailure::Protocol(e.to_string()))?;
        extract_content(&payload).ok_or_else(|| {
            BackendFailure::Protocol("response has no choices[0].message.content string".into())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transient_statuses() {
        for s in [408, 429, 500, 502, 503, 599] {
            assert!(is_transient_status(s), "{s}");
        }
        for s in [400, 401, 403, 404, 422] {
            assert!(!is_transient_status(s), "{s}");
        }
    }

    #[test]
    fn content_extraction() {
        let ok = json!({"choices": [{"message": {"role": "assistant", "content": "1. RELEVANT"}}]});
        assert_eq!(extract_content(&ok).as_deref(), Some("1. RELEVANT"));
        assert_eq!(extract_content(&json!({"choices": []})), None);
        assert_eq!(
            extract_content(&json!({"choices": [{"message": {"content": 3}}]})),
            None
        );
    }
}
