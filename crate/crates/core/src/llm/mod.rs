//! Backend-agnostic completion client.
//!
//! [`LlmClient::complete`] consults an on-disk [`ResponseCache`] first and only
//! calls the backend on a miss. Concurrent misses for the same key are
//! collapsed into one backend call, and a semaphore caps the number of
//! backend calls in flight. Transient failures are retried with exponential
//! backoff and full jitter; errors are never cached.

mod cache;
mod live;
mod mock;

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use async_trait::async_trait;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Semaphore;

use crate::digest;

pub use cache::{CacheEntry, ResponseCache};
pub use live::{HttpBackend, HttpBackendConfig, API_KEY_ENV};
pub use mock::{mock_complete, mock_completion_text, mock_label, MockBackend};

pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("backend failed after {attempts} attempt(s): {cause}")]
    Backend { attempts: u32, cause: String },
    #[error("malformed backend payload: {0}")]
    Protocol(String),
    #[error("cache error at {path}: {message}")]
    Cache { path: String, message: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("mock backend: {0}")]
    Mock(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub model: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl LlmRequest {
    pub fn new(model: impl Into<String>, prompt: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            prompt: prompt.into(),
            temperature: 0.0,
            max_output_tokens: 1024,
        }
    }

    fn validate(&self) -> Result<(), LlmError> {
        if self.prompt.is_empty() {
            return Err(LlmError::InvalidRequest("prompt is empty".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(LlmError::InvalidRequest("temperature must be >= 0".into()));
        }
        if self.max_output_tokens == 0 {
            return Err(LlmError::InvalidRequest(
                "max_output_tokens must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub text: String,
    pub backend: String,
    pub cached: bool,
    pub latency_ms: u64,
    /// Retries spent on this call (0 when cached or first attempt succeeded).
    pub retries: u32,
}

/// Digest over model, prompt, temperature (6 decimals) and max output tokens.
pub fn cache_key(request: &LlmRequest) -> String {
    digest::digest_fields(&[
        request.model.as_str(),
        &format!("{:.6}", request.temperature),
        &request.max_output_tokens.to_string(),
        request.prompt.as_str(),
    ])
}

/// Outcome classes a backend reports for a failed call.
#[derive(Debug, Clone, PartialEq)]
pub enum BackendFailure {
    /// Network failure, timeout, HTTP 408/429/5xx.
    Transient(String),
    Permanent(String),
    /// The backend answered but the payload could not be understood.
    Protocol(String),
}

#[async_trait]
pub trait Backend: Send + Sync {
    fn tag(&self) -> &str;
    async fn call(&self, request: &LlmRequest) -> Result<String, BackendFailure>;
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_secs(1),
            factor: 2.0,
        }
    }
}

impl RetryPolicy {
    /// Upper bound of the jittered delay before retry number `retry` (0-based).
    pub fn ceiling(&self, retry: u32) -> Duration {
        self.base_delay.mul_f64(self.factor.powi(retry as i32))
    }

    fn delay(&self, retry: u32) -> Duration {
        let cap = self.ceiling(retry);
        if cap.is_zero() {
            return cap;
        }
        cap.mul_f64(rand::thread_rng().gen_range(0.0..=1.0))
    }
}

#[derive(Debug, Default)]
pub struct CallStats {
    backend_calls: AtomicU64,
    cache_hits: AtomicU64,
    retries: AtomicU64,
}

impl CallStats {
    /// Backend invocations, counting every attempt.
    pub fn backend_calls(&self) -> u64 {
        self.backend_calls.load(Ordering::SeqCst)
    }

    pub fn cache_hits(&self) -> u64 {
        self.cache_hits.load(Ordering::SeqCst)
    }

    pub fn retries(&self) -> u64 {
        self.retries.load(Ordering::SeqCst)
    }
}

pub struct LlmClient {
    backend: Arc<dyn Backend>,
    cache: ResponseCache,
    retry: RetryPolicy,
    in_flight: Semaphore,
    key_locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
    stats: CallStats,
}

impl LlmClient {
    pub fn new(backend: Arc<dyn Backend>, cache: ResponseCache) -> Self {
        Self {
            backend,
            cache,
            retry: RetryPolicy::default(),
            in_flight: Semaphore::new(DEFAULT_MAX_IN_FLIGHT),
            key_locks: Mutex::new(HashMap::new()),
            stats: CallStats::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.in_flight = Semaphore::new(n.max(1));
        self
    }

    pub fn stats(&self) -> &CallStats {
        &self.stats
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    fn cached_response(&self, key: &str) -> Result<Option<LlmResponse>, LlmError> {
        Ok(self.cache.get(key)?.map(|entry| {
            self.stats.cache_hits.fetch_add(1, Ordering::SeqCst);
            LlmResponse {
                text: entry.text,
                backend: entry.backend,
                cached: true,
                latency_ms: 0,
                retries: 0,
            }
        }))
    }

    fn key_lock(&self, key: &str) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.key_locks.lock().expect("key lock map poisoned");
        locks.entry(key.to_string()).or_default().clone()
    }

    fn release_key_lock(&self, key: &str) {
        let mut locks = self.key_locks.lock().expect("key lock map poisoned");
        if locks.get(key).is_some_and(|l| Arc::strong_count(l) == 1) {
            locks.remove(key);
        }
    }

    pub async fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        request.validate()?;
        let key = cache_key(request);
        if let Some(hit) = self.cached_response(&key)? {
            return Ok(hit);
        }

        let lock = self.key_lock(&key);
        let result = {
            let _guard = lock.lock().await;
            match self.cached_response(&key)? {
                Some(hit) => Ok(hit),
                None => self.call_with_retries(&key, request).await,
            }
        };
        drop(lock);
        self.release_key_lock(&key);
        result
    }

    async fn call_with_retries(
        &self,
        key: &str,
        request: &LlmRequest,
    ) -> Result<LlmResponse, LlmError> {
        let mut retry = 0;
        loop {
            let outcome = {
                let _permit = self.in_flight.acquire().await.expect("semaphore closed");
                self.stats.backend_calls.fetch_add(1, Ordering::SeqCst);
                let started = Instant::now();
                self.backend
                    .call(request)
                    .await
                    .map(|text| (text, started.elapsed()))
            };
            match outcome {
                Ok((text, elapsed)) => {
                    self.cache.put(key, request, &text, self.backend.tag())?;
                    return Ok(LlmResponse {
                        text,
                        backend: self.backend.tag().to_string(),
                        cached: false,
                        latency_ms: elapsed.as_millis() as u64,
                        retries: retry,
                    });
                }
                Err(BackendFailure::Transient(cause)) if retry < self.retry.max_retries => {
                    tracing::warn!(retry, %cause, "transient backend failure, retrying");
                    tokio::time::sleep(self.retry.delay(retry)).await;
                    retry += 1;
                    self.stats.retries.fetch_add(1, Ordering::SeqCst);
                }
                Err(BackendFailure::Transient(cause)) | Err(BackendFailure::Permanent(cause)) => {
                    return Err(LlmError::Backend {
                        attempts: retry + 1,
                        cause,
                    });
                }
                Err(BackendFailure::Protocol(msg)) => return Err(LlmError::Protocol(msg)),
            }
        }
    }
}
