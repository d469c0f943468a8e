//! Cache, retry and single-flight contracts of the completion client.

use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use chronoweave_core::llm::{
    Backend, BackendFailure, LlmClient, LlmError, LlmRequest, ResponseCache, RetryPolicy,
};

/// Fails transiently `fail_first` times, then echoes the prompt.
struct FlakyBackend {
    fail_first: u32,
    calls: AtomicU32,
    delay: Duration,
    in_flight: AtomicU32,
    max_in_flight: AtomicU32,
}

impl FlakyBackend {
    fn new(fail_first: u32) -> Self {
        Self {
            fail_first,
            calls: AtomicU32::new(0),
            delay: Duration::ZERO,
            in_flight: AtomicU32::new(0),
            max_in_flight: AtomicU32::new(0),
        }
    }

    fn calls(&self) -> u32 {
        self.calls.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl Backend for FlakyBackend {
    fn tag(&self) -> &str {
        "stub"
    }

    async fn call(&self, request: &LlmRequest) -> Result<String, BackendFailure> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_in_flight.fetch_max(now, Ordering::SeqCst);
        tokio::time::sleep(self.delay).await;
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        if n < self.fail_first {
            Err(BackendFailure::Transient(format!("boom {n}")))
        } else {
            Ok(format!("echo: {}", request.prompt))
        }
    }
}

struct PermanentBackend(AtomicU32);

#[async_trait]
impl Backend for PermanentBackend {
    fn tag(&self) -> &str {
        "stub"
    }

    async fn call(&self, _: &LlmRequest) -> Result<String, BackendFailure> {
        self.0.fetch_add(1, Ordering::SeqCst);
        Err(BackendFailure::Permanent("HTTP 400".into()))
    }
}

fn client(backend: Arc<dyn Backend>, dir: &tempfile::TempDir) -> LlmClient {
    LlmClient::new(backend, ResponseCache::open(dir.path()).unwrap()).with_retry(RetryPolicy {
        base_delay: Duration::from_millis(1),
        ..Default::default()
    })
}

#[tokio::test]
async fn second_call_is_cached() {
    let dir = tempfile::tempdir().unwrap();
    let backend = Arc::new(FlakyBackend::new(0));
    let c = client(backend.clone(), &dir);
    let req = LlmRequest::new("m", "prompt one");
    let first = c.complete(&req).await.unwrap();
    let second = c.complete(&req).await.unwrap();
    assert!(!first.cached);
    assert!(second.cached);
    assert_eq!(second.latency_ms, 0);
    assert_eq!(first.text, second.text);
    assert_eq!(backend.calls(), 1);

    // A fresh client over the same directory also hits.
    let backend2 = Arc::new(FlakyBackend::new(0));
    let c2 = client(backend2.clone(), &dir);
    assert!(c2.complete(&req).await.unwrap().cached);
    assert_eq!(backend2.calls(), 0);
    assert!(dir
        .path()
        .join(format!("{}.json", chronoweave_core::llm::cache_key(&req)))
        .exists());
}

#[tokio::test]
async fn two_failures_then_success() {
    let dir = tempfile::tempdir().unwrap();
    let backend = Arc::new(FlakyBackend::new(2));
    let c = client(backend.clone(), &dir);
    let resp = c.complete(&LlmRequest::new("m", "p")).await.unwrap();
    assert_eq!(resp.retries, 2);
    assert_eq!(backend.calls(), 3);
    assert_eq!(c.stats().retries(), 2);
}

#[tokio::test]
async fn always_failing_stops_after_four_attempts() {
    let dir = tempfile::tempdir().unwrap();
    let backend = Arc::new(FlakyBackend::new(u32::MAX));
    let c = client(backend.clone(), &dir);
    match c.complete(&LlmRequest::new("m", "p")).await {
        Err(LlmError::Backend { attempts, cause }) => {
            assert_eq!(attempts, 4);
            assert_eq!(cause, "boom 3");
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(backend.calls(), 4);
    assert!(c.cache().entries().unwrap().is_empty());
}

#[tokio::test]
async fn permanent_failure_is_not_retried() {
    let dir = tempfile::tempdir().unwrap();
    let backend = Arc::new(PermanentBackend(AtomicU32::new(0)));
    let c = client(backend.clone(), &dir);
    assert!(matches!(
        c.complete(&LlmRequest::new("m", "p")).await,
        Err(LlmError::Backend { attempts: 1, .. })
    ));
    assert_eq!(backend.0.load(Ordering::SeqCst), 1);
}

#[tokio::test]
async fn empty_prompt_is_rejected_before_backend() {
    let dir = tempfile::tempdir().unwrap();
    let backend = Arc::new(FlakyBackend::new(0));
    let c = client(backend.clone(), &dir);
    assert!(matches!(
        c.complete(&LlmRequest::new("m", "")).await,
        Err(LlmError::InvalidRequest(_))
    ));
    assert_eq!(backend.calls(), 0);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_identical_requests_single_flight() {
    let dir = tempfile::tempdir().unwrap();
    let mut b = FlakyBackend::new(0);
    b.delay = Duration::from_millis(50);
    let backend = Arc::new(b);
    let c = Arc::new(client(backend.clone(), &dir));
    let req = LlmRequest::new("m", "same prompt");
    let handles: Vec<_> = (0..16)
        .map(|_| {
            let c = c.clone();
            let req = req.clone();
            tokio::spawn(async move { c.complete(&req).await.unwrap() })
        })
        .collect();
    let mut texts = Vec::new();
    for h in handles {
        texts.push(h.await.unwrap().text);
    }
    assert_eq!(backend.calls(), 1);
    assert!(texts.iter().all(|t| *t == texts[0]));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn in_flight_cap_is_respected() {
    let dir = tempfile::tempdir().unwrap();
    let mut b = FlakyBackend::new(0);
    b.delay = Duration::from_millis(30);
    let backend = Arc::new(b);
    let c = Arc::new(client(backend.clone(), &dir).with_max_in_flight(2));
    let handles: Vec<_> = (0..8)
        .map(|i| {
            let c = c.clone();
            tokio::spawn(async move {
                c.complete(&LlmRequest::new("m", format!("p{i}")))
                    .await
                    .unwrap()
            })
        })
        .collect();
    for h in handles {
        h.await.unwrap();
    }
    assert_eq!(backend.calls(), 8);
    assert!(backend.max_in_flight.load(Ordering::SeqCst) <= 2);
}
