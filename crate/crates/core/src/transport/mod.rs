//! Provider-agnostic chat-completion client.
//!
//! [`ChatClient`] wraps any [`ChatBackend`] with a shared rate limiter and
//! exponential-backoff retries. Backends are the HTTP adapters in [`http`],
//! the fixture-based recorder and replayer in [`replay`], and the in-process
//! [`MockBackend`] used by tests.

pub mod http;
pub mod limiter;
pub mod replay;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use limiter::{Clock, MockClock, RateLimiter, SystemClock};
pub use replay::{record_and_replay, FixtureStore, ReplayMode};

pub const DEFAULT_AUTH_ENV_VAR: &str = "ANCHORBENCH_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: ChatRole::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: ChatRole::Assistant,
            content: content.into(),
        }
    }
}

/// Scalar request parameter such as `reasoning_effort = "high"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<&str> for Scalar {
    fn from(s: &str) -> Self {
        Scalar::Text(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub system_text: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    #[serde(default)]
    pub extra_params: BTreeMap<String, Scalar>,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), TransportError> {
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(TransportError::InvalidRequest(format!(
                "temperature {} must be finite and non-negative",
                self.temperature
            )));
        }
        if self.messages.is_empty() {
            return Err(TransportError::InvalidRequest("no messages".into()));
        }
        for pair in self.messages.windows(2) {
            if pair[0].role == pair[1].role {
                return Err(TransportError::InvalidRequest(
                    "messages must alternate roles".into(),
                ));
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form; independent of field order.
    pub fn digest(&self) -> String {
        let value = serde_json::to_value(self).expect("request serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical_json(&value).as_bytes());
        hex::encode(hasher.finalize())
    }
}

/// Compact JSON with object keys sorted at every level.
pub fn canonical_json(value: &serde_json::Value) -> String {
    use serde_json::Value;
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            let body: Vec<String> = keys
                .into_iter()
                .map(|k| {
                    format!(
                        "{}:{}",
                        serde_json::to_string(k).expect("key serializes"),
                        canonical_json(&map[k])
                    )
                })
                .collect();
            format!("{{{}}}", body.join(","))
        }
        Value::Array(items) => {
            let body: Vec<String> = items.iter().map(canonical_json).collect();
            format!("[{}]", body.join(","))
        }
        other => other.to_string(),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    #[serde(default)]
    pub usage: Usage,
    #[serde(skip)]
    pub latency: Duration,
}

impl ChatResponse {
    pub fn text(text: impl Into<String>) -> Self {
        ChatResponse {
            text: text.into(),
            usage: Usage::default(),
            latency: Duration::ZERO,
        }
    }
}

/// Failure of a single attempt, before retry classification.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum AttemptError {
    #[error("request timed out")]
    Timeout,
    #[error("HTTP status {code}: {body}")]
    Status { code: u16, body: String },
    #[error("connection failed: {0}")]
    Connection(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("unparseable response: {0}")]
    Protocol(String),
    #[error("no recorded response for request digest {0}")]
    FixtureMiss(String),
}

impl AttemptError {
    /// Timeouts, connection drops, 408, 429 and 5xx are worth retrying.
    pub fn is_retryable(&self) -> bool {
        match self {
            AttemptError::Timeout | AttemptError::Connection(_) => true,
            AttemptError::Status { code, .. } => matches!(code, 408 | 429 | 500..=599),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TransportError {
    #[error("transport failure after {attempts} attempt(s): {last}")]
    Failure { attempts: u32, last: AttemptError },
    #[error("authentication error: {0}")]
    Auth(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("fixture miss for request digest {0}")]
    FixtureMiss(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

pub trait ChatBackend: Send + Sync {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, AttemptError>;

    /// Short human-readable label (no credentials).
    fn describe(&self) -> String;
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub base_url: String,
    #[serde(default)]
    pub path: Option<String>,
    pub auth_env_var: String,
    pub max_retries: u32,
    pub backoff_base: Duration,
    pub backoff_cap: Duration,
    pub rate_limit_per_minute: u32,
    pub timeout: Duration,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            base_url: "https://api.openai.com".into(),
            path: None,
            auth_env_var: DEFAULT_AUTH_ENV_VAR.into(),
            max_retries: 5,
            backoff_base: Duration::from_millis(500),
            backoff_cap: Duration::from_secs(30),
            rate_limit_per_minute: 60,
            timeout: Duration::from_secs(60),
        }
    }
}

impl fmt::Debug for BackendConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BackendConfig")
            .field("base_url", &self.base_url)
            .field("path", &self.path)
            .field("auth_env_var", &self.auth_env_var)
            .field("max_retries", &self.max_retries)
            .field("rate_limit_per_minute", &self.rate_limit_per_minute)
            .field("timeout", &self.timeout)
            .finish()
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), TransportError> {
        if self.rate_limit_per_minute == 0 {
            return Err(TransportError::InvalidRequest("rate limit must be positive".into()));
        }
        if self.timeout.is_zero() {
            return Err(TransportError::InvalidRequest("timeout must be positive".into()));
        }
        Ok(())
    }

    /// Delay before retry number `attempt` (0-based): `base * 2^attempt`, capped.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.min(20)).unwrap_or(u32::MAX);
        self.backoff_base.saturating_mul(factor).min(self.backoff_cap)
    }
}

/// Blocking, shareable chat client. Retries and rate limiting are internally
/// synchronized, so one client can serve many concurrent sessions.
pub struct ChatClient {
    backend: Arc<dyn ChatBackend>,
    config: BackendConfig,
    limiter: RateLimiter,
    clock: Arc<dyn Clock>,
    attempts: AtomicU64,
}

impl ChatClient {
    pub fn new(backend: Arc<dyn ChatBackend>, config: BackendConfig) -> Result<Self, TransportError> {
        ChatClient::with_clock(backend, config, Arc::new(SystemClock::new()))
    }

    pub fn with_clock(
        backend: Arc<dyn ChatBackend>,
        config: BackendConfig,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, TransportError> {
        config.validate()?;
        Ok(ChatClient {
            backend,
            limiter: RateLimiter::per_minute(config.rate_limit_per_minute),
            config,
            clock,
            attempts: AtomicU64::new(0),
        })
    }

    pub fn limiter(&self) -> &RateLimiter {
        &self.limiter
    }

    /// Total attempts sent through this client, retries included.
    pub fn attempts(&self) -> u64 {
        self.attempts.load(Ordering::SeqCst)
    }

    pub fn describe(&self) -> String {
        self.backend.describe()
    }

    pub fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError> {
        request.validate()?;
        let mut attempt = 0u32;
        loop {
            self.limiter.acquire(self.clock.as_ref());
            self.attempts.fetch_add(1, Ordering::SeqCst);
            let started = Instant::now();
            match self.backend.send(request) {
                Ok(mut response) => {
                    if response.latency.is_zero() {
                        response.latency = started.elapsed();
                    }
                    return Ok(response);
                }
                Err(err) if err.is_retryable() && attempt < self.config.max_retries => {
                    log::warn!(
                        "{}: attempt {} failed ({err}); retrying",
                        self.backend.describe(),
                        attempt + 1
                    );
                    let wake = self.clock.now() + self.config.backoff(attempt);
                    self.clock.sleep_until(wake);
                    attempt += 1;
                }
                Err(err) => {
                    return Err(match err {
                        AttemptError::Auth(m) => TransportError::Auth(m),
                        AttemptError::Protocol(m) => TransportError::Protocol(m),
                        AttemptError::FixtureMiss(d) => TransportError::FixtureMiss(d),
                        other => TransportError::Failure {
                            attempts: attempt + 1,
                            last: other,
                        },
                    })
                }
            }
        }
    }
}

type Responder = dyn Fn(&ChatRequest, usize) -> Result<ChatResponse, AttemptError> + Send + Sync;

/// In-process backend driven by a closure or a fixed script of outcomes.
/// Records every request it receives.
pub struct MockBackend {
    responder: Box<Responder>,
    calls: Mutex<Vec<ChatRequest>>,
}

impl MockBackend {
    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(&ChatRequest, usize) -> Result<ChatResponse, AttemptError> + Send + Sync + 'static,
    {
        MockBackend {
            responder: Box::new(f),
            calls: Mutex::new(Vec::new()),
        }
    }

    /// Plays `script` in order; the last entry repeats once the script runs out.
    pub fn scripted(script: Vec<Result<String, AttemptError>>) -> Self {
        assert!(!script.is_empty(), "mock script must not be empty");
        MockBackend::from_fn(move |_, i| {
            script[i.min(script.len() - 1)]
                .clone()
                .map(ChatResponse::text)
        })
    }

    pub fn calls(&self) -> Vec<ChatRequest> {
        self.calls.lock().expect("mock lock").clone()
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().expect("mock lock").len()
    }
}

impl ChatBackend for MockBackend {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, AttemptError> {
        let index = {
            let mut calls = self.calls.lock().expect("mock lock");
            calls.push(request.clone());
            calls.len() - 1
        };
        (self.responder)(request, index)
    }

    fn describe(&self) -> String {
        "mock".into()
    }
}
