//! Chat-completion requests, the append-only response cache, and transports.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::LlmError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub model: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Separates repetitions of the same run so sampled calls are not shared.
    pub seed_slot: u64,
    pub cache_key: String,
}

impl LlmRequest {
    pub fn new(model: impl Into<String>, prompt: impl Into<String>, temperature: f64, max_tokens: u32, seed_slot: u64) -> Self {
        let model = model.into();
        let prompt = prompt.into();
        let cache_key = cache_key(&model, &prompt, temperature, seed_slot);
        LlmRequest { model, prompt, temperature, max_tokens, seed_slot, cache_key }
    }

    /// The chat-completion request body.
    pub fn body(&self) -> serde_json::Value {
        serde_json::json!({
            "model": self.model,
            "messages": [{ "role": "user", "content": self.prompt }],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        })
    }
}

pub fn cache_key(model: &str, prompt: &str, temperature: f64, seed_slot: u64) -> String {
    let mut hasher = Sha256::new();
    hasher.update(model.as_bytes());
    hasher.update([0]);
    hasher.update(prompt.as_bytes());
    hasher.update([0]);
    hasher.update(temperature.to_bits().to_le_bytes());
    hasher.update(seed_slot.to_le_bytes());
    hex::encode(hasher.finalize())
}

/// Something that can answer a request with raw model text.
pub trait Transport {
    fn send(&mut self, request: &LlmRequest) -> Result<String, LlmError>;
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn send(&mut self, request: &LlmRequest) -> Result<String, LlmError> {
        (**self).send(request)
    }
}

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    cache_key: String,
    timestamp: u64,
    raw: String,
}

/// Response cache keyed by [`LlmRequest::cache_key`], optionally persisted as
/// JSON Lines. Appends are single `write` calls so concurrent readers see
/// whole records or a torn final line, which [`ResponseCache::open`] skips.
#[derive(Debug, Default)]
pub struct ResponseCache {
    entries: HashMap<String, String>,
    file: Option<(PathBuf, File)>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let path = path.as_ref().to_path_buf();
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path).map_err(|e| LlmError::Cache(format!("{}: {e}", path.display())))?);
            for line in reader.lines() {
                let line = line.map_err(|e| LlmError::Cache(e.to_string()))?;
                // First record for a key wins; later duplicates come from racing writers.
                if let Ok(record) = serde_json::from_str::<CacheRecord>(&line) {
                    entries.entry(record.cache_key).or_insert(record.raw);
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| LlmError::Cache(format!("{}: {e}", path.display())))?;
        Ok(ResponseCache { entries, file: Some((path, file)) })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn path(&self) -> Option<&Path> {
        self.file.as_ref().map(|(p, _)| p.as_path())
    }

    pub fn insert(&mut self, key: &str, raw: &str) -> Result<(), LlmError> {
        if self.entries.contains_key(key) {
            return Ok(());
        }
        if let Some((path, file)) = self.file.as_mut() {
            let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            let record = CacheRecord { cache_key: key.to_string(), timestamp, raw: raw.to_string() };
            let mut line = serde_json::to_string(&record).map_err(|e| LlmError::Cache(e.to_string()))?;
            line.push('\n');
            file.write_all(line.as_bytes()).map_err(|e| LlmError::Cache(format!("{}: {e}", path.display())))?;
        }
        self.entries.insert(key.to_string(), raw.to_string());
        Ok(())
    }
}

/// A transport fronted by the response cache. Cache hits never reach the
/// transport.
pub struct CachingClient<T> {
    transport: T,
    cache: ResponseCache,
    network_calls: u64,
    cache_hits: u64,
}

impl<T: Transport> CachingClient<T> {
    pub fn new(transport: T, cache: ResponseCache) -> Self {
        CachingClient { transport, cache, network_calls: 0, cache_hits: 0 }
    }

    pub fn complete(&mut self, request: &LlmRequest) -> Result<String, LlmError> {
        if let Some(hit) = self.cache.get(&request.cache_key) {
            self.cache_hits += 1;
            return Ok(hit.to_string());
        }
        self.network_calls += 1;
        let raw = self.transport.send(request)?;
        self.cache.insert(&request.cache_key, &raw)?;
        Ok(raw)
    }

    pub fn network_calls(&self) -> u64 {
        self.network_calls
    }

    pub fn cache_hits(&self) -> u64 {
        self.cache_hits
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts, including the first.
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    /// Upper bound on any single wait, including server-advised ones.
    pub max_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 3, initial_backoff: Duration::from_secs(1), max_backoff: Duration::from_secs(60) }
    }
}

impl RetryPolicy {
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt).unwrap_or(u32::MAX);
        self.initial_backoff.saturating_mul(factor).min(self.max_backoff)
    }
}

/// Endpoint settings, usually read from `ECHOSIM_LLM_URL`, `ECHOSIM_LLM_KEY`
/// and `ECHOSIM_LLM_MODEL`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EndpointConfig {
    pub url: String,
    pub api_key: Option<String>,
    pub model: String,
}

impl EndpointConfig {
    pub fn from_env() -> Option<Self> {
        let url = std::env::var("ECHOSIM_LLM_URL").ok().filter(|s| !s.is_empty())?;
        let model = std::env::var("ECHOSIM_LLM_MODEL").unwrap_or_default();
        let api_key = std::env::var("ECHOSIM_LLM_KEY").ok().filter(|s| !s.is_empty());
        Some(EndpointConfig { url, api_key, model })
    }
}

/// Pulls `choices[0].message.content` out of a chat-completion response body.
pub fn extract_content(body: &str) -> Result<String, LlmError> {
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| LlmError::Transport(format!("response is not JSON: {e}")))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| LlmError::Transport("response has no choices[0].message.content".into()))
}

fn excerpt(body: &str) -> String {
    const LIMIT: usize = 200;
    match body.char_indices().nth(LIMIT) {
        Some((cut, _)) => format!("{}…", &body[..cut]),
        None => body.to_string(),
    }
}

/// What to do after one attempt.
#[derive(Debug, PartialEq)]
#[cfg_attr(not(feature = "http"), allow(dead_code))]
pub(crate) enum Outcome {
    Done(String),
    Retry { reason: String, wait: Option<Duration> },
    Fatal(LlmError),
}

/// Classifies a status line and body; `retry_after` is the raw header value.
#[cfg_attr(not(feature = "http"), allow(dead_code))]
pub(crate) fn classify(status: u16, body: &str, retry_after: Option<&str>) -> Outcome {
    match status {
        200..=299 => match extract_content(body) {
            Ok(content) => Outcome::Done(content),
            Err(e) => Outcome::Fatal(e),
        },
        429 => Outcome::Retry {
            reason: "rate limited (429)".into(),
            wait: retry_after.and_then(|v| v.trim().parse::<f64>().ok()).filter(|s| *s >= 0.0).map(Duration::from_secs_f64),
        },
        408 | 500..=599 => Outcome::Retry { reason: format!("server error {status}: {}", excerpt(body)), wait: None },
        _ => Outcome::Fatal(LlmError::Api { status, body: excerpt(body) }),
    }
}

#[cfg(feature = "http")]
pub use http::HttpTransport;

#[cfg(feature = "http")]
mod http {
    use std::time::Duration;

    use super::{classify, EndpointConfig, LlmRequest, Outcome, RetryPolicy, Transport};
    use crate::llm::LlmError;

    /// Blocking chat-completion client with bounded retries.
    pub struct HttpTransport {
        agent: ureq::Agent,
        endpoint: EndpointConfig,
        retry: RetryPolicy,
    }

    impl HttpTransport {
        pub fn new(endpoint: EndpointConfig, retry: RetryPolicy) -> Self {
            let config = ureq::Agent::config_builder()
                .http_status_as_error(false)
                .timeout_global(Some(Duration::from_secs(120)))
                .build();
            HttpTransport { agent: ureq::Agent::new_with_config(config), endpoint, retry }
        }

        fn attempt(&self, request: &LlmRequest) -> Outcome {
            let mut call = self.agent.post(&self.endpoint.url).header("Content-Type", "application/json");
            if let Some(key) = &self.endpoint.api_key {
                call = call.header("Authorization", &format!("Bearer {key}"));
            }
            let mut response = match call.send_json(request.body()) {
                Ok(r) => r,
                Err(e) => return Outcome::Retry { reason: e.to_string(), wait: None },
            };
            let status = response.status().as_u16();
            let retry_after = response.headers().get("retry-after").and_then(|v| v.to_str().ok()).map(str::to_string);
            let body = match response.body_mut().read_to_string() {
                Ok(b) => b,
                Err(e) => return Outcome::Retry { reason: format!("reading body: {e}"), wait: None },
            };
            classify(status, &body, retry_after.as_deref())
        }
    }

    impl Transport for HttpTransport {
        fn send(&mut self, request: &LlmRequest) -> Result<String, LlmError> {
            let mut last = String::new();
            for attempt in 0..self.retry.max_attempts {
                match self.attempt(request) {
                    Outcome::Done(content) => return Ok(content),
                    Outcome::Fatal(e) => return Err(e),
                    Outcome::Retry { reason, wait } => {
                        log::warn!("chat completion attempt {} failed: {reason}", attempt + 1);
                        last = reason;
                        if attempt + 1 < self.retry.max_attempts {
                            let wait = wait.unwrap_or_else(|| self.retry.backoff(attempt)).min(self.retry.max_backoff);
                            std::thread::sleep(wait);
                        }
                    }
                }
            }
            Err(LlmError::Transport(format!("gave up after {} attempts: {last}", self.retry.max_attempts)))
        }
    }
}
