use std::collections::VecDeque;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const API_KEY_ENV: &str = "T2BM_API_KEY";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);
pub const DEFAULT_NETWORK_RETRIES: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

/// Chat-completions request body. Field order is the wire order and also
/// what [`request_key`] hashes, so it must stay stable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ChatRequest {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("request serializes")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub total_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChatResponse {
    /// Exactly what the service returned; never trimmed.
    pub content: String,
    pub finish_reason: Option<String>,
    pub usage: Option<Usage>,
}

impl ChatResponse {
    pub fn canned(content: impl Into<String>) -> Self {
        Self { content: content.into(), finish_reason: Some("stop".into()), usage: None }
    }

    /// Reads the first choice out of an OpenAI-style response body.
    pub fn from_wire(body: &Value) -> Result<Self, TransportError> {
        let choice = body
            .get("choices")
            .and_then(|c| c.get(0))
            .ok_or_else(|| TransportError::Decode("response has no choices".into()))?;
        let content = choice
            .pointer("/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| TransportError::Decode("first choice has no message content".into()))?
            .to_owned();
        let finish_reason = choice.get("finish_reason").and_then(Value::as_str).map(str::to_owned);
        let usage = body.get("usage").and_then(|u| serde_json::from_value(u.clone()).ok());
        Ok(Self { content, finish_reason, usage })
    }
}

/// Hex SHA-256 of the compact request JSON; names the fixture file.
pub fn request_key(req: &ChatRequest) -> String {
    hex::encode(Sha256::digest(req.to_json().as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportKind {
    Live,
    Recorded,
}

impl fmt::Display for TransportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Live => "live",
            Self::Recorded => "recorded",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("environment variable {API_KEY_ENV} is not set")]
    MissingApiKey,
    #[error("request to {url} failed: {message}")]
    Network { url: String, message: String },
    #[error("service answered HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Decode(String),
    #[error("no recorded response for request {key} (expected {path})")]
    MissingFixture { key: String, path: String },
    #[error("fixture {path}: {message}")]
    Fixture { path: String, message: String },
    #[error("scripted transport has no replies left")]
    Exhausted,
}

pub trait Transport: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, TransportError>;
    fn kind(&self) -> TransportKind;
    /// How many requests may be in flight at once.
    fn parallelism(&self) -> usize {
        1
    }
}

impl<T: Transport + ?Sized> Transport for &T {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, TransportError> {
        (**self).complete(req)
    }
    fn kind(&self) -> TransportKind {
        (**self).kind()
    }
    fn parallelism(&self) -> usize {
        (**self).parallelism()
    }
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, TransportError> {
        (**self).complete(req)
    }
    fn kind(&self) -> TransportKind {
        (**self).kind()
    }
    fn parallelism(&self) -> usize {
        (**self).parallelism()
    }
}

/// Counting semaphore bounding in-flight live requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(n: usize) -> Self {
        Self { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> GateGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug, Clone)]
pub struct HttpSettings {
    pub base_url: String,
    pub timeout: Duration,
    pub network_retries: u32,
    /// First backoff delay; doubles on each retry.
    pub backoff: Duration,
    pub parallelism: usize,
}

impl Default for HttpSettings {
    fn default() -> Self {
        Self {
            base_url: DEFAULT_BASE_URL.into(),
            timeout: DEFAULT_TIMEOUT,
            network_retries: DEFAULT_NETWORK_RETRIES,
            backoff: Duration::from_millis(500),
            parallelism: 4,
        }
    }
}

/// OpenAI-compatible `POST <base_url>/chat/completions` client.
pub struct HttpTransport {
    settings: HttpSettings,
    api_key: Option<String>,
    agent: ureq::Agent,
    gate: Gate,
}

impl fmt::Debug for HttpTransport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpTransport")
            .field("settings", &self.settings)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl HttpTransport {
    /// Reads the key from `T2BM_API_KEY`. A missing key is reported on the
    /// first request rather than here, so keyless local servers still work
    /// if they ignore auth.
    pub fn from_env(settings: HttpSettings) -> Self {
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self::new(settings, key)
    }

    pub fn new(settings: HttpSettings, api_key: Option<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(settings.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let gate = Gate::new(settings.parallelism);
        Self { settings, api_key, agent, gate }
    }

    pub fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.settings.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, url: &str, body: &str) -> Result<ChatResponse, TransportError> {
        let mut call = self.agent.post(url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call
            .send(body)
            .map_err(|e| TransportError::Network { url: url.to_owned(), message: e.to_string() })?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Network { url: url.to_owned(), message: e.to_string() })?;
        if !(200..300).contains(&status) {
            let mut body = text;
            body.truncate(512);
            return Err(TransportError::Status { status, body });
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| TransportError::Decode(e.to_string()))?;
        ChatResponse::from_wire(&value)
    }
}

fn retryable(err: &TransportError) -> bool {
    match err {
        TransportError::Network { .. } => true,
        TransportError::Status { status, .. } => *status == 429 || *status >= 500,
        _ => false,
    }
}

impl Transport for HttpTransport {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, TransportError> {
        let url = self.endpoint();
        if self.api_key.is_none() && url.starts_with("https://") {
            return Err(TransportError::MissingApiKey);
        }
        let body = req.to_json();
        let _slot = self.gate.acquire();
        let mut delay = self.settings.backoff;
        let mut tries = 0;
        loop {
            match self.attempt(&url, &body) {
                Err(e) if retryable(&e) && tries < self.settings.network_retries => {
                    tries += 1;
                    std::thread::sleep(delay);
                    delay *= 2;
                }
                other => return other,
            }
        }
    }

    fn kind(&self) -> TransportKind {
        TransportKind::Live
    }

    fn parallelism(&self) -> usize {
        self.settings.parallelism.max(1)
    }
}

/// Replays responses stored as `<request_key>.txt` in a directory. The file
/// content is the reply text, byte for byte.
#[derive(Debug, Clone)]
pub struct RecordedTransport {
    dir: PathBuf,
}

impl RecordedTransport {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn fixture_path(&self, req: &ChatRequest) -> PathBuf {
        self.dir.join(format!("{}.txt", request_key(req)))
    }

    /// Writes a fixture so that `req` replays `reply`.
    pub fn store(&self, req: &ChatRequest, reply: &str) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(&self.dir)?;
        let path = self.fixture_path(req);
        std::fs::write(&path, reply)?;
        Ok(path)
    }
}

impl Transport for RecordedTransport {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, TransportError> {
        let path = self.fixture_path(req);
        match std::fs::read_to_string(&path) {
            Ok(text) => Ok(ChatResponse::canned(text)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(TransportError::MissingFixture {
                key: request_key(req),
                path: path.display().to_string(),
            }),
            Err(e) => Err(TransportError::Fixture { path: path.display().to_string(), message: e.to_string() }),
        }
    }

    fn kind(&self) -> TransportKind {
        TransportKind::Recorded
    }

    fn parallelism(&self) -> usize {
        usize::MAX
    }
}

/// In-memory queue of replies, handed out in order regardless of request.
/// Keeps every request it sees.
#[derive(Debug, Default)]
pub struct ScriptedTransport {
    replies: Mutex<VecDeque<Result<String, TransportError>>>,
    seen: Mutex<Vec<ChatRequest>>,
}

impl ScriptedTransport {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::with_results(replies.into_iter().map(|s| Ok(s.into())))
    }

    pub fn with_results(replies: impl IntoIterator<Item = Result<String, TransportError>>) -> Self {
        Self { replies: Mutex::new(replies.into_iter().collect()), seen: Mutex::default() }
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.seen.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl Transport for ScriptedTransport {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, TransportError> {
        self.seen.lock().unwrap_or_else(|e| e.into_inner()).push(req.clone());
        let next = self.replies.lock().unwrap_or_else(|e| e.into_inner()).pop_front();
        next.unwrap_or(Err(TransportError::Exhausted)).map(ChatResponse::canned)
    }

    fn kind(&self) -> TransportKind {
        TransportKind::Recorded
    }
}
