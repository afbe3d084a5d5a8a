use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{BackendConfig, BackendError};

pub const API_KEY_ENV: &str = "CARENLI_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// OpenAI-compatible chat-completions request body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
}

/// Identifies one logical request; also names its transcript file.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RequestKey {
    pub item_id: String,
    pub purpose: String,
}

impl RequestKey {
    pub fn new(item_id: &str, purpose: &str) -> Self {
        Self {
            item_id: item_id.to_string(),
            purpose: purpose.to_string(),
        }
    }

    pub fn file_name(&self) -> String {
        let clean = |s: &str| -> String {
            s.chars()
                .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
                .collect()
        };
        format!("{}__{}.json", clean(&self.item_id), clean(&self.purpose))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub request: ChatRequest,
    pub response: Value,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{message}")]
pub struct TransportError {
    pub message: String,
    /// Worth retrying: timeouts, rate limits, server errors, network failures.
    pub retryable: bool,
    pub status: Option<u16>,
}

impl TransportError {
    pub fn fatal(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            retryable: false,
            status: None,
        }
    }

    pub fn retryable(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            retryable: true,
            status: None,
        }
    }

    pub fn from_status(status: u16, body: &str) -> Self {
        Self {
            message: format!("HTTP {status}: {}", body.chars().take(300).collect::<String>()),
            retryable: status == 408 || status == 429 || (500..600).contains(&status),
            status: Some(status),
        }
    }
}

pub trait ChatTransport: Send + Sync {
    /// Raw response body for `request`.
    fn complete(&self, key: &RequestKey, request: &ChatRequest) -> Result<Value, TransportError>;

    /// Same request always yields the same reply (no point retrying a bad one).
    fn deterministic(&self) -> bool {
        false
    }
}

/// Assistant text of a chat-completions response body.
pub fn reply_content(response: &Value) -> Option<&str> {
    response
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
    url: String,
    api_key: String,
}

impl HttpTransport {
    pub fn new(endpoint: &str, api_key: String, timeout: Duration) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Config(format!("http client: {e}")))?;
        Ok(Self {
            client,
            url: format!("{}/chat/completions", endpoint.trim_end_matches('/')),
            api_key,
        })
    }

    pub fn from_env(config: &BackendConfig) -> Result<Self, BackendError> {
        let key = std::env::var(API_KEY_ENV)
            .map_err(|_| BackendError::Config(format!("{API_KEY_ENV} is not set")))?;
        Self::new(
            config.endpoint.as_deref().unwrap_or_default(),
            key,
            Duration::from_secs(config.timeout_secs),
        )
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&self, _key: &RequestKey, request: &ChatRequest) -> Result<Value, TransportError> {
        let resp = self
            .client
            .post(&self.url)
            .bearer_auth(&self.api_key)
            .json(request)
            .send()
            .map_err(|e| TransportError::retryable(format!("request failed: {e}")))?;
        let status = resp.status().as_u16();
        let body = resp
            .text()
            .map_err(|e| TransportError::retryable(format!("reading body: {e}")))?;
        if !(200..300).contains(&status) {
            return Err(TransportError::from_status(status, &body));
        }
        serde_json::from_str(&body).map_err(|e| TransportError::retryable(format!("response is not JSON: {e}")))
    }
}

/// Writes one transcript file per successful request.
pub struct RecordingTransport<T> {
    inner: T,
    dir: PathBuf,
}

impl<T> RecordingTransport<T> {
    pub fn new(inner: T, dir: PathBuf) -> Self {
        Self { inner, dir }
    }
}

impl<T: ChatTransport> ChatTransport for RecordingTransport<T> {
    fn complete(&self, key: &RequestKey, request: &ChatRequest) -> Result<Value, TransportError> {
        let start = Instant::now();
        let response = self.inner.complete(key, request)?;
        let transcript = Transcript {
            request: request.clone(),
            response: response.clone(),
            latency_ms: start.elapsed().as_millis() as u64,
        };
        fs::create_dir_all(&self.dir)
            .and_then(|_| {
                let json = serde_json::to_string_pretty(&transcript).expect("transcript serialises");
                fs::write(self.dir.join(key.file_name()), json)
            })
            .map_err(|e| TransportError::fatal(format!("recording transcript: {e}")))?;
        Ok(response)
    }

    fn deterministic(&self) -> bool {
        self.inner.deterministic()
    }
}

/// Answers from recorded transcripts; a missing recording is a hard error.
pub struct ReplayTransport {
    dir: PathBuf,
}

impl ReplayTransport {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

impl ChatTransport for ReplayTransport {
    fn complete(&self, key: &RequestKey, _request: &ChatRequest) -> Result<Value, TransportError> {
        let path = self.dir.join(key.file_name());
        let text = fs::read_to_string(&path)
            .map_err(|e| TransportError::fatal(format!("no recorded transcript at {}: {e}", path.display())))?;
        let t: Transcript = serde_json::from_str(&text)
            .map_err(|e| TransportError::fatal(format!("bad transcript {}: {e}", path.display())))?;
        Ok(t.response)
    }

    fn deterministic(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_classification() {
        assert!(TransportError::from_status(429, "").retryable);
        assert!(TransportError::from_status(503, "").retryable);
        assert!(TransportError::from_status(408, "").retryable);
        assert!(!TransportError::from_status(401, "").retryable);
        assert!(!TransportError::from_status(400, "").retryable);
    }

    #[test]
    fn transcript_names_are_filesystem_safe() {
        assert_eq!(RequestKey::new("causal/001", "extract").file_name(), "causal_001__extract.json");
    }

    #[test]
    fn record_then_replay() {
        struct Canned;
        impl ChatTransport for Canned {
            fn complete(&self, _: &RequestKey, _: &ChatRequest) -> Result<Value, TransportError> {
                Ok(serde_json::json!({"choices": [{"message": {"role": "assistant", "content": "Family: Risk"}}]}))
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let key = RequestKey::new("x", "classify");
        let req = ChatRequest {
            model: "m".into(),
            temperature: 0.0,
            messages: vec![],
        };
        let rec = RecordingTransport::new(Canned, dir.path().to_path_buf());
        let live = rec.complete(&key, &req).unwrap();
        let replayed = ReplayTransport::new(dir.path()).complete(&key, &req).unwrap();
        assert_eq!(live, replayed);
        assert_eq!(reply_content(&replayed), Some("Family: Risk"));
        assert!(ReplayTransport::new(dir.path())
            .complete(&RequestKey::new("y", "classify"), &req)
            .is_err());
    }
}
