//! Text → IR extraction, family classification and the reasoning-agnostic
//! baselines. The mock serves gold annotations; the LLM backend talks to a
//! chat-completions endpoint, live or from recorded transcripts.

mod llm;
pub mod prompts;
mod transport;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use llm::{parse_baseline_label, parse_extraction, parse_family_label, LlmBackend};
pub use transport::{
    ChatMessage, ChatRequest, ChatTransport, HttpTransport, RecordingTransport, ReplayTransport,
    RequestKey, Transcript, TransportError, API_KEY_ENV,
};

use crate::ir::StructuredPremise;
use crate::types::{NliItem, ReasoningFamily, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    AgnosticCot,
    AgnosticDirect,
}

impl BaselineMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BaselineMode::AgnosticCot => "agnostic-cot",
            BaselineMode::AgnosticDirect => "agnostic-direct",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("the mock backend cannot run the {0} baseline")]
    UnsupportedForMock(&'static str),
    #[error("item `{0}` has no gold IR for the mock backend")]
    MissingGoldIr(String),
    #[error("item `{0}` has no gold family for the mock backend")]
    MissingGoldFamily(String),
    #[error("extraction failed for `{item}`{}: {message}", .field.as_ref().map(|f| format!(" (field `{f}`)")).unwrap_or_default())]
    ExtractionFailure {
        item: String,
        field: Option<String>,
        message: String,
    },
    #[error("cannot parse a label for `{item}` from: {reply}")]
    LabelParse { item: String, reply: String },
    #[error("transport failed for `{item}` after {attempts} attempt(s): {source}")]
    Transport {
        item: String,
        attempts: u32,
        source: TransportError,
    },
    #[error("backend configuration: {0}")]
    Config(String),
}

impl BackendError {
    /// A transport failure that survived every retry.
    pub fn is_exhaustion(&self) -> bool {
        matches!(self, BackendError::Transport { source, .. } if source.retryable)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Mock,
    /// Live chat-completions endpoint.
    Remote,
    /// Recorded transcripts only; never touches the network.
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    pub model_name: Option<String>,
    pub temperature: f64,
    pub max_retries: u32,
    pub backoff_initial_ms: u64,
    pub backoff_multiplier: f64,
    pub max_in_flight: usize,
    /// Remote: where to record transcripts (optional). Replay: where to read them.
    pub transcripts: Option<PathBuf>,
    pub timeout_secs: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            endpoint: None,
            model_name: None,
            temperature: 0.0,
            max_retries: 3,
            backoff_initial_ms: 500,
            backoff_multiplier: 2.0,
            max_in_flight: 4,
            transcripts: None,
            timeout_secs: 120,
        }
    }
}

impl BackendConfig {
    pub fn mock() -> Self {
        Self::default()
    }

    pub fn replay(dir: impl Into<PathBuf>) -> Self {
        Self {
            kind: BackendKind::Replay,
            transcripts: Some(dir.into()),
            model_name: Some("replay".into()),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        let bad = |m: &str| Err(BackendError::Config(m.to_string()));
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be a finite value >= 0");
        }
        if self.max_in_flight == 0 {
            return bad("max_in_flight must be at least 1");
        }
        if !(self.backoff_multiplier >= 1.0 && self.backoff_multiplier.is_finite()) {
            return bad("backoff multiplier must be >= 1");
        }
        match self.kind {
            BackendKind::Mock => Ok(()),
            BackendKind::Remote => {
                if self.endpoint.as_deref().is_none_or(str::is_empty) {
                    return bad("remote backend requires an endpoint");
                }
                if self.model_name.as_deref().is_none_or(str::is_empty) {
                    return bad("remote backend requires a model name");
                }
                Ok(())
            }
            BackendKind::Replay => {
                if self.transcripts.is_none() {
                    return bad("replay backend requires a transcript directory");
                }
                Ok(())
            }
        }
    }

    /// Name used in ledgers and reports.
    pub fn label(&self) -> String {
        match self.kind {
            BackendKind::Mock => "mock".into(),
            BackendKind::Remote => self.model_name.clone().unwrap_or_default(),
            BackendKind::Replay => format!("replay:{}", self.model_name.as_deref().unwrap_or("replay")),
        }
    }
}

pub trait Backend: Send + Sync {
    fn label(&self) -> String;

    fn is_mock(&self) -> bool {
        false
    }

    fn extract_ir(&self, item: &NliItem, hint: Option<ReasoningFamily>) -> Result<StructuredPremise, BackendError>;

    fn classify_family(&self, item: &NliItem) -> Result<ReasoningFamily, BackendError>;

    /// Verdict plus the raw reply it was read from.
    fn run_baseline(&self, item: &NliItem, mode: BaselineMode) -> Result<(Verdict, String), BackendError>;
}

/// Serves the gold annotations. Baselines are model behaviour, so it refuses them.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockBackend;

impl Backend for MockBackend {
    fn label(&self) -> String {
        "mock".into()
    }

    fn is_mock(&self) -> bool {
        true
    }

    fn extract_ir(&self, item: &NliItem, _hint: Option<ReasoningFamily>) -> Result<StructuredPremise, BackendError> {
        item.gold_ir
            .clone()
            .ok_or_else(|| BackendError::MissingGoldIr(item.id.clone()))
    }

    fn classify_family(&self, item: &NliItem) -> Result<ReasoningFamily, BackendError> {
        item.gold_family
            .ok_or_else(|| BackendError::MissingGoldFamily(item.id.clone()))
    }

    fn run_baseline(&self, _item: &NliItem, mode: BaselineMode) -> Result<(Verdict, String), BackendError> {
        Err(BackendError::UnsupportedForMock(mode.as_str()))
    }
}

pub fn build_backend(config: &BackendConfig) -> Result<Box<dyn Backend>, BackendError> {
    config.validate()?;
    match config.kind {
        BackendKind::Mock => Ok(Box::new(MockBackend)),
        BackendKind::Replay => {
            let dir = config.transcripts.clone().expect("validated");
            Ok(Box::new(LlmBackend::new(
                Box::new(ReplayTransport::new(dir)),
                config.clone(),
            )))
        }
        BackendKind::Remote => {
            let http = HttpTransport::from_env(config)?;
            let transport: Box<dyn ChatTransport> = match &config.transcripts {
                Some(dir) => Box::new(RecordingTransport::new(http, dir.clone())),
                None => Box::new(http),
            };
            Ok(Box::new(LlmBackend::new(transport, config.clone())))
        }
    }
}
