use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use super::prompts;
use super::transport::{reply_content, ChatMessage, ChatRequest, ChatTransport, RequestKey};
use super::{Backend, BackendConfig, BackendError, BaselineMode};
use crate::ir::{IrError, StructuredPremise};
use crate::types::{NliItem, ReasoningFamily, Verdict};

/// Counting gate on outstanding requests.
struct InFlight {
    count: Mutex<usize>,
    freed: Condvar,
    max: usize,
    peak: AtomicUsize,
}

struct Permit<'a>(&'a InFlight);

impl InFlight {
    fn new(max: usize) -> Self {
        Self {
            count: Mutex::new(0),
            freed: Condvar::new(),
            max: max.max(1),
            peak: AtomicUsize::new(0),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.count.lock().expect("in-flight lock");
        while *n >= self.max {
            n = self.freed.wait(n).expect("in-flight lock");
        }
        *n += 1;
        self.peak.fetch_max(*n, Ordering::SeqCst);
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.count.lock().expect("in-flight lock") -= 1;
        self.0.freed.notify_one();
    }
}

/// Chat-completions backed extraction, classification and baselines.
pub struct LlmBackend {
    transport: Box<dyn ChatTransport>,
    config: BackendConfig,
    gate: InFlight,
}

impl LlmBackend {
    pub fn new(transport: Box<dyn ChatTransport>, config: BackendConfig) -> Self {
        let gate = InFlight::new(config.max_in_flight);
        Self {
            transport,
            config,
            gate,
        }
    }

    /// Most requests ever outstanding at once.
    pub fn peak_in_flight(&self) -> usize {
        self.gate.peak.load(Ordering::SeqCst)
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let ms = self.config.backoff_initial_ms as f64 * self.config.backoff_multiplier.powi(attempt as i32);
        Duration::from_millis(ms.min(60_000.0) as u64)
    }

    fn call<T>(
        &self,
        key: RequestKey,
        prompt: String,
        parse: impl Fn(&str) -> Result<T, BackendError>,
    ) -> Result<T, BackendError> {
        let request = ChatRequest {
            model: self.config.model_name.clone().unwrap_or_default(),
            temperature: self.config.temperature,
            messages: vec![ChatMessage {
                role: "user".into(),
                content: prompt,
            }],
        };
        let mut attempt = 0u32;
        loop {
            let result = {
                let _permit = self.gate.acquire();
                self.transport.complete(&key, &request)
            };
            let (err, may_retry) = match result {
                Ok(body) => {
                    let parsed = match reply_content(&body) {
                        Some(text) => parse(text),
                        None => Err(BackendError::ExtractionFailure {
                            item: key.item_id.clone(),
                            field: None,
                            message: "response carries no message content".into(),
                        }),
                    };
                    match parsed {
                        Ok(v) => return Ok(v),
                        Err(e) => (e, !self.transport.deterministic()),
                    }
                }
                Err(t) => {
                    let retry = t.retryable;
                    (
                        BackendError::Transport {
                            item: key.item_id.clone(),
                            attempts: attempt + 1,
                            source: t,
                        },
                        retry,
                    )
                }
            };
            if !may_retry || attempt >= self.config.max_retries {
                return Err(err);
            }
            std::thread::sleep(self.backoff(attempt));
            attempt += 1;
        }
    }
}

impl Backend for LlmBackend {
    fn label(&self) -> String {
        self.config.label()
    }

    fn extract_ir(&self, item: &NliItem, hint: Option<ReasoningFamily>) -> Result<StructuredPremise, BackendError> {
        let prompt = prompts::render(prompts::EXTRACT, item, hint);
        self.call(RequestKey::new(&item.id, "extract"), prompt, |text| {
            parse_extraction(&item.id, text, hint)
        })
    }

    fn classify_family(&self, item: &NliItem) -> Result<ReasoningFamily, BackendError> {
        let prompt = prompts::render(prompts::CLASSIFY, item, None);
        self.call(RequestKey::new(&item.id, "classify"), prompt, |text| {
            parse_family_label(text).ok_or_else(|| BackendError::ExtractionFailure {
                item: item.id.clone(),
                field: Some("family".into()),
                message: format!("unrecognised family label: {}", text.trim()),
            })
        })
    }

    fn run_baseline(&self, item: &NliItem, mode: BaselineMode) -> Result<(Verdict, String), BackendError> {
        let template = match mode {
            BaselineMode::AgnosticCot => prompts::BASELINE_COT,
            BaselineMode::AgnosticDirect => prompts::BASELINE_DIRECT,
        };
        let prompt = prompts::render(template, item, None);
        self.call(RequestKey::new(&item.id, mode.as_str()), prompt, |text| {
            parse_baseline_label(text)
                .map(|v| (v, text.to_string()))
                .ok_or_else(|| BackendError::LabelParse {
                    item: item.id.clone(),
                    reply: text.chars().take(200).collect(),
                })
        })
    }
}

fn strip_decoration(s: &str) -> &str {
    s.trim()
        .trim_matches(|c: char| c == '*' || c == '"' || c == '\'' || c == '`' || c == '.' || c == ' ')
}

/// Family named on the last line that names one, with or without a
/// `Family:`/`Label:` prefix.
pub fn parse_family_label(reply: &str) -> Option<ReasoningFamily> {
    reply.lines().rev().find_map(|line| {
        let line = strip_decoration(line);
        let value = match line.split_once(':') {
            Some((head, tail))
                if ["family", "label", "answer"].contains(&strip_decoration(head).to_ascii_lowercase().as_str()) =>
            {
                tail
            }
            _ => line,
        };
        strip_decoration(value).parse().ok()
    })
}

/// Verdict from the last `Label: X` line.
pub fn parse_baseline_label(reply: &str) -> Option<Verdict> {
    reply.lines().rev().find_map(|line| {
        let lower = line.to_ascii_lowercase();
        let at = lower.find("label:")?;
        let rest = strip_decoration(&line[at + "label:".len()..]);
        let word = rest.split(|c: char| !c.is_ascii_alphabetic()).next()?;
        word.parse().ok()
    })
}

/// Reads a structured premise out of a model reply (fenced or bare JSON)
/// and checks its invariants.
pub fn parse_extraction(
    item: &str,
    reply: &str,
    hint: Option<ReasoningFamily>,
) -> Result<StructuredPremise, BackendError> {
    let fail = |field: Option<String>, message: String| BackendError::ExtractionFailure {
        item: item.to_string(),
        field,
        message,
    };
    let (start, end) = match (reply.find('{'), reply.rfind('}')) {
        (Some(s), Some(e)) if s < e => (s, e),
        _ => return Err(fail(None, "reply contains no JSON object".into())),
    };
    let ir: StructuredPremise = serde_json::from_str(&reply[start..=end]).map_err(|e| {
        let msg = e.to_string();
        let field = msg
            .split_once("missing field `")
            .and_then(|(_, rest)| rest.split_once('`'))
            .map(|(f, _)| f.to_string())
            .or_else(|| msg.contains("`family`").then(|| "family".to_string()));
        fail(field, msg)
    })?;
    ir.validate().map_err(|e| {
        let field = match &e {
            IrError::UnknownAtom { field, .. } => Some(field.clone()),
            IrError::DuplicateAtom(_) => Some("atoms".into()),
            IrError::NoClaims => Some("claims".into()),
            IrError::NoCommitments => Some("commitments".into()),
            IrError::EffectWithoutComparator => Some("evidence.comparator_shows_effect".into()),
            IrError::NonPositiveDose(_) => Some("tuple.dose".into()),
            IrError::ZeroDuration => Some("tuple.schedule".into()),
            _ => Some("events".into()),
        };
        fail(field, e.to_string())
    })?;
    if let Some(h) = hint {
        if ir.family() != h {
            return Err(fail(
                Some("family".into()),
                format!("expected {} but reply is {}", h.as_str(), ir.family().as_str()),
            ));
        }
    }
    Ok(ir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::transport::TransportError;
    use crate::fixtures;
    use serde_json::{json, Value};
    use std::sync::atomic::AtomicU32;
    use std::sync::Arc;

    #[test]
    fn family_labels() {
        assert_eq!(parse_family_label("Family: Risk State Abstraction"), Some(ReasoningFamily::RiskStateAbstraction));
        assert_eq!(parse_family_label("thinking...\n**Epistemic Verification**"), Some(ReasoningFamily::EpistemicVerification));
        assert_eq!(parse_family_label("causal_attribution"), Some(ReasoningFamily::CausalAttribution));
        assert_eq!(parse_family_label("Family: Temporal Reasoning"), None);
    }

    #[test]
    fn baseline_labels() {
        assert_eq!(parse_baseline_label("Label: Entailment"), Some(Verdict::Entailment));
        assert_eq!(
            parse_baseline_label("Step 1 ... Label: neutral?\nso final\nLabel: Contradiction."),
            Some(Verdict::Contradiction)
        );
        assert_eq!(parse_baseline_label("I think it is entailed"), None);
    }

    #[test]
    fn extraction_round_trip_and_missing_field() {
        let ir = fixtures::problem_12().gold_ir.unwrap();
        let reply = format!("```json\n{}\n```", serde_json::to_string_pretty(&ir).unwrap());
        assert_eq!(parse_extraction("p12", &reply, None).unwrap(), ir);
        assert!(matches!(
            parse_extraction("p12", &reply, Some(ReasoningFamily::CausalAttribution)),
            Err(BackendError::ExtractionFailure { field: Some(f), .. }) if f == "family"
        ));
        let mut v: Value = serde_json::to_value(&ir).unwrap();
        v.as_object_mut().unwrap().remove("asserted_benefit");
        match parse_extraction("p12", &v.to_string(), None) {
            Err(BackendError::ExtractionFailure { field, .. }) => assert_eq!(field.as_deref(), Some("asserted_benefit")),
            other => panic!("{other:?}"),
        }
    }

    struct Flaky {
        failures: u32,
        calls: AtomicU32,
        active: AtomicUsize,
        peak: AtomicUsize,
    }

    impl ChatTransport for Flaky {
        fn complete(&self, _: &RequestKey, _: &ChatRequest) -> Result<Value, TransportError> {
            let now = self.active.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(Duration::from_millis(5));
            self.active.fetch_sub(1, Ordering::SeqCst);
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                Err(TransportError::from_status(503, "busy"))
            } else {
                Ok(json!({"choices": [{"message": {"content": "Label: Neutral"}}]}))
            }
        }
    }

    fn flaky(failures: u32) -> Arc<Flaky> {
        Arc::new(Flaky {
            failures,
            calls: AtomicU32::new(0),
            active: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        })
    }

    struct Shared(Arc<Flaky>);
    impl ChatTransport for Shared {
        fn complete(&self, k: &RequestKey, r: &ChatRequest) -> Result<Value, TransportError> {
            self.0.complete(k, r)
        }
    }

    fn config(max_retries: u32, max_in_flight: usize) -> BackendConfig {
        BackendConfig {
            max_retries,
            max_in_flight,
            backoff_initial_ms: 1,
            model_name: Some("test".into()),
            ..BackendConfig::default()
        }
    }

    #[test]
    fn retries_then_succeeds_or_exhausts() {
        let item = fixtures::problem_12();
        let t = flaky(2);
        let b = LlmBackend::new(Box::new(Shared(t.clone())), config(3, 1));
        assert_eq!(b.run_baseline(&item, BaselineMode::AgnosticDirect).unwrap().0, Verdict::Neutral);
        assert_eq!(t.calls.load(Ordering::SeqCst), 3);

        let t = flaky(10);
        let b = LlmBackend::new(Box::new(Shared(t.clone())), config(2, 1));
        let err = b.run_baseline(&item, BaselineMode::AgnosticDirect).unwrap_err();
        assert!(err.is_exhaustion(), "{err}");
        assert_eq!(t.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn in_flight_budget_is_respected() {
        let t = flaky(0);
        let b = LlmBackend::new(Box::new(Shared(t.clone())), config(0, 2));
        let item = fixtures::problem_12();
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| b.run_baseline(&item, BaselineMode::AgnosticDirect).unwrap());
            }
        });
        assert!(t.peak.load(Ordering::SeqCst) <= 2);
        assert!(b.peak_in_flight() <= 2);
    }
}
