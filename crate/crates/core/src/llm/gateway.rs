use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, warn};

use super::backend::{BackendError, CompletionRequest, LlmBackend};
use super::prompt::Prompt;
use super::transcript::{Transcript, TranscriptEntry};

pub const DEFAULT_TEMPERATURE: f32 = 0.7;
pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 16_384;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Call the backend.
    Live,
    /// Call the backend and keep the transcript for later replay.
    Record,
    /// Serve responses from a transcript; no backend is contacted.
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewaySettings {
    pub temperature: f32,
    pub max_output_tokens: u32,
    /// Extra attempts after a retryable backend failure.
    pub max_retries: u32,
    pub retry_backoff: Duration,
}

impl Default for GatewaySettings {
    fn default() -> Self {
        Self {
            temperature: DEFAULT_TEMPERATURE,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            max_retries: 2,
            retry_backoff: Duration::from_millis(500),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub backend_id: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GatewayError {
    #[error("LLM call budget exhausted ({used}/{max})")]
    BudgetExhausted { used: u32, max: u32 },
    #[error("backend failed: {0}")]
    Backend(#[from] BackendError),
    #[error("transcript entry {index} was recorded for prompt {expected} but the run asked {actual}")]
    TranscriptMismatch { index: usize, expected: String, actual: String },
    #[error("transcript has no entry {index}")]
    TranscriptExhausted { index: usize },
    #[error("no backend configured for {0:?} mode")]
    NoBackend(Mode),
}

/// Shared access to a backend. Safe to use from concurrent pipelines; each
/// pipeline opens its own [`LlmSession`].
pub struct Gateway {
    backend: Option<Arc<dyn LlmBackend>>,
    settings: GatewaySettings,
}

impl Gateway {
    pub fn new(backend: Arc<dyn LlmBackend>, settings: GatewaySettings) -> Self {
        Self {
            backend: Some(backend),
            settings,
        }
    }

    /// A gateway usable only for replay sessions.
    pub fn replay_only() -> Self {
        Self {
            backend: None,
            settings: GatewaySettings::default(),
        }
    }

    pub fn settings(&self) -> &GatewaySettings {
        &self.settings
    }

    pub fn backend_id(&self) -> Option<&str> {
        self.backend.as_deref().map(|b| b.id())
    }

    pub fn live_session(self: &Arc<Self>, mode: Mode, max_calls: u32) -> LlmSession {
        LlmSession::new(self.clone(), mode, max_calls, Vec::new())
    }

    pub fn replay_session(self: &Arc<Self>, transcript: Transcript, max_calls: u32) -> LlmSession {
        LlmSession::new(self.clone(), Mode::Replay, max_calls, transcript.entries)
    }
}

/// Call counter with a hard cap.
#[derive(Debug)]
pub struct Budget {
    used: AtomicU32,
    max: u32,
}

impl Budget {
    pub fn new(max: u32) -> Self {
        Self {
            used: AtomicU32::new(0),
            max,
        }
    }

    pub fn used(&self) -> u32 {
        self.used.load(Ordering::SeqCst)
    }

    pub fn max(&self) -> u32 {
        self.max
    }

    pub fn exhausted(&self) -> bool {
        self.used() >= self.max
    }

    fn reserve(&self) -> Result<(), GatewayError> {
        self.used
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |u| (u < self.max).then_some(u + 1))
            .map(|_| ())
            .map_err(|used| GatewayError::BudgetExhausted { used, max: self.max })
    }

    fn release(&self) {
        self.used.fetch_sub(1, Ordering::SeqCst);
    }
}

/// Per-pipeline view of the gateway: budget, token totals and transcript.
pub struct LlmSession {
    gateway: Arc<Gateway>,
    mode: Mode,
    budget: Budget,
    replay: Vec<TranscriptEntry>,
    cursor: Mutex<usize>,
    recorded: Mutex<Vec<TranscriptEntry>>,
    input_tokens: AtomicU64,
    output_tokens: AtomicU64,
}

impl LlmSession {
    fn new(gateway: Arc<Gateway>, mode: Mode, max_calls: u32, replay: Vec<TranscriptEntry>) -> Self {
        Self {
            gateway,
            mode,
            budget: Budget::new(max_calls),
            replay,
            cursor: Mutex::new(0),
            recorded: Mutex::new(Vec::new()),
            input_tokens: AtomicU64::new(0),
            output_tokens: AtomicU64::new(0),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn budget(&self) -> &Budget {
        &self.budget
    }

    pub fn calls(&self) -> u32 {
        self.budget.used()
    }

    /// Tokens `(input, output)` consumed so far.
    pub fn tokens(&self) -> (u64, u64) {
        (
            self.input_tokens.load(Ordering::SeqCst),
            self.output_tokens.load(Ordering::SeqCst),
        )
    }

    /// Every successful call of this session, in order.
    pub fn transcript(&self) -> Transcript {
        Transcript {
            entries: self.recorded.lock().unwrap_or_else(|p| p.into_inner()).clone(),
        }
    }

    /// Makes exactly one call, charged to the budget. Failed calls are not
    /// charged.
    pub fn complete(&self, prompt: &Prompt) -> Result<LlmResponse, GatewayError> {
        self.budget.reserve()?;
        let hash = prompt.sha256();
        let result = match self.mode {
            Mode::Replay => self.replay_next(&hash),
            Mode::Live | Mode::Record => self.call_backend(prompt),
        };
        match result {
            Ok(resp) => {
                self.input_tokens.fetch_add(resp.input_tokens, Ordering::SeqCst);
                self.output_tokens.fetch_add(resp.output_tokens, Ordering::SeqCst);
                self.recorded
                    .lock()
                    .unwrap_or_else(|p| p.into_inner())
                    .push(TranscriptEntry {
                        prompt_sha256: hash,
                        response: resp.text.clone(),
                        input_tokens: resp.input_tokens,
                        output_tokens: resp.output_tokens,
                    });
                debug!(phase = ?prompt.phase, calls = self.budget.used(), "llm call");
                Ok(resp)
            }
            Err(e) => {
                self.budget.release();
                Err(e)
            }
        }
    }

    fn replay_next(&self, hash: &str) -> Result<LlmResponse, GatewayError> {
        let mut cursor = self.cursor.lock().unwrap_or_else(|p| p.into_inner());
        let index = *cursor;
        let entry = self
            .replay
            .get(index)
            .ok_or(GatewayError::TranscriptExhausted { index })?;
        if entry.prompt_sha256 != hash {
            return Err(GatewayError::TranscriptMismatch {
                index,
                expected: entry.prompt_sha256.clone(),
                actual: hash.to_string(),
            });
        }
        *cursor += 1;
        Ok(LlmResponse {
            text: entry.response.clone(),
            input_tokens: entry.input_tokens,
            output_tokens: entry.output_tokens,
            backend_id: "replay".to_string(),
        })
    }

    fn call_backend(&self, prompt: &Prompt) -> Result<LlmResponse, GatewayError> {
        let backend = self.gateway.backend.as_ref().ok_or(GatewayError::NoBackend(self.mode))?;
        let settings = &self.gateway.settings;
        let req = CompletionRequest {
            system: prompt.system().to_string(),
            user: prompt.user(),
            temperature: settings.temperature,
            max_output_tokens: settings.max_output_tokens,
        };
        let mut attempt = 0;
        loop {
            match backend.complete(&req) {
                Ok(reply) if reply.text.is_empty() => return Err(BackendError::Empty.into()),
                Ok(reply) => {
                    return Ok(LlmResponse {
                        text: reply.text,
                        input_tokens: reply.input_tokens,
                        output_tokens: reply.output_tokens,
                        backend_id: backend.id().to_string(),
                    })
                }
                Err(e) if e.is_retryable() && attempt < settings.max_retries => {
                    attempt += 1;
                    warn!(error = %e, attempt, "retrying backend call");
                    std::thread::sleep(settings.retry_backoff * attempt);
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::backend::ScriptedBackend;
    use crate::llm::prompt::Phase;

    fn prompt(n: usize) -> Prompt {
        Prompt {
            phase: Phase::Inference,
            role_definition: "role".into(),
            guidelines: "g".into(),
            contextual_information: format!("ctx {n}"),
            output_formatting: "fmt".into(),
        }
    }

    fn settings() -> GatewaySettings {
        GatewaySettings {
            retry_backoff: Duration::ZERO,
            ..Default::default()
        }
    }

    fn recorded(n: usize) -> Transcript {
        let gw = Arc::new(Gateway::new(
            Arc::new(ScriptedBackend::new((0..n).map(|i| format!("answer {i}")))),
            settings(),
        ));
        let s = gw.live_session(Mode::Record, 10);
        for i in 0..n {
            s.complete(&prompt(i)).unwrap();
        }
        s.transcript()
    }

    #[test]
    fn replay_returns_entries_in_order() {
        let t = recorded(3);
        let s = Arc::new(Gateway::replay_only()).replay_session(t.clone(), 10);
        for i in 0..3 {
            assert_eq!(s.complete(&prompt(i)).unwrap().text, format!("answer {i}"));
        }
        assert_eq!(s.calls(), 3);
        assert_eq!(s.tokens(), t.token_totals());
        assert_eq!(s.transcript(), t);
    }

    #[test]
    fn replay_rejects_a_different_prompt() {
        let s = Arc::new(Gateway::replay_only()).replay_session(recorded(2), 10);
        assert!(matches!(
            s.complete(&prompt(1)),
            Err(GatewayError::TranscriptMismatch { index: 0, .. })
        ));
        assert_eq!(s.calls(), 0);
    }

    #[test]
    fn replay_past_the_end() {
        let s = Arc::new(Gateway::replay_only()).replay_session(recorded(1), 10);
        s.complete(&prompt(0)).unwrap();
        assert_eq!(
            s.complete(&prompt(1)),
            Err(GatewayError::TranscriptExhausted { index: 1 })
        );
    }

    #[test]
    fn budget_blocks_before_the_backend() {
        let backend = Arc::new(ScriptedBackend::new(["a", "b", "c"]));
        let gw = Arc::new(Gateway::new(backend.clone(), settings()));
        let s = gw.live_session(Mode::Live, 2);
        s.complete(&prompt(0)).unwrap();
        s.complete(&prompt(1)).unwrap();
        assert_eq!(
            s.complete(&prompt(2)),
            Err(GatewayError::BudgetExhausted { used: 2, max: 2 })
        );
        assert_eq!(backend.remaining(), 1);
    }

    #[test]
    fn transient_failures_are_retried() {
        let backend = Arc::new(ScriptedBackend::with_results([
            Err(BackendError::Status { status: 502, body: String::new() }),
            Ok("fine".to_string()),
        ]));
        let s = Arc::new(Gateway::new(backend, settings())).live_session(Mode::Live, 5);
        assert_eq!(s.complete(&prompt(0)).unwrap().text, "fine");
        assert_eq!(s.calls(), 1);
    }

    #[test]
    fn permanent_failure_is_not_charged() {
        let backend = Arc::new(ScriptedBackend::with_results([Err(BackendError::Status {
            status: 400,
            body: "bad".into(),
        })]));
        let s = Arc::new(Gateway::new(backend, settings())).live_session(Mode::Live, 5);
        assert!(matches!(s.complete(&prompt(0)), Err(GatewayError::Backend(_))));
        assert_eq!(s.calls(), 0);
    }

    #[test]
    fn replay_gateway_refuses_live_calls() {
        let s = Arc::new(Gateway::replay_only()).live_session(Mode::Live, 5);
        assert_eq!(s.complete(&prompt(0)), Err(GatewayError::NoBackend(Mode::Live)));
    }
}
