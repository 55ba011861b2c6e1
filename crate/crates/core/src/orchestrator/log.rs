use serde::{Deserialize, Serialize};

use super::report::{Termination, Verdict};
use super::state::Action;
use crate::ingestion::FilterReason;
use crate::llm::{Phase, ReviewVerdict};
use crate::sandbox::StatusKind;

/// One line of the run log. Events carry no wall-clock data so that
/// replays reproduce the log byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum RunEvent {
    Filtered {
        accepted: bool,
        reason: FilterReason,
    },
    ContextExtracted {
        path: String,
        function: String,
    },
    LlmCall {
        phase: Phase,
        q: u32,
        input_tokens: u64,
        output_tokens: u64,
    },
    FormatRejected {
        phase: Phase,
        reasons: Vec<String>,
    },
    OracleAccepted {
        phase: Phase,
        revision: u32,
        assertions: usize,
    },
    BuildFailed {
        revision: u32,
        error: String,
    },
    Executed {
        execution: usize,
        revision: u32,
        status: StatusKind,
        message: String,
    },
    Transition {
        action: Action,
        status: StatusKind,
        q: u32,
        iter: u32,
        review_round: u32,
    },
    Reviewed {
        round: u32,
        verdict: ReviewVerdict,
        true_positives: Vec<usize>,
        edits: usize,
    },
    EditRejected {
        error: String,
    },
    Terminated {
        verdict: Verdict,
        termination: Termination,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub events: Vec<RunEvent>,
}

impl RunLog {
    pub fn push(&mut self, e: RunEvent) {
        self.events.push(e);
    }

    pub fn to_jsonl(&self) -> String {
        self.events
            .iter()
            .map(|e| serde_json::to_string(e).expect("events serialize") + "\n")
            .collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let events = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(Self { events })
    }

    /// Number of LLM calls recorded.
    pub fn llm_calls(&self) -> usize {
        self.events.iter().filter(|e| matches!(e, RunEvent::LlmCall { .. })).count()
    }

    /// Number of enhancement actions taken.
    pub fn enhancements(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, RunEvent::Transition { action: Action::Enhance, .. }))
            .count()
    }

    pub fn statuses(&self) -> Vec<StatusKind> {
        self.events
            .iter()
            .filter_map(|e| match e {
                RunEvent::Executed { status, .. } => Some(*status),
                _ => None,
            })
            .collect()
    }

    /// Token totals `(input, output)` over all recorded calls.
    pub fn tokens(&self) -> (u64, u64) {
        self.events.iter().fold((0, 0), |(i, o), e| match e {
            RunEvent::LlmCall {
                input_tokens,
                output_tokens,
                ..
            } => (i + input_tokens, o + output_tokens),
            _ => (i, o),
        })
    }
}
