use serde::{Deserialize, Serialize};

use crate::oracle::{PatchOracle, Target};
use crate::sandbox::{ExecutionResult, StatusKind};

/// Limits on one pipeline run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budgets {
    /// Maximum LLM calls (M), distillation included.
    pub max_calls: u32,
    /// Maximum enhancement iterations (N).
    pub max_iterations: u32,
    /// Maximum self-review rounds.
    pub review_cap: u32,
    /// Consecutive identical errors tolerated before giving up.
    pub repair_cap: u32,
    /// Extra attempts after a response fails format validation.
    pub format_retries: u32,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            max_calls: 25,
            max_iterations: 5,
            review_cap: 3,
            repair_cap: 3,
            format_retries: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Enhance,
    SelfReview,
    Repair,
    TerminateConsistent,
    TerminateBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrchestratorState {
    pub oracle: PatchOracle,
    /// LLM calls used (q).
    pub q: u32,
    /// Call limit (M).
    pub m: u32,
    /// Enhancement iterations used.
    pub iter: u32,
    /// Enhancement limit (N).
    pub n: u32,
    pub review_round: u32,
    pub last_result: Option<ExecutionResult>,
}

/// Chooses what follows the last execution.
pub fn next_action(state: &OrchestratorState) -> Action {
    if state.q >= state.m {
        return Action::TerminateBudget;
    }
    let Some(result) = &state.last_result else {
        return Action::Repair;
    };
    match result.status {
        StatusKind::NoViolation if state.iter >= state.n => Action::TerminateConsistent,
        StatusKind::NoViolation => Action::Enhance,
        StatusKind::AssertionViolation(Target::Pre) => Action::Repair,
        StatusKind::AssertionViolation(Target::Post | Target::Cross) => Action::SelfReview,
        StatusKind::SyntaxError | StatusKind::RuntimeError | StatusKind::Timeout => Action::Repair,
    }
}
