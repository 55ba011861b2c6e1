use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ingestion::{FilterReason, RepoId};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Consistent,
    Inconsistent,
    Inconclusive,
}

impl Verdict {
    /// Process exit code for this verdict.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Consistent => 0,
            Verdict::Inconsistent => 2,
            Verdict::Inconclusive => 3,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Why the run stopped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    /// Self-review confirmed at least one failure.
    TruePositive,
    /// The enhancement limit was reached with every execution clean.
    IterationsExhausted,
    BudgetExhausted,
    ReviewCapReached,
    /// The same error kept coming back after repair.
    UnresolvableError { signature: String },
    FormatRetriesExhausted { reasons: Vec<String> },
    /// The pull request is not a single-function code change.
    NotTarget { reason: FilterReason },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warning {
    pub assertion_index: usize,
    pub assertion_message: String,
    pub justification: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetSummary {
    pub llm_calls: u32,
    pub max_llm_calls: u32,
    pub iterations: u32,
    pub max_iterations: u32,
    pub review_rounds: u32,
    pub repair_rounds: u32,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub schema_version: u32,
    pub repo: RepoId,
    pub pr: u64,
    pub verdict: Verdict,
    pub termination: Termination,
    pub warnings: Vec<Warning>,
    /// Revision of the final oracle, when one was inferred.
    pub oracle_revision: Option<u32>,
    pub budget_summary: BudgetSummary,
}

impl ValidationReport {
    /// Human-readable summary.
    pub fn render_text(&self) -> String {
        let mut out = format!("{} #{}: {}\n", self.repo, self.pr, self.verdict);
        let reason = match &self.termination {
            Termination::TruePositive => "self-review confirmed an inconsistency".to_string(),
            Termination::IterationsExhausted => "no inconsistency found within the enhancement limit".to_string(),
            Termination::BudgetExhausted => "LLM call budget exhausted".to_string(),
            Termination::ReviewCapReached => "review limit reached with unresolved failures".to_string(),
            Termination::UnresolvableError { signature } => format!("error persisted after repair: {signature}"),
            Termination::FormatRetriesExhausted { reasons } => {
                format!("no usable model response: {}", reasons.join("; "))
            }
            Termination::NotTarget { reason } => format!("pull request skipped ({reason:?})"),
        };
        out.push_str(&format!("  {reason}\n"));
        for w in &self.warnings {
            out.push_str(&format!(
                "  warning (assertion {}): {}\n    {}\n",
                w.assertion_index,
                w.assertion_message,
                w.justification.replace('\n', "\n    ")
            ));
        }
        let b = &self.budget_summary;
        out.push_str(&format!(
            "  oracle revision: {}; LLM calls {}/{}; enhancement iterations {}/{}; tokens {} in / {} out\n",
            self.oracle_revision.map_or("-".to_string(), |r| r.to_string()),
            b.llm_calls,
            b.max_llm_calls,
            b.iterations,
            b.max_iterations,
            b.input_tokens,
            b.output_tokens
        ));
        out
    }
}
