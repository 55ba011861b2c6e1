//! The hand-written transition table and the state it is checked against.

use patchsentry_core::oracle::{PatchOracle, Target};
use patchsentry_core::orchestrator::{next_action, Action, OrchestratorState};
use patchsentry_core::sandbox::{ExecutionResult, StatusKind};

use super::{fixture, SCALE_ORACLE};

pub const CELLS: usize = 7 * 2 * 2;

fn parse_status(s: &str) -> StatusKind {
    match s {
        "NoViolation" => StatusKind::NoViolation,
        "SyntaxError" => StatusKind::SyntaxError,
        "RuntimeError" => StatusKind::RuntimeError,
        "Timeout" => StatusKind::Timeout,
        other => {
            let tag = other
                .strip_prefix("AssertionViolation(")
                .and_then(|t| t.strip_suffix(')'))
                .unwrap_or_else(|| panic!("unknown status {other}"));
            StatusKind::AssertionViolation(Target::from_tag(tag).unwrap())
        }
    }
}

fn parse_action(s: &str) -> Action {
    match s {
        "Enhance" => Action::Enhance,
        "SelfReview" => Action::SelfReview,
        "Repair" => Action::Repair,
        "TerminateConsistent" => Action::TerminateConsistent,
        "TerminateBudget" => Action::TerminateBudget,
        other => panic!("unknown action {other}"),
    }
}

fn result_with(status: StatusKind) -> ExecutionResult {
    ExecutionResult {
        status,
        message: String::new(),
        stdout: String::new(),
        stderr: String::new(),
        assertion_records: Vec::new(),
        duration_secs: 0.0,
        report_problem: None,
    }
}

fn state(status: StatusKind, iter_at_limit: bool, q_at_limit: bool) -> OrchestratorState {
    let (n, m) = (5, 25);
    OrchestratorState {
        oracle: PatchOracle::parse(SCALE_ORACLE, 0).unwrap(),
        q: if q_at_limit { m } else { 7 },
        m,
        iter: if iter_at_limit { n } else { 2 },
        n,
        review_round: 0,
        last_result: Some(result_with(status)),
    }
}

/// (cells compared, mismatching rows).
pub fn compare_transition_table() -> (usize, Vec<String>) {
    let text = std::fs::read_to_string(fixture("orchestrator/transition_table.tsv")).unwrap();
    let mut cells = 0;
    let mut mismatches = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let cols: Vec<&str> = line.split('\t').collect();
        let expected = parse_action(cols[3]);
        let got = next_action(&state(parse_status(cols[0]), cols[1] == "eq", cols[2] == "eq"));
        if got != expected {
            mismatches.push(format!("{line}: got {got:?}"));
        }
        cells += 1;
    }
    (cells, mismatches)
}
