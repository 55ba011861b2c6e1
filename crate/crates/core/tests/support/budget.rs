//! Randomized scripted runs for the budget-safety property.

use patchsentry_core::llm::ReviewVerdict;
use patchsentry_core::oracle::OracleEdit;
use patchsentry_core::orchestrator::{Budgets, RunEvent, Verdict};
use patchsentry_core::sandbox::{RawOutcome, StatusKind};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use super::*;

#[derive(Debug, Clone)]
pub struct BudgetCase {
    pub budgets: Budgets,
    pub responses: Vec<u8>,
    pub outcomes: Vec<u8>,
}

fn response(kind: u8) -> String {
    match kind % 6 {
        0 | 1 => oracle_text(),
        2 => garbage_text(),
        3 => review_text(ReviewVerdict::TruePositive, &[]),
        4 => review_text(ReviewVerdict::FalsePositive, &[fixing_edit()]),
        _ => review_text(ReviewVerdict::FalsePositive, &[OracleEdit::Remove { index: 40 }]),
    }
}

fn raw(kind: u8) -> RawOutcome {
    match kind % 7 {
        0 | 1 => ok(),
        2 => violation("[PRE]"),
        3 => violation("[POST]"),
        4 => violation(""),
        5 => runtime_error(),
        _ => [syntax_error(), timeout()][usize::from(kind / 7 % 2)].clone(),
    }
}

pub fn budget_case() -> impl Strategy<Value = BudgetCase> {
    (
        1u32..14,
        0u32..5,
        0u32..4,
        1u32..4,
        0u32..4,
        proptest::collection::vec(any::<u8>(), 14),
        proptest::collection::vec(any::<u8>(), 16),
    )
        .prop_map(|(m, n, review_cap, repair_cap, format_retries, responses, outcomes)| BudgetCase {
            budgets: Budgets {
                max_calls: m,
                max_iterations: n,
                review_cap,
                repair_cap,
                format_retries,
            },
            responses,
            outcomes,
        })
}

pub fn check_budget_case(case: BudgetCase) -> Result<(), TestCaseError> {
    let b = case.budgets;
    let s = scripted_run(
        b,
        case.responses.into_iter().map(response).collect(),
        case.outcomes.into_iter().map(raw).collect(),
    );
    let rec = s.result.as_ref().map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!(s.calls <= b.max_calls);
    prop_assert_eq!(rec.log.llm_calls(), s.calls as usize);
    prop_assert!(rec.log.enhancements() <= b.max_iterations as usize);
    prop_assert!(rec.report.budget_summary.iterations <= b.max_iterations);
    prop_assert!(rec.report.budget_summary.review_rounds <= b.review_cap);
    let terminated = matches!(rec.log.events.last(), Some(RunEvent::Terminated { .. }));
    prop_assert!(terminated);
    if rec.report.verdict == Verdict::Inconsistent {
        prop_assert!(rec.log.statuses().iter().any(|s| matches!(s, StatusKind::AssertionViolation(_))));
        let confirmed = rec.log.events.iter().any(|e| {
            matches!(
                e,
                RunEvent::Reviewed {
                    verdict: ReviewVerdict::TruePositive,
                    ..
                }
            )
        });
        prop_assert!(confirmed);
    }
    Ok(())
}

/// Runs the property over `cases` random cases outside the test macro.
pub fn run_budget_property(cases: u32) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases,
        ..Config::default()
    });
    runner.run(&budget_case(), check_budget_case).map_err(|e| e.to_string())
}
