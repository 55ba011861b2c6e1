//! Mutation-score checks against the stdlib-based enumerator.

use std::collections::{BTreeMap, HashMap};
use std::sync::{LazyLock, Mutex};
use std::time::Duration;

use patchsentry_core::adequacy::{generate_mutants, mutation_score, Mutant, ScoreReport};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use serde_json::Value;

use super::*;

pub const TIMEOUT: Duration = Duration::from_secs(10);

/// Crashing mutants per operator on `inputs`, and the total mutant count,
/// as computed by the enumerator.
pub fn enumerated_crashes(inputs: &[Vec<i64>]) -> (BTreeMap<String, u64>, usize) {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("inputs.json");
    std::fs::write(&spec, serde_json::json!({"function": "scale", "inputs": inputs}).to_string()).unwrap();
    let enumerated = enumerate(&fixture("adequacy/scale.py"), Some(&spec));
    let per: Vec<Value> = serde_json::from_value(enumerated["mutants"].clone()).unwrap();
    let mut crashes = BTreeMap::new();
    for m in &per {
        if m["crash"].as_bool().unwrap() {
            *crashes.entry(m["operator"].as_str().unwrap().to_string()).or_insert(0) += 1;
        }
    }
    (crashes, per.len())
}

pub fn score_output_sensitive() -> ScoreReport {
    let ctx = scale_context();
    let mutants = generate_mutants(&ctx.post_function).unwrap();
    mutation_score(&output_sensitive_oracle(&scale_inputs()), &ctx, &mutants, &python(), TIMEOUT).unwrap()
}

pub fn score_call_only(inputs: &[Vec<i64>]) -> ScoreReport {
    let ctx = scale_context();
    let mutants = generate_mutants(&ctx.post_function).unwrap();
    mutation_score(&call_only_oracle(inputs), &ctx, &mutants, &python(), TIMEOUT).unwrap()
}

/// Six inputs give 63 non-empty assertion subsets; scores are memoized per
/// subset so random pairs stay cheap.
const SUBSET_INPUTS: [[i64; 3]; 6] = [[5, 0, 10], [-3, 0, 10], [15, 0, 10], [4, 4, 4], [1, 5, 2], [2, 0, 7]];

static MUTANTS: LazyLock<Vec<Mutant>> = LazyLock::new(|| generate_mutants(&scale_source()).unwrap());
static SCORES: LazyLock<Mutex<HashMap<u8, ScoreReport>>> = LazyLock::new(Default::default);

pub fn subset_score(mask: u8) -> ScoreReport {
    if let Some(r) = SCORES.lock().unwrap().get(&mask) {
        return r.clone();
    }
    let inputs: Vec<Vec<i64>> = SUBSET_INPUTS
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, x)| x.to_vec())
        .collect();
    let report = mutation_score(&output_sensitive_oracle(&inputs), &scale_context(), &MUTANTS, &python(), TIMEOUT).unwrap();
    SCORES.lock().unwrap().insert(mask, report.clone());
    report
}

/// A random pair (subset, superset) of the assertion masks.
pub fn subset_pair() -> impl Strategy<Value = (u8, u8)> {
    (1u8..64, any::<u8>()).prop_map(|(big, pick)| {
        let mut small = big & pick;
        if small == 0 {
            small = big & big.wrapping_neg();
        }
        (small, big)
    })
}

pub fn check_monotone((small, big): (u8, u8)) -> Result<(), TestCaseError> {
    let (s, b) = (subset_score(small), subset_score(big));
    prop_assert!(s.score.unwrap() <= b.score.unwrap());
    for (k_small, k_big) in s.kill_vector().into_iter().zip(b.kill_vector()) {
        prop_assert!(!k_small || k_big);
    }
    Ok(())
}

pub fn run_monotonicity(cases: u32) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases,
        ..Config::default()
    });
    runner.run(&subset_pair(), check_monotone).map_err(|e| e.to_string())
}
