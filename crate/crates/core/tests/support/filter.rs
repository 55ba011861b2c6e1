//! The hand-labelled filter cases and diff round-tripping.

use std::collections::BTreeMap;

use patchsentry_core::ingestion::{apply, is_target_pr, parse_unified_diff, FilterReason, PullRequest, Snapshot};
use serde::Deserialize;

use super::fixture;

#[derive(Debug, Deserialize)]
pub struct FilterFixtures {
    pub base: BTreeMap<String, String>,
    pub case: Vec<FilterCase>,
}

#[derive(Debug, Deserialize)]
pub struct FilterCase {
    pub name: String,
    pub accepted: bool,
    pub reason: FilterReason,
    pub changes: BTreeMap<String, String>,
}

pub fn load_filter_cases() -> FilterFixtures {
    toml::from_str(&std::fs::read_to_string(fixture("filter/cases.toml")).unwrap()).unwrap()
}

fn file_diff(path: &str, pre: Option<&str>, post: &str) -> String {
    let old_header = if pre.is_some() { format!("a/{path}") } else { "/dev/null".to_string() };
    similar::TextDiff::from_lines(pre.unwrap_or(""), post)
        .unified_diff()
        .context_radius(3)
        .header(&old_header, &format!("b/{path}"))
        .to_string()
}

pub fn pull_request(diff: &str) -> PullRequest {
    PullRequest {
        repo_id: "acme/durations".parse().unwrap(),
        number: 1,
        title: String::new(),
        description: String::new(),
        comments: Vec::new(),
        linked_issues: Vec::new(),
        base_commit: String::new(),
        head_commit: String::new(),
        diff: parse_unified_diff(diff).unwrap(),
    }
}

/// (pre snapshot, post snapshot, unified diff) of a filter case.
pub fn materialize(base: &BTreeMap<String, String>, case: &FilterCase) -> (Snapshot, Snapshot, String) {
    let mut post = base.clone();
    let mut diff = String::new();
    for (path, text) in &case.changes {
        diff.push_str(&file_diff(path, base.get(path).map(String::as_str), text));
        post.insert(path.clone(), text.clone());
    }
    let snap = |m: &BTreeMap<String, String>| Snapshot::from_files(m.iter().map(|(k, v)| (k.as_str(), v.as_str())));
    (snap(base), snap(&post), diff)
}

/// Labels the filter disagrees with.
pub fn label_mismatches(fixtures: &FilterFixtures) -> Vec<String> {
    let mut mismatches = Vec::new();
    for case in &fixtures.case {
        let (pre, post, diff) = materialize(&fixtures.base, case);
        let got = is_target_pr(&pull_request(&diff), &pre, &post).unwrap();
        if got != (case.accepted, case.reason) {
            mismatches.push(format!("{}: expected {:?}, got {got:?}", case.name, (case.accepted, case.reason)));
        }
    }
    mismatches
}

/// Applies every file diff to `pre` and compares with `post` byte for byte.
pub fn round_trip(pre: &Snapshot, post: &Snapshot, diff: &str) -> Result<(), String> {
    for fd in parse_unified_diff(diff).map_err(|e| e.to_string())? {
        let before = pre.get(fd.pre_path()).unwrap_or("");
        let after = apply(before, &fd).map_err(|e| format!("{}: {e}", fd.path))?;
        if Some(after.as_str()) != post.get(&fd.path) {
            return Err(format!("{}: applied diff differs from the post file", fd.path));
        }
    }
    Ok(())
}
