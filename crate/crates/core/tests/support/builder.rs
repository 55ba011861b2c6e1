//! Builder fixtures: small packages before and after a patch, compared
//! against a reference that imports the real packages.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Duration;

use patchsentry_core::context::{extract_context, PackageMap};
use patchsentry_core::ingestion::{parse_unified_diff, Snapshot};
use patchsentry_core::oracle::{build_from_template, BuildError};
use patchsentry_core::sandbox::{default_interpreter, Sandbox};
use serde::Deserialize;
use serde_json::Value;

use super::{fixture, python};

pub const CATEGORIES: [&str; 5] = ["free_", "method_", "decorated_", "collide_", "relative_"];

#[derive(Debug, Deserialize)]
pub struct Case {
    pub description: String,
    path: String,
    function: String,
    receiver: Option<String>,
    #[serde(default)]
    receiver_args: Vec<Value>,
    pub inputs: Vec<Vec<Value>>,
    pre: BTreeMap<String, String>,
    post: BTreeMap<String, String>,
}

impl Case {
    fn post_files(&self) -> BTreeMap<String, String> {
        let mut files = self.pre.clone();
        files.extend(self.post.clone());
        files
    }

    fn module(&self) -> String {
        self.path.trim_end_matches(".py").replace('/', ".")
    }
}

pub fn cases() -> Vec<(String, Case)> {
    let dir = fixture("builder");
    let mut out: Vec<(String, Case)> = std::fs::read_dir(&dir)
        .unwrap()
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            let case = toml::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"));
            (name, case)
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

fn write_tree(root: &Path, files: &BTreeMap<String, String>) {
    for (rel, text) in files {
        let p = root.join(rel);
        std::fs::create_dir_all(p.parent().unwrap()).unwrap();
        std::fs::write(p, text).unwrap();
    }
}

fn reference(case: &Case, root: &Path) -> Value {
    let out = Command::new(default_interpreter())
        .arg(fixture("builder/observe_reference.py"))
        .arg(root)
        .arg(case.module())
        .arg(&case.function)
        .arg(case.receiver.as_deref().unwrap_or("-"))
        .arg(serde_json::to_string(&case.receiver_args).unwrap())
        .arg(serde_json::to_string(&case.inputs).unwrap())
        .env("PYTHONDONTWRITEBYTECODE", "1")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn observation_template(case: &Case, fname: &str) -> String {
    let call = |side: &str| match &case.receiver {
        None => format!("{side}_{fname}"),
        Some(r) => format!("(lambda *a: {side}_{fname}({side}_{r}(*_RARGS), *a))"),
    };
    format!(
        "def _observe(fn, args):
    try:
        return [\"ok\", repr(fn(*args))]
    except Exception as e:
        return [\"raise\", type(e).__name__, str(e)]

# <<PRE_IMPL>>

# <<POST_IMPL>>

import json as _json
_RARGS = _json.loads({rargs:?})
_INPUTS = _json.loads({inputs:?})
print(_json.dumps({{
    \"pre\": [_observe({pre}, a) for a in _INPUTS],
    \"post\": [_observe({post}, a) for a in _INPUTS],
}}))
",
        rargs = serde_json::to_string(&case.receiver_args).unwrap(),
        inputs = serde_json::to_string(&case.inputs).unwrap(),
        pre = call("pre"),
        post = call("post"),
    )
}

pub struct Outcome {
    pub parse_failure: bool,
    pub problem: Option<String>,
}

pub fn check(name: &str, case: &Case, work: &Path) -> Outcome {
    let fail = |problem: String| Outcome {
        parse_failure: false,
        problem: Some(format!("{name} ({}): {problem}", case.description)),
    };
    let post_files = case.post_files();
    let pre = Snapshot::from_files(case.pre.iter().map(|(k, v)| (k.as_str(), v.as_str())));
    let post = Snapshot::from_files(post_files.iter().map(|(k, v)| (k.as_str(), v.as_str())));
    let diff = similar::TextDiff::from_lines(&case.pre[&case.path], &post_files[&case.path])
        .unified_diff()
        .header(&format!("a/{}", case.path), &format!("b/{}", case.path))
        .to_string();
    let fd = &parse_unified_diff(&diff).unwrap()[0];
    let (locator, ctx) = match extract_context(&pre, &post, fd, &PackageMap::from_snapshot(&pre)) {
        Ok(found) => found,
        Err(e) => return fail(format!("context: {e}")),
    };
    if locator.name != case.function {
        return fail(format!("located {} instead of {}", locator.name, case.function));
    }
    let program = match build_from_template(&observation_template(case, ctx.function_name()), &ctx) {
        Ok(p) => p,
        Err(e) => {
            return Outcome {
                parse_failure: matches!(e, BuildError::ParseFailure(_)),
                ..fail(format!("build: {e}"))
            }
        }
    };

    let (pre_root, post_root) = (work.join("pre"), work.join("post"));
    write_tree(&pre_root, &case.pre);
    write_tree(&post_root, &post_files);
    let sandbox = python().with_python_path([pre_root.clone()]);
    let raw = sandbox.run(&program.source, Duration::from_secs(30)).unwrap();
    if raw.exit_code != Some(0) {
        return fail(format!("program failed: {}\n{}", raw.stderr, program.source));
    }
    let built: Value = serde_json::from_str(raw.stdout.trim()).unwrap();
    let expected_pre = reference(case, &pre_root);
    let expected_post = reference(case, &post_root);
    if built["pre"] != expected_pre {
        return fail(format!("pre differs: built {} vs reference {expected_pre}", built["pre"]));
    }
    if built["post"] != expected_post {
        return fail(format!("post differs: built {} vs reference {expected_post}", built["post"]));
    }
    if expected_pre == expected_post {
        return fail("fixture patch changes nothing observable".into());
    }
    Outcome {
        parse_failure: false,
        problem: None,
    }
}

pub struct CorpusResult {
    pub cases: usize,
    pub parse_failures: usize,
    /// Cases with fewer than ten inputs.
    pub thin: Vec<String>,
    pub problems: Vec<String>,
}

/// Builds and runs every fixture under `tmp`.
pub fn run_corpus(tmp: &Path) -> CorpusResult {
    let cases = cases();
    let mut out = CorpusResult {
        cases: cases.len(),
        parse_failures: 0,
        thin: Vec::new(),
        problems: Vec::new(),
    };
    for (name, case) in &cases {
        if case.inputs.len() < 10 {
            out.thin.push(name.clone());
        }
        let work: PathBuf = tmp.join(name);
        let outcome = check(name, case, &work);
        out.parse_failures += usize::from(outcome.parse_failure);
        out.problems.extend(outcome.problem);
    }
    out
}

/// Fixture count per category prefix.
pub fn category_counts() -> Vec<(&'static str, usize)> {
    let names: Vec<String> = cases().into_iter().map(|(n, _)| n).collect();
    CATEGORIES
        .iter()
        .map(|p| (*p, names.iter().filter(|x| x.starts_with(p)).count()))
        .collect()
}
