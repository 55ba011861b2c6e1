//! Helpers shared by the integration test targets.
#![allow(dead_code)]

pub mod adequacy;
pub mod budget;
pub mod builder;
pub mod bundles;
pub mod filter;
pub mod table;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::Duration;

use patchsentry_core::context::CodeContext;
use patchsentry_core::ingestion::{DistillOptions, NlArtifacts, PullRequest, RepoId};
use patchsentry_core::llm::{
    render_oracle_response, render_review_response, AssertionVerdict, Gateway, GatewaySettings, Mode, PromptTemplates,
    ReviewVerdict, ScriptedBackend,
};
use patchsentry_core::oracle::{OracleEdit, PatchOracle};
use patchsentry_core::orchestrator::{Budgets, Pipeline, PipelineError, RunRecord};
use patchsentry_core::sandbox::{default_interpreter, RawOutcome, RecordedExecution, StubSandbox, SubprocessSandbox};
use serde_json::Value;

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn bundles_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../bundles")
}

/// Raw-mode sandbox with site initialization skipped for fast startup.
pub fn python() -> SubprocessSandbox {
    SubprocessSandbox::new(default_interpreter()).with_interpreter_args(["-S"])
}

/// Runs the stdlib-based mutant enumerator.
pub fn enumerate(source: &Path, inputs: Option<&Path>) -> Value {
    let mut cmd = Command::new(default_interpreter());
    cmd.arg(fixture("adequacy/mutant_enumerator.py")).arg(source);
    if let Some(p) = inputs {
        cmd.arg(p);
    }
    let out = cmd.output().expect("enumerator starts");
    assert!(
        out.status.success(),
        "enumerator failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("enumerator prints json")
}

pub fn scale_source() -> String {
    std::fs::read_to_string(fixture("adequacy/scale.py")).unwrap()
}

/// All inputs for `scale`, including ones the original rejects.
pub fn scale_inputs() -> Vec<Vec<i64>> {
    let spec: Value = serde_json::from_str(&std::fs::read_to_string(fixture("adequacy/scale_inputs.json")).unwrap()).unwrap();
    serde_json::from_value(spec["inputs"].clone()).unwrap()
}

/// Context with the same source on both sides, so mutants replace only
/// the post-patch copy.
pub fn scale_context() -> CodeContext {
    let src = scale_source();
    CodeContext {
        qualname: "scale".into(),
        pre_function: src.clone(),
        post_function: src,
        internal_deps: Vec::new(),
        external_deps: Vec::new(),
        enclosing_class: None,
    }
}

const OBSERVE: &str = "def observe(fn, *args):
    try:
        return (\"ok\", repr(fn(*args)))
    except Exception as e:
        return (\"raise\", type(e).__name__, str(e))
";

fn args(input: &[i64]) -> String {
    input.iter().map(i64::to_string).collect::<Vec<_>>().join(", ")
}

/// One cross assertion per input comparing everything observable.
pub fn output_sensitive_oracle(inputs: &[Vec<i64>]) -> PatchOracle {
    let mut t = format!("{OBSERVE}\n# <<PRE_IMPL>>\n\n# <<POST_IMPL>>\n\n");
    for i in inputs {
        let a = args(i);
        t.push_str(&format!(
            "assert observe(post_scale, {a}) == observe(pre_scale, {a}), \"[PRESERVED BEHAVIORS] scale({a}) is unchanged\"\n"
        ));
    }
    PatchOracle::parse(&t, 0).expect("oracle parses")
}

/// Calls the post-patch function and checks nothing about the result.
pub fn call_only_oracle(inputs: &[Vec<i64>]) -> PatchOracle {
    let mut t = String::from("# <<PRE_IMPL>>\n\n# <<POST_IMPL>>\n\n");
    for i in inputs {
        t.push_str(&format!("post_scale({})\n", args(i)));
    }
    t.push_str("assert True, \"[PRESERVED BEHAVIORS] post_scale runs\"\n");
    PatchOracle::parse(&t, 0).expect("oracle parses")
}

/// Inputs on which the original `scale` returns normally.
pub fn non_raising_scale_inputs() -> Vec<Vec<i64>> {
    scale_inputs().into_iter().filter(|i| i[1] <= i[2]).collect()
}

// --- scripted pipeline runs ---------------------------------------------

pub const SCALE_ORACLE: &str = "# <<PRE_IMPL>>

# <<POST_IMPL>>

assert post_scale(5, 0, 10) == pre_scale(5, 0, 10), \"[PRESERVED BEHAVIORS] midpoint is unchanged\"
assert post_scale(15, 0, 10) == 100, \"[CHANGED BEHAVIORS] [POST] values above the range clamp to 100\"
";

pub fn oracle_text() -> String {
    let o = PatchOracle::parse(SCALE_ORACLE, 0).unwrap();
    render_oracle_response(&o, "Scale maps the range onto 0..100.", &["clamping is preserved"])
}

pub fn garbage_text() -> String {
    "I could not come up with a comparison program.".to_string()
}

pub fn review_text(verdict: ReviewVerdict, edits: &[OracleEdit]) -> String {
    let justification = match verdict {
        ReviewVerdict::TruePositive => "The patch mishandles values above the range.",
        ReviewVerdict::FalsePositive => "The assertion expects the wrong constant.",
    };
    render_review_response(
        &[AssertionVerdict {
            index: Some(1),
            verdict,
            justification: justification.into(),
        }],
        edits,
    )
}

pub fn fixing_edit() -> OracleEdit {
    OracleEdit::Replace {
        index: 1,
        code: "assert post_scale(15, 0, 10) >= 0, \"[CHANGED BEHAVIORS] [POST] values above the range stay positive\"".into(),
    }
}

fn outcome(exit: Option<i32>, stderr: &str, timed_out: bool) -> RawOutcome {
    RawOutcome {
        exit_code: exit,
        stdout: String::new(),
        stderr: stderr.into(),
        timed_out,
        duration_secs: 0.1,
    }
}

pub fn ok() -> RawOutcome {
    outcome(Some(0), "", false)
}

/// Assertion failure whose message carries `tag`, e.g. `[POST]`.
pub fn violation(tag: &str) -> RawOutcome {
    outcome(
        Some(1),
        &format!("Traceback (most recent call last):\n  File \"program.py\", line 9\nAssertionError: [CHANGED BEHAVIORS] {tag} clamps"),
        false,
    )
}

pub fn syntax_error() -> RawOutcome {
    outcome(Some(1), "  File \"program.py\", line 3\nSyntaxError: invalid syntax", false)
}

pub fn runtime_error() -> RawOutcome {
    outcome(Some(1), "Traceback (most recent call last):\nNameError: name 'helper' is not defined", false)
}

pub fn timeout() -> RawOutcome {
    outcome(None, "", true)
}

pub fn scale_pr() -> PullRequest {
    PullRequest {
        repo_id: "acme/ranges".parse::<RepoId>().unwrap(),
        number: 7,
        title: "Clamp scale() to its range".into(),
        description: "Values outside the range now clamp to 0 or 100.".into(),
        comments: Vec::new(),
        linked_issues: Vec::new(),
        base_commit: String::new(),
        head_commit: String::new(),
        diff: Vec::new(),
    }
}

pub fn scale_nl() -> NlArtifacts {
    let pr = scale_pr();
    NlArtifacts {
        title: pr.title,
        description: pr.description,
        ..Default::default()
    }
}

pub struct Scripted {
    pub result: Result<RunRecord, PipelineError>,
    pub calls: u32,
    pub unused_responses: usize,
    pub executions: usize,
}

/// Runs the inference loop on the `scale` context against scripted model
/// responses and canned runner outcomes.
pub fn scripted_run(budgets: Budgets, responses: Vec<String>, outcomes: Vec<RawOutcome>) -> Scripted {
    let backend = Arc::new(ScriptedBackend::new(responses));
    let gateway = Arc::new(Gateway::new(backend.clone(), GatewaySettings::default()));
    let session = gateway.live_session(Mode::Live, budgets.max_calls);
    let entries = outcomes
        .into_iter()
        .map(|outcome| RecordedExecution {
            program_sha256: String::new(),
            outcome,
        })
        .collect();
    let sandbox = StubSandbox::new(entries);
    let templates = PromptTemplates::embedded();
    let pipeline = Pipeline {
        session: &session,
        templates: &templates,
        sandbox: &sandbox,
        budgets,
        timeout: Duration::from_secs(5),
        distill: DistillOptions::default(),
    };
    let result = pipeline.run(&scale_pr(), &scale_nl(), &scale_context());
    Scripted {
        result,
        calls: session.calls(),
        unused_responses: backend.remaining(),
        executions: sandbox.consumed(),
    }
}
