//! Regenerates the golden bundles under `bundles/`.
//!
//! Each bundle is produced by a real pipeline run in record mode against a
//! scripted model and a stub runner that prints canned runner reports, so
//! the transcript hashes and program hashes are the ones the pipeline
//! actually computes.
//!
//! ```text
//! cargo run -p patchsentry-core --example make_bundles -- [OUT_DIR]
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use patchsentry_core::bundle::{BundleManifest, GoldenBundle};
use patchsentry_core::ingestion::{parse_unified_diff, DistillOptions, IssueRef, PullRequest, RepoId, Snapshot};
use patchsentry_core::llm::{
    render_oracle_response, render_review_response, AssertionVerdict, Gateway, GatewaySettings, Mode, PromptTemplates,
    ReviewVerdict, ScriptedBackend,
};
use patchsentry_core::oracle::{OracleEdit, PatchOracle, Target};
use patchsentry_core::orchestrator::{Budgets, Pipeline};
use patchsentry_core::sandbox::report::ExceptionDescriptor;
use patchsentry_core::sandbox::{AssertionRecord, RawOutcome, RecordedExecution, RecordingSandbox, ShimReport, StubSandbox};

const URL_V0: &str = include_str!("../tests/fixtures/url_oracle_v0.py");
const URL_V1: &str = include_str!("../tests/fixtures/url_oracle_v1.py");

const URL_REVIEW: &str = "The failing assertion is caused by an inconsistency in the PR code: it lowercases the scheme for validation but performs a case-sensitive startswith check on the raw value. This is a bug in the patch (it should accept file:/// regardless of scheme case, or otherwise perform startswith on a consistent form). Conclusion: [BUG]";

struct Plan {
    pr: PullRequest,
    pre: Snapshot,
    post: Snapshot,
    budgets: Budgets,
    description: &'static str,
    responses: Vec<String>,
    outcomes: Vec<RawOutcome>,
}

fn main() {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../bundles"));
    fs::create_dir_all(&out).expect("create output dir");

    let templates = PromptTemplates::embedded();
    let mut manifest = String::new();
    for plan in [file_url(), all_green(), repair_then_review(), budget_exhausted()] {
        let name = format!("{}__{}", plan.pr.repo_id.slug(), plan.pr.number);
        let dir = out.join(&name);
        if dir.exists() {
            fs::remove_dir_all(&dir).expect("remove previous bundle");
        }
        record(&plan, &templates, &dir);
        manifest.push_str(&format!("{} {}\n", plan.pr.repo_id, plan.pr.number));
        println!("wrote {}", dir.display());
    }
    fs::write(out.join("batch.manifest"), manifest).expect("write manifest");
}

fn record(plan: &Plan, templates: &PromptTemplates, dir: &Path) {
    let backend = Arc::new(ScriptedBackend::new(plan.responses.clone()));
    let gateway = Arc::new(Gateway::new(backend.clone(), GatewaySettings::default()));
    let session = gateway.live_session(Mode::Record, plan.budgets.max_calls);
    let entries = plan
        .outcomes
        .iter()
        .map(|o| RecordedExecution {
            program_sha256: String::new(),
            outcome: o.clone(),
        })
        .collect();
    let stub = Arc::new(StubSandbox::new(entries));
    let sandbox = RecordingSandbox::new(stub.clone());
    let pipeline = Pipeline {
        session: &session,
        templates,
        sandbox: &sandbox,
        budgets: plan.budgets,
        timeout: patchsentry_core::sandbox::DEFAULT_TIMEOUT,
        distill: DistillOptions::default(),
    };
    let rec = pipeline
        .analyze(&plan.pr, &plan.pre, &plan.post, &patchsentry_core::context::PackageMap::from_snapshot(&plan.pre))
        .expect("scripted run succeeds");
    assert_eq!(backend.remaining(), 0, "{}: unused model responses", plan.pr.number);
    assert_eq!(stub.consumed(), plan.outcomes.len(), "{}: unused outcomes", plan.pr.number);

    let bundle = GoldenBundle {
        manifest: BundleManifest {
            description: plan.description.to_string(),
            budgets: plan.budgets,
            timeout_secs: patchsentry_core::sandbox::DEFAULT_TIMEOUT.as_secs(),
        },
        pr: plan.pr.clone(),
        pre: plan.pre.clone(),
        post: plan.post.clone(),
        transcript: session.transcript(),
        executions: sandbox.recorded(),
    };
    bundle.save(dir).expect("save bundle");
    let expected = dir.join("expected");
    fs::create_dir_all(&expected).expect("expected dir");
    let report = serde_json::to_string_pretty(&rec.report).expect("report json") + "\n";
    fs::write(expected.join("report.json"), report).expect("write report");
    println!("  {}: {:?}, {} calls", plan.pr.number, rec.report.verdict, rec.report.budget_summary.llm_calls);
}

fn unified(files: &[(&str, &str, &str)]) -> String {
    files
        .iter()
        .map(|(path, pre, post)| {
            similar::TextDiff::from_lines(*pre, *post)
                .unified_diff()
                .context_radius(3)
                .header(&format!("a/{path}"), &format!("b/{path}"))
                .to_string()
        })
        .collect()
}

fn pull_request(repo: &str, number: u64, title: &str, description: &str, diff: &str) -> PullRequest {
    PullRequest {
        repo_id: repo.parse::<RepoId>().expect("repo id"),
        number,
        title: title.into(),
        description: description.into(),
        comments: Vec::new(),
        linked_issues: Vec::new(),
        base_commit: format!("{:040x}", number * 7919),
        head_commit: format!("{:040x}", number * 104729),
        diff: parse_unified_diff(diff).expect("generated diff parses"),
    }
}

fn oracle_response(template: &str, reasoning: &str, hypotheses: &[&str]) -> String {
    let o = PatchOracle::parse(template, 0).expect("fixture oracle parses");
    render_oracle_response(&o, reasoning, hypotheses)
}

fn record_of(index: usize, target: Target, passed: bool, message: &str) -> AssertionRecord {
    AssertionRecord {
        index,
        passed,
        target,
        message: message.into(),
        failure_detail: (!passed).then(|| format!("AssertionError: {message}")),
    }
}

fn report_outcome(records: Vec<AssertionRecord>, exception: Option<ExceptionDescriptor>, stderr: &str) -> RawOutcome {
    let failed = records.iter().any(|r| !r.passed) || exception.is_some();
    RawOutcome {
        exit_code: Some(if failed { 1 } else { 0 }),
        stdout: ShimReport::new(records, exception).to_block(),
        stderr: stderr.into(),
        timed_out: false,
        duration_secs: 0.25,
    }
}

/// Every assertion of `template` passing.
fn green(template: &str) -> RawOutcome {
    let o = PatchOracle::parse(template, 0).expect("fixture oracle parses");
    let records = o
        .assertions
        .iter()
        .enumerate()
        .map(|(i, a)| record_of(i, a.target, true, &a.message))
        .collect();
    report_outcome(records, None, "")
}

// --- marshmallow #2800 -------------------------------------------------

const MM_INIT: &str = "from .exceptions import ValidationError\nfrom .validate import validation\n\n__all__ = [\"ValidationError\", \"validation\"]\n";
const MM_EXC: &str = "class MarshmallowError(Exception):\n    \"\"\"Base class for all marshmallow errors.\"\"\"\n\n\nclass ValidationError(MarshmallowError):\n    \"\"\"Raised when validation fails on a field or schema.\"\"\"\n\n    def __init__(self, message, field_name=\"_schema\"):\n        super().__init__(message)\n        self.messages = [message] if isinstance(message, str) else message\n        self.field_name = field_name\n";

const MM_VALIDATE_PRE: &str = r#""""Validation of URL field values."""
import re

from .exceptions import ValidationError

SCHEMES = {"http", "https", "ftps"}
URL_ERROR = "Not a valid URL."

_HOST = re.compile(
    r"^(?:[a-z0-9](?:[a-z0-9-]{0,61}[a-z0-9])?\.)+[a-z]{2,63}\.?$|^localhost$",
    re.IGNORECASE,
)


def _split(value):
    scheme, sep, rest = value.partition("://")
    if not sep:
        return None, value
    return scheme, rest


def validation(value):
    """Return ``value`` unchanged if it is a URL with a supported scheme."""
    if not value:
        raise ValidationError(URL_ERROR)
    scheme, rest = _split(value)
    if scheme is None or scheme.lower() not in SCHEMES:
        raise ValidationError(URL_ERROR)
    host = rest.split("/", 1)[0].split(":", 1)[0]
    if not _HOST.match(host):
        raise ValidationError(URL_ERROR)
    return value
"#;

const MM_VALIDATE_POST: &str = r#""""Validation of URL field values."""
import re

from .exceptions import ValidationError

SCHEMES = {"http", "https", "ftps"}
URL_ERROR = "Not a valid URL."

_HOST = re.compile(
    r"^(?:[a-z0-9](?:[a-z0-9-]{0,61}[a-z0-9])?\.)+[a-z]{2,63}\.?$|^localhost$",
    re.IGNORECASE,
)


def _split(value):
    scheme, sep, rest = value.partition("://")
    if not sep:
        return None, value
    return scheme, rest


def validation(value):
    """Return ``value`` unchanged if it is a URL with a supported scheme."""
    if not value:
        raise ValidationError(URL_ERROR)
    scheme, rest = _split(value)
    if scheme is not None and scheme.lower() == "file":
        # file URLs may omit the host
        if value.startswith("file://"):
            return value
        raise ValidationError(URL_ERROR)
    if scheme is None or scheme.lower() not in SCHEMES:
        raise ValidationError(URL_ERROR)
    host = rest.split("/", 1)[0].split(":", 1)[0]
    if not _HOST.match(host):
        raise ValidationError(URL_ERROR)
    return value
"#;

fn file_url() -> Plan {
    let path = "src/marshmallow/validate.py";
    let tree = |validate: &str| {
        Snapshot::from_files([
            ("README.rst", "marshmallow\n===========\n\nObject serialization.\n"),
            ("src/marshmallow/__init__.py", MM_INIT),
            ("src/marshmallow/exceptions.py", MM_EXC),
            (path, validate),
        ])
    };
    let mut pr = pull_request(
        "marshmallow-code/marshmallow",
        2800,
        "Fix: add file handling to URL fields",
        "Requires a modicum of special handling due to hostnames being optional.\n\nFixes #2249.",
        &unified(&[(path, MM_VALIDATE_PRE, MM_VALIDATE_POST)]),
    );
    pr.linked_issues = vec![IssueRef {
        number: 2249,
        title: "fields.Url does not accept file URLs without host".into(),
        body: "For example, \"file:///var/storage/somefile.zip\" raises a ValidationError.".into(),
    }];

    let v1 = PatchOracle::parse(URL_V1, 1).expect("v1 parses");
    let changed_msg = v1.assertions[3].message.clone();
    let mut records: Vec<AssertionRecord> = v1
        .assertions
        .iter()
        .enumerate()
        .map(|(i, a)| record_of(i, a.target, i != 3, &a.message))
        .collect();
    records[3].failure_detail = Some(format!(
        "File \"program.py\", line 235, in run_assertions\n    assert isinstance(pre_exc, ValidationError) and post_exc is None and post_res == upper_file, (\nAssertionError: {changed_msg}"
    ));
    let fail = report_outcome(records, None, &format!("AssertionError: {changed_msg}\n"));

    Plan {
        pr,
        pre: tree(MM_VALIDATE_PRE),
        post: tree(MM_VALIDATE_POST),
        budgets: Budgets::default(),
        description: "URL fields accept file URLs; the scheme check is case-sensitive, so FILE:// URLs are still rejected.",
        responses: vec![
            "## Distilled Context\nfields.Url rejects file URLs that have no host, e.g. \"file:///var/storage/somefile.zip\" raises ValidationError. Expected: file URLs without a host are accepted.".into(),
            oracle_response(
                URL_V0,
                "The patch adds a branch for the `file` scheme before the host check, so host-less file URLs are accepted while other URLs behave as before.",
                &["http URLs are accepted by both versions", "unsupported schemes are rejected by both versions", "file:/// URLs are rejected before and accepted after"],
            ),
            oracle_response(
                URL_V1,
                "URL schemes are case-insensitive, and the patch lowercases the scheme before comparing it, so upper-case FILE:// URLs should be accepted too.",
                &["FILE:/// URLs are rejected before and accepted after"],
            ),
            URL_REVIEW.into(),
        ],
        outcomes: vec![green(URL_V0), fail],
    }
}

// --- textkit ---------------------------------------------------------

const TK_INIT: &str = "from .slug import slugify\nfrom .stats import count_words\nfrom .wrap import truncate\n";

const TK_SLUG_PRE: &str = r#""""Slug helpers."""
import re
import unicodedata

_SEP = re.compile(r"[^a-z0-9]+")


def _ascii(text):
    return unicodedata.normalize("NFKD", text).encode("ascii", "ignore").decode("ascii")


def slugify(text, sep="-"):
    """Lower-case ``text`` and join its alphanumeric runs with ``sep``."""
    text = _ascii(text).lower()
    return _SEP.sub(sep, text)
"#;

const TK_SLUG_POST: &str = r#""""Slug helpers."""
import re
import unicodedata

_SEP = re.compile(r"[^a-z0-9]+")


def _ascii(text):
    return unicodedata.normalize("NFKD", text).encode("ascii", "ignore").decode("ascii")


def slugify(text, sep="-"):
    """Lower-case ``text`` and join its alphanumeric runs with ``sep``."""
    text = _ascii(text).lower()
    return _SEP.sub(sep, text).strip(sep)
"#;

const TK_WRAP_PRE: &str = r#""""Line shortening."""

ELLIPSIS = "..."


def truncate(text, width, suffix=ELLIPSIS):
    """Shorten ``text`` to ``width`` characters, marking the cut with ``suffix``."""
    if len(text) <= width:
        return text
    return text[:width] + suffix
"#;

const TK_WRAP_POST: &str = r#""""Line shortening."""

ELLIPSIS = "..."


def truncate(text, width, suffix=ELLIPSIS):
    """Shorten ``text`` to ``width`` characters, marking the cut with ``suffix``."""
    if len(text) <= width:
        return text
    if width <= len(suffix):
        return suffix[:width]
    return text[: width - len(suffix)] + suffix
"#;

const TK_STATS_PRE: &str = r#""""Text statistics."""


def count_words(text):
    """Number of words in ``text``."""
    if not text:
        return 0
    return len(text.split(" "))
"#;

const TK_STATS_POST: &str = r#""""Text statistics."""


def count_words(text):
    """Number of words in ``text``."""
    if not text:
        return 0
    return len(text.split())
"#;

fn textkit(slug: &str, wrap: &str, stats: &str) -> Snapshot {
    Snapshot::from_files([
        ("README.md", "# textkit\n\nSmall text utilities.\n"),
        ("textkit/__init__.py", TK_INIT),
        ("textkit/slug.py", slug),
        ("textkit/wrap.py", wrap),
        ("textkit/stats.py", stats),
    ])
}

const HEADER: &str = "# - call_impl: invokes pre- and post-patch versions and captures returned values and raised exceptions\n# - pre_exc and post_exc: exceptions raised (if any) or None if no exception\n# - pre_res and post_res: results returned by the functions (if no exceptions raised)\n\n# <<PRE_IMPL>>\n\n# <<POST_IMPL>>\n";

fn slug_oracle(rounds: usize) -> String {
    let cases = [
        ("plain", "\"Hello World\"", "hello-world", "PRESERVED"),
        ("edges", "\"  Hello, World!  \"", "hello-world", "CHANGED"),
        ("accents", "\"Crème Brûlée\"", "creme-brulee", "PRESERVED"),
        ("custom_sep", "\"--a b--\"", "a_b", "CHANGED"),
        ("only_punct", "\"!!!\"", "", "CHANGED"),
        ("digits", "\"Top 10 Tips\"", "top-10-tips", "PRESERVED"),
    ];
    let mut out = String::from(HEADER);
    for (name, input, expected, kind) in cases.iter().take(rounds + 1) {
        let sep = if *name == "custom_sep" { ", \"_\"" } else { "" };
        out.push_str(&format!(
            "\n## {kind} BEHAVIORS: {}\n{name} = {input}\npre_res, pre_exc, post_res, post_exc = call_impl(pre_slugify, post_slugify, {name}{sep})\nassert post_exc is None and post_res == \"{expected}\", (\n    \"[{kind} BEHAVIORS] post_slugify should map {} to '{expected}'.\")\n",
            name.to_uppercase().replace('_', " "),
            input.replace('"', "'"),
        ));
    }
    out
}

fn all_green() -> Plan {
    let diff = unified(&[("textkit/slug.py", TK_SLUG_PRE, TK_SLUG_POST)]);
    let pr = pull_request(
        "acme/textkit",
        17,
        "Strip leading and trailing separators from slugs",
        "`slugify(\"  Hello!  \")` used to return `-hello-`. Separators at either end are now removed.",
        &diff,
    );
    let n = Budgets::default().max_iterations as usize;
    let mut responses = vec![oracle_response(
        &slug_oracle(0),
        "The patch strips the separator from both ends of the result.",
        &["interior separators are unchanged", "edge separators disappear"],
    )];
    let mut outcomes = vec![green(&slug_oracle(0))];
    for round in 1..=n {
        responses.push(oracle_response(
            &slug_oracle(round),
            "Adding an input class not covered yet.",
            &["behavior on this input class matches the description"],
        ));
        outcomes.push(green(&slug_oracle(round)));
    }
    Plan {
        pr,
        pre: textkit(TK_SLUG_PRE, TK_WRAP_PRE, TK_STATS_PRE),
        post: textkit(TK_SLUG_POST, TK_WRAP_PRE, TK_STATS_PRE),
        budgets: Budgets::default(),
        description: "Every execution passes; the run stops after the enhancement limit with a consistent verdict.",
        responses,
        outcomes,
    }
}

const TRUNCATE_V0: &str = r#"
## PRESERVED BEHAVIORS: SHORT TEXT
short = "hello"
pre_res, pre_exc, post_res, post_exc = call_impl(pre_truncate, post_truncate, short, 10)
assert pre_res == post_res == short, (
    "[PRESERVED BEHAVIORS] Text within the width is returned unchanged.")

## CHANGED BEHAVIORS: RESULT FITS THE WIDTH
long = "abcdefghijklmnop"
pre_res, pre_exc, post_res, post_exc = call_impl(pre_truncate, post_truncate, long, WIDTH)
assert len(post_res) <= WIDTH, (
    "[CHANGED BEHAVIORS] post_truncate output should fit the width.")
"#;

const TRUNCATE_V1: &str = r#"
## PRESERVED BEHAVIORS: SHORT TEXT
short = "hello"
pre_res, pre_exc, post_res, post_exc = call_impl(pre_truncate, post_truncate, short, 10)
assert pre_res == post_res == short, (
    "[PRESERVED BEHAVIORS] Text within the width is returned unchanged.")

## CHANGED BEHAVIORS: RESULT FITS THE WIDTH
long = "abcdefghijklmnop"
pre_res, pre_exc, post_res, post_exc = call_impl(pre_truncate, post_truncate, long, 8)
assert len(post_res) <= 8 and len(pre_res) > 8, (
    "[CHANGED BEHAVIORS] post_truncate output should fit the width.")

## NEW BEHAVIORS: TINY WIDTH
pre_res, pre_exc, post_res, post_exc = call_impl(pre_truncate, post_truncate, long, 2)
assert post_exc is None and post_res == "...", (
    "[NEW BEHAVIORS] [POST] post_truncate keeps the whole suffix for tiny widths.")
"#;

const TRUNCATE_FIX: &str = "assert post_exc is None and post_res == \"..\", (\n    \"[NEW BEHAVIORS] [POST] post_truncate cuts the suffix itself when the width is smaller than it.\")\n";

const TRUNCATE_V3_EXTRA: &str = r#"
## PRESERVED BEHAVIORS: EXACT WIDTH
exact = "abcdefgh"
pre_res, pre_exc, post_res, post_exc = call_impl(pre_truncate, post_truncate, exact, 8)
assert pre_res == post_res == exact, (
    "[PRESERVED BEHAVIORS] Text exactly as long as the width is returned unchanged.")
"#;

fn repair_then_review() -> Plan {
    let diff = unified(&[("textkit/wrap.py", TK_WRAP_PRE, TK_WRAP_POST)]);
    let pr = pull_request(
        "acme/textkit",
        21,
        "Make truncate respect the width including the suffix",
        "The result of `truncate` could be longer than `width` because the suffix was appended after cutting. The suffix now counts toward the width.",
        &diff,
    );
    let v0 = format!("{HEADER}{TRUNCATE_V0}");
    let v1 = format!("{HEADER}{TRUNCATE_V1}");
    let v1_oracle = PatchOracle::parse(&v1, 1).expect("v1 parses");
    let v2 = patchsentry_core::oracle::apply_oracle_edits(
        &v1_oracle,
        &[OracleEdit::Replace {
            index: 2,
            code: TRUNCATE_FIX.into(),
        }],
    )
    .expect("fix applies");
    let v3 = format!("{}{TRUNCATE_V3_EXTRA}", v2.program_template);

    let name_error = ExceptionDescriptor {
        type_name: "NameError".into(),
        message: "name 'WIDTH' is not defined".into(),
        traceback: Some("Traceback (most recent call last):\n  File \"program.py\", line 41, in <module>\nNameError: name 'WIDTH' is not defined".into()),
    };
    let crashed = report_outcome(
        vec![record_of(0, Target::Cross, true, &v1_oracle.assertions[0].message)],
        Some(name_error),
        "NameError: name 'WIDTH' is not defined\n",
    );
    let post_fail = report_outcome(
        v1_oracle
            .assertions
            .iter()
            .enumerate()
            .map(|(i, a)| record_of(i, a.target, i != 2, &a.message))
            .collect(),
        None,
        "",
    );
    let review = render_review_response(
        &[AssertionVerdict {
            index: Some(2),
            verdict: ReviewVerdict::FalsePositive,
            justification: "The description says the suffix counts toward the width, so for width 2 the result must be at most 2 characters; the patch returns `suffix[:width]`, which is \"..\". The assertion expected the whole suffix, which contradicts the stated intent. [FALSE-POSITIVE]".into(),
        }],
        &[OracleEdit::Replace {
            index: 2,
            code: TRUNCATE_FIX.into(),
        }],
    );
    Plan {
        pr,
        pre: textkit(TK_SLUG_PRE, TK_WRAP_PRE, TK_STATS_PRE),
        post: textkit(TK_SLUG_PRE, TK_WRAP_POST, TK_STATS_PRE),
        budgets: Budgets {
            max_iterations: 1,
            ..Budgets::default()
        },
        description: "A crashing oracle is repaired, a post-only failure is dismissed by review with an edit, and the run ends consistent.",
        responses: vec![
            oracle_response(&v0, "The suffix now counts toward the width.", &["long text is cut to fit"]),
            oracle_response(&v1, "WIDTH was never defined; using a literal width.", &["long text is cut to fit", "tiny widths keep the suffix"]),
            review,
            oracle_response(&v3, "Checking the boundary where the text is exactly as wide as allowed.", &["exact-width text is unchanged"]),
        ],
        outcomes: vec![crashed, post_fail, green(&v2.program_template), green(&v3)],
    }
}

fn stats_oracle(extra: usize) -> String {
    let cases = [
        ("single_spaces", "\"a b c\"", 3, "PRESERVED"),
        ("double_spaces", "\"a  b\"", 2, "CHANGED"),
        ("newlines", "\"a\\nb\\nc\"", 3, "CHANGED"),
        ("tabs", "\"a\\tb\"", 2, "CHANGED"),
    ];
    let mut out = String::from(HEADER);
    for (name, input, expected, kind) in cases.iter().take(extra + 1) {
        out.push_str(&format!(
            "\n## {kind} BEHAVIORS: {}\n{name} = {input}\npre_res, pre_exc, post_res, post_exc = call_impl(pre_count_words, post_count_words, {name})\nassert post_res == {expected}, (\n    \"[{kind} BEHAVIORS] post_count_words should count {expected} words.\")\n",
            name.to_uppercase().replace('_', " "),
        ));
    }
    out
}

fn budget_exhausted() -> Plan {
    let diff = unified(&[("textkit/stats.py", TK_STATS_PRE, TK_STATS_POST)]);
    let pr = pull_request(
        "acme/textkit",
        30,
        "count_words: split on any whitespace",
        "Runs of spaces, tabs and newlines all separate words now.",
        &diff,
    );
    let budgets = Budgets {
        max_calls: 3,
        ..Budgets::default()
    };
    let responses = (0..3)
        .map(|i| oracle_response(&stats_oracle(i), "Whitespace handling changed.", &["more whitespace kinds separate words"]))
        .collect();
    let outcomes = (0..3).map(|i| green(&stats_oracle(i))).collect();
    Plan {
        pr,
        pre: textkit(TK_SLUG_PRE, TK_WRAP_PRE, TK_STATS_PRE),
        post: textkit(TK_SLUG_PRE, TK_WRAP_PRE, TK_STATS_POST),
        budgets,
        description: "The call budget is used up while enhancing; the run ends inconclusive without further calls.",
        responses,
        outcomes,
    }
}
