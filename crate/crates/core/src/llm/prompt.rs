use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::context::CodeContext;
use crate::ingestion::NlArtifacts;
use crate::oracle::PatchOracle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Inference,
    Enhancement,
    SelfReview,
    Repair,
    Distillation,
}

impl Phase {
    pub const ALL: [Phase; 5] = [
        Phase::Inference,
        Phase::Enhancement,
        Phase::SelfReview,
        Phase::Repair,
        Phase::Distillation,
    ];

    fn file_stem(self) -> &'static str {
        match self {
            Phase::Inference => "inference",
            Phase::Enhancement => "enhancement",
            Phase::SelfReview => "self_review",
            Phase::Repair => "repair",
            Phase::Distillation => "distillation",
        }
    }

    /// Whether the response to this phase carries a comparison program.
    pub fn yields_oracle(self) -> bool {
        matches!(self, Phase::Inference | Phase::Enhancement | Phase::Repair)
    }
}

/// A fully rendered four-part prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub phase: Phase,
    pub role_definition: String,
    pub guidelines: String,
    pub contextual_information: String,
    pub output_formatting: String,
}

impl Prompt {
    /// Text sent as the system message.
    pub fn system(&self) -> &str {
        &self.role_definition
    }

    /// Text sent as the user message.
    pub fn user(&self) -> String {
        format!(
            "## Guidelines\n\n{}\n\n## Contextual Information\n\n{}\n\n## Output Formatting\n\n{}\n",
            self.guidelines.trim_end(),
            self.contextual_information.trim_end(),
            self.output_formatting.trim_end()
        )
    }

    /// Hex SHA-256 over phase, system and user text.
    pub fn sha256(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("{:?}", self.phase).as_bytes());
        h.update([0]);
        h.update(self.system().as_bytes());
        h.update([0]);
        h.update(self.user().as_bytes());
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("prompt context is missing `{0}`")]
    MissingContext(&'static str),
    #[error("template {path}: {reason}")]
    Template { path: String, reason: String },
}

/// Inputs a prompt may draw on; each phase requires a subset.
#[derive(Debug, Clone, Copy, Default)]
pub struct PromptInputs<'a> {
    pub nl: Option<&'a NlArtifacts>,
    pub code: Option<&'a CodeContext>,
    pub oracle: Option<&'a PatchOracle>,
    pub execution_logs: Option<&'a str>,
    pub error_report: Option<&'a str>,
    pub patch: Option<&'a str>,
    pub issue_text: Option<&'a str>,
    /// Problems found in the previous answer, for a format retry.
    pub format_feedback: Option<&'a [String]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
struct PhaseTemplate {
    role: String,
    guidelines: String,
    output_formatting: String,
}

/// The editable prompt texts, one file per phase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    phases: BTreeMap<Phase, PhaseTemplate>,
    version: String,
}

const ORACLE_FORMAT_REF: &str = "@oracle_format";
const ORACLE_FORMAT_FILE: &str = "_oracle_format.md";

const EMBEDDED: [(Phase, &str); 5] = [
    (Phase::Inference, include_str!("../../templates/inference.toml")),
    (Phase::Enhancement, include_str!("../../templates/enhancement.toml")),
    (Phase::SelfReview, include_str!("../../templates/self_review.toml")),
    (Phase::Repair, include_str!("../../templates/repair.toml")),
    (Phase::Distillation, include_str!("../../templates/distillation.toml")),
];
const EMBEDDED_ORACLE_FORMAT: &str = include_str!("../../templates/_oracle_format.md");

impl PromptTemplates {
    /// Templates compiled into the binary.
    pub fn embedded() -> Self {
        Self::from_sources(EMBEDDED.iter().map(|(p, s)| (*p, s.to_string())), EMBEDDED_ORACLE_FORMAT)
            .expect("embedded templates are valid")
    }

    /// Loads `<phase>.toml` files and `_oracle_format.md` from `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self, PromptError> {
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|e| PromptError::Template {
                path: path.display().to_string(),
                reason: e.to_string(),
            })
        };
        let mut sources = Vec::new();
        for phase in Phase::ALL {
            sources.push((phase, read(&format!("{}.toml", phase.file_stem()))?));
        }
        Self::from_sources(sources, &read(ORACLE_FORMAT_FILE)?)
    }

    fn from_sources(sources: impl IntoIterator<Item = (Phase, String)>, oracle_format: &str) -> Result<Self, PromptError> {
        let mut phases = BTreeMap::new();
        let mut digest = Sha256::new();
        digest.update(oracle_format.as_bytes());
        for (phase, src) in sources {
            digest.update(src.as_bytes());
            let mut t: PhaseTemplate = toml::from_str(&src).map_err(|e| PromptError::Template {
                path: format!("{}.toml", phase.file_stem()),
                reason: e.to_string(),
            })?;
            if t.output_formatting.trim() == ORACLE_FORMAT_REF {
                t.output_formatting = oracle_format.to_string();
            }
            for (field, text) in [("role", &t.role), ("guidelines", &t.guidelines), ("output_formatting", &t.output_formatting)] {
                if text.trim().is_empty() {
                    return Err(PromptError::Template {
                        path: format!("{}.toml", phase.file_stem()),
                        reason: format!("`{field}` is empty"),
                    });
                }
            }
            phases.insert(phase, t);
        }
        let version = hex::encode(digest.finalize())[..16].to_string();
        Ok(Self { phases, version })
    }

    /// Short content hash identifying this template set.
    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn build_prompt(&self, phase: Phase, inputs: &PromptInputs<'_>) -> Result<Prompt, PromptError> {
        let t = &self.phases[&phase];
        let fname = inputs.code.map(|c| c.function_name()).unwrap_or("f");
        Ok(Prompt {
            phase,
            role_definition: t.role.trim().to_string(),
            guidelines: t.guidelines.trim().to_string(),
            contextual_information: contextual_information(phase, inputs)?,
            output_formatting: t.output_formatting.replace("{function_name}", fname).trim().to_string(),
        })
    }
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self::embedded()
    }
}

fn required<T>(v: Option<T>, name: &'static str) -> Result<T, PromptError> {
    v.ok_or(PromptError::MissingContext(name))
}

fn contextual_information(phase: Phase, i: &PromptInputs<'_>) -> Result<String, PromptError> {
    let mut out = String::new();
    match phase {
        Phase::Distillation => {
            let nl = required(i.nl, "nl")?;
            let issues = required(i.issue_text, "issue_text")?;
            pr_section(&mut out, nl, false);
            section(&mut out, "Linked Issues", issues);
        }
        Phase::Inference => {
            let nl = required(i.nl, "nl")?;
            let code = required(i.code, "code")?;
            pr_section(&mut out, nl, true);
            code_section(&mut out, code);
        }
        Phase::Enhancement => {
            let nl = required(i.nl, "nl")?;
            let code = required(i.code, "code")?;
            let oracle = required(i.oracle, "oracle")?;
            pr_section(&mut out, nl, true);
            code_section(&mut out, code);
            oracle_section(&mut out, oracle);
        }
        Phase::SelfReview => {
            let nl = required(i.nl, "nl")?;
            let oracle = required(i.oracle, "oracle")?;
            let logs = required(i.execution_logs, "execution_logs")?;
            let report = required(i.error_report, "error_report")?;
            pr_section(&mut out, nl, true);
            if let Some(code) = i.code {
                code_section(&mut out, code);
            }
            if let Some(patch) = i.patch {
                fenced(&mut out, "Code Changes", "diff", patch);
            }
            oracle_section(&mut out, oracle);
            fenced(&mut out, "Execution Log", "text", logs);
            fenced(&mut out, "Error Report", "text", report);
        }
        Phase::Repair => {
            let oracle = required(i.oracle, "oracle")?;
            let logs = required(i.execution_logs, "execution_logs")?;
            let report = required(i.error_report, "error_report")?;
            if let Some(nl) = i.nl {
                pr_section(&mut out, nl, true);
            }
            if let Some(code) = i.code {
                code_section(&mut out, code);
            }
            oracle_section(&mut out, oracle);
            fenced(&mut out, "Execution Log", "text", logs);
            fenced(&mut out, "Error Report", "text", report);
        }
    }
    if let Some(problems) = i.format_feedback {
        let mut text = String::from("Your previous answer could not be used:\n");
        for p in problems {
            let _ = writeln!(text, "- {p}");
        }
        text.push_str("Answer again, following the output formatting exactly.");
        section(&mut out, "Problems With The Previous Answer", &text);
    }
    Ok(out.trim_end().to_string())
}

fn section(out: &mut String, title: &str, body: &str) {
    let _ = write!(out, "### {title}\n\n{}\n\n", body.trim_end());
}

fn fenced(out: &mut String, title: &str, lang: &str, body: &str) {
    let _ = write!(out, "### {title}\n\n```{lang}\n{}\n```\n\n", body.trim_end());
}

fn pr_section(out: &mut String, nl: &NlArtifacts, with_issues: bool) {
    let mut body = format!("Title: {}\n\nDescription:\n{}\n", nl.title, nl.description.trim_end());
    if !nl.comments.is_empty() {
        body.push_str("\nComments:\n");
        for c in &nl.comments {
            let _ = writeln!(body, "- {}", c.trim().replace('\n', "\n  "));
        }
    }
    if with_issues && !nl.distilled_issue_context.is_empty() {
        let _ = write!(body, "\nLinked issue context:\n{}\n", nl.distilled_issue_context.trim_end());
    }
    section(out, "Pull Request", &body);
}

fn code_section(out: &mut String, code: &CodeContext) {
    let kind = if code.is_method() { "method" } else { "function" };
    let _ = write!(
        out,
        "### Modified Function\n\nThe patch modifies the {kind} `{}`.\n\nPre-patch version:\n```python\n{}\n```\n\nPost-patch version:\n```python\n{}\n```\n\n",
        code.qualname,
        code.pre_function.trim_end(),
        code.post_function.trim_end()
    );
    if let Some(class) = &code.enclosing_class {
        fenced(out, "Enclosing Class (pre-patch)", "python", class);
    }
    if !code.external_deps.is_empty() || !code.internal_deps.is_empty() {
        let mut body = String::new();
        if !code.external_deps.is_empty() {
            let _ = writeln!(body, "Imports available in the comparison program:\n```python\n{}\n```", code.external_deps.join("\n"));
        }
        if !code.internal_deps.is_empty() {
            let names: Vec<&str> = code.internal_deps.iter().map(|d| d.name.as_str()).collect();
            let _ = writeln!(body, "Module-level definitions available: {}", names.join(", "));
        }
        section(out, "Module Context", &body);
    }
}

fn oracle_section(out: &mut String, o: &PatchOracle) {
    fenced(out, &format!("Current Oracle (revision {})", o.revision), "python", &o.program_template);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nl() -> NlArtifacts {
        NlArtifacts {
            title: "Fix: add file handling to URL fields".into(),
            description: "Requires a modicum of special handling due to hostnames being optional.\nFixes #2249.".into(),
            comments: vec![],
            distilled_issue_context: "\"file:///var/storage/somefile.zip\" raises a ValidationError.".into(),
            warnings: vec![],
        }
    }

    fn code() -> CodeContext {
        CodeContext {
            qualname: "validation".into(),
            pre_function: "def validation(value):\n    return value\n".into(),
            post_function: "def validation(value):\n    return value.strip()\n".into(),
            internal_deps: vec![],
            external_deps: vec!["from marshmallow.exceptions import ValidationError".into()],
            enclosing_class: None,
        }
    }

    #[test]
    fn inference_embeds_code_and_issue_context() {
        let t = PromptTemplates::embedded();
        let (nl, code) = (nl(), code());
        let p = t
            .build_prompt(Phase::Inference, &PromptInputs { nl: Some(&nl), code: Some(&code), ..Default::default() })
            .unwrap();
        assert!(p.contextual_information.contains("def validation(value):\n    return value\n"));
        assert!(p.contextual_information.contains("file:///var/storage/somefile.zip"));
        assert!(p.output_formatting.contains("pre_validation"));
        assert!(p.output_formatting.contains("<<PRE_IMPL>>"));
        for part in [&p.role_definition, &p.guidelines, &p.contextual_information, &p.output_formatting] {
            assert!(!part.is_empty());
        }
    }

    #[test]
    fn enhancement_embeds_current_oracle_verbatim() {
        let t = PromptTemplates::embedded();
        let (nl, code) = (nl(), code());
        let oracle = PatchOracle::parse(include_str!("../../tests/fixtures/url_oracle_v0.py"), 0).unwrap();
        let p = t
            .build_prompt(
                Phase::Enhancement,
                &PromptInputs { nl: Some(&nl), code: Some(&code), oracle: Some(&oracle), ..Default::default() },
            )
            .unwrap();
        assert!(p.contextual_information.contains(oracle.program_template.trim_end()));
    }

    #[test]
    fn self_review_without_logs_is_missing_context() {
        let t = PromptTemplates::embedded();
        let nl = nl();
        let oracle = PatchOracle::parse(include_str!("../../tests/fixtures/url_oracle_v0.py"), 0).unwrap();
        let err = t
            .build_prompt(
                Phase::SelfReview,
                &PromptInputs { nl: Some(&nl), oracle: Some(&oracle), error_report: Some("x"), ..Default::default() },
            )
            .unwrap_err();
        assert_eq!(err, PromptError::MissingContext("execution_logs"));
    }

    #[test]
    fn review_format_mandates_both_markers() {
        let t = PromptTemplates::embedded();
        let f = &t.phases[&Phase::SelfReview].output_formatting;
        assert!(f.contains("[BUG]") && f.contains("[FALSE-POSITIVE]"));
    }

    #[test]
    fn hash_depends_on_every_part() {
        let t = PromptTemplates::embedded();
        let (nl, code) = (nl(), code());
        let inputs = PromptInputs { nl: Some(&nl), code: Some(&code), ..Default::default() };
        let a = t.build_prompt(Phase::Inference, &inputs).unwrap();
        let mut b = a.clone();
        b.phase = Phase::Repair;
        let mut c = a.clone();
        c.guidelines.push('.');
        assert_ne!(a.sha256(), b.sha256());
        assert_ne!(a.sha256(), c.sha256());
        assert_eq!(a.sha256(), t.build_prompt(Phase::Inference, &inputs).unwrap().sha256());
    }

    #[test]
    fn templates_load_from_directory() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("templates");
        assert_eq!(PromptTemplates::from_dir(&dir).unwrap(), PromptTemplates::embedded());
    }
}
