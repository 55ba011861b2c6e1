use serde::{Deserialize, Serialize};
use tracing::warn;

use super::PullRequest;
use crate::llm::{parse_distillation, GatewayError, LlmSession, Phase, PromptInputs, PromptTemplates};

/// The natural-language side of a pull request.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NlArtifacts {
    pub title: String,
    pub description: String,
    pub comments: Vec<String>,
    /// Summary of the linked issues; empty when none are linked.
    pub distilled_issue_context: String,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistillOptions {
    /// Characters of raw issue text kept when distillation fails.
    pub fallback_chars: usize,
}

impl Default for DistillOptions {
    fn default() -> Self {
        Self { fallback_chars: 4000 }
    }
}

/// Raw text of the linked issues as handed to the distillation prompt.
pub fn linked_issue_text(pr: &PullRequest) -> String {
    pr.linked_issues
        .iter()
        .map(|i| format!("Issue #{}: {}\n\n{}", i.number, i.title, i.body.trim_end()))
        .collect::<Vec<_>>()
        .join("\n\n---\n\n")
}

/// Copies the PR texts and distills the linked issues with at most one
/// model call. A backend failure degrades to truncated raw issue text;
/// budget and transcript errors propagate.
pub fn gather_nl_artifacts(
    pr: &PullRequest,
    session: &LlmSession,
    templates: &PromptTemplates,
    opts: DistillOptions,
) -> Result<NlArtifacts, GatewayError> {
    let mut nl = NlArtifacts {
        title: pr.title.clone(),
        description: pr.description.clone(),
        comments: pr.comments.clone(),
        distilled_issue_context: String::new(),
        warnings: Vec::new(),
    };
    if pr.linked_issues.is_empty() {
        return Ok(nl);
    }
    let issues = linked_issue_text(pr);
    let prompt = templates
        .build_prompt(
            Phase::Distillation,
            &PromptInputs {
                nl: Some(&nl),
                issue_text: Some(&issues),
                ..Default::default()
            },
        )
        .expect("distillation inputs are complete");
    match session.complete(&prompt) {
        Ok(resp) => nl.distilled_issue_context = parse_distillation(&resp.text),
        Err(GatewayError::Backend(e)) => {
            warn!(error = %e, "issue distillation failed, using raw issue text");
            nl.distilled_issue_context = issues.chars().take(opts.fallback_chars).collect();
            nl.warnings.push(format!("issue distillation failed ({e}); raw issue text used"));
        }
        Err(e) => return Err(e),
    }
    Ok(nl)
}
