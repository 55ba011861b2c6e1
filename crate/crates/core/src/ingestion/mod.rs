//! Pull-request acquisition: forge access, diff parsing, target filtering
//! and natural-language artifact assembly.

pub mod diff;
pub mod filter;
pub mod forge;
pub mod issue_refs;
pub mod nl;
pub mod snapshot;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use diff::{apply, parse_unified_diff, render_unified, FileDiff, FileStatus, Hunk, HunkLine, LineKind, MalformedDiff};
pub use filter::{is_doc_path, is_target_pr, FilterError, FilterReason};
pub use forge::{Forge, ForgeError, GitHubForge};
pub use nl::{gather_nl_artifacts, linked_issue_text, DistillOptions, NlArtifacts};
pub use snapshot::{Snapshot, SnapshotCache, SnapshotError};

/// `owner/name` identifier of a repository on the forge.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct RepoId {
    owner: String,
    name: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("repository id must look like `owner/name`, got {0:?}")]
pub struct BadRepoId(pub String);

impl RepoId {
    pub fn new(owner: &str, name: &str) -> Result<Self, BadRepoId> {
        format!("{owner}/{name}").parse()
    }

    pub fn owner(&self) -> &str {
        &self.owner
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Filesystem-safe form, `owner__name`.
    pub fn slug(&self) -> String {
        format!("{}__{}", self.owner, self.name)
    }
}

impl FromStr for RepoId {
    type Err = BadRepoId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let valid = |part: &str| {
            !part.is_empty()
                && part != "."
                && part != ".."
                && part
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        };
        match s.split_once('/') {
            Some((owner, name)) if valid(owner) && valid(name) => Ok(Self {
                owner: owner.to_string(),
                name: name.to_string(),
            }),
            _ => Err(BadRepoId(s.to_string())),
        }
    }
}

impl TryFrom<String> for RepoId {
    type Error = BadRepoId;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<RepoId> for String {
    fn from(value: RepoId) -> Self {
        value.to_string()
    }
}

impl fmt::Display for RepoId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.owner, self.name)
    }
}

/// An issue referenced from the pull request's text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueRef {
    pub number: u64,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub body: String,
}

/// The analysis subject: code patch plus the text that states its intent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PullRequest {
    pub repo_id: RepoId,
    pub number: u64,
    pub title: String,
    #[serde(default)]
    pub description: String,
    /// Top-level and review comments, flattened in chronological order.
    #[serde(default)]
    pub comments: Vec<String>,
    #[serde(default)]
    pub linked_issues: Vec<IssueRef>,
    #[serde(default)]
    pub base_commit: String,
    #[serde(default)]
    pub head_commit: String,
    pub diff: Vec<FileDiff>,
}

impl PullRequest {
    /// Title, description and comments in the order references are scanned.
    pub fn texts(&self) -> impl Iterator<Item = &str> {
        [self.title.as_str(), self.description.as_str()]
            .into_iter()
            .chain(self.comments.iter().map(String::as_str))
    }

    pub fn unified_diff(&self) -> String {
        render_unified(&self.diff)
    }
}
