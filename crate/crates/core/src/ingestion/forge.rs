//! Read-only access to a code-forge host (GitHub-compatible REST API).

use std::sync::Mutex;
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;
use tracing::debug;

use super::diff::{parse_unified_diff, MalformedDiff};
use super::issue_refs::issue_references;
use super::{IssueRef, PullRequest, RepoId};

pub const DEFAULT_API_BASE: &str = "https://api.github.com";
/// Environment variable holding the forge token.
pub const TOKEN_ENV: &str = "GITHUB_TOKEN";

#[derive(Debug, Error)]
pub enum ForgeError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("authentication rejected (HTTP {0})")]
    AuthError(u16),
    #[error("rate limited; retry after {retry_after_secs:?} s")]
    RateLimited { retry_after_secs: Option<u64> },
    #[error("HTTP {status} from {url}")]
    Http { status: u16, url: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("unexpected response body from {url}: {reason}")]
    Decode { url: String, reason: String },
    #[error("pull request diff: {0}")]
    Diff(#[from] MalformedDiff),
}

/// Source of pull-request data.
pub trait Forge: Send + Sync {
    fn fetch_pr(&self, repo: &RepoId, number: u64) -> Result<PullRequest, ForgeError>;
}

#[derive(Deserialize)]
struct ApiPull {
    title: String,
    body: Option<String>,
    base: ApiRef,
    head: ApiRef,
}

#[derive(Deserialize)]
struct ApiRef {
    sha: String,
}

#[derive(Deserialize)]
struct ApiComment {
    body: Option<String>,
    created_at: String,
}

#[derive(Deserialize)]
struct ApiIssue {
    number: u64,
    title: String,
    body: Option<String>,
    pull_request: Option<serde_json::Value>,
}

/// GitHub REST client. Requests to one host are serialized.
pub struct GitHubForge {
    base_url: String,
    token: Option<String>,
    agent: ureq::Agent,
    host_lock: Mutex<()>,
}

impl GitHubForge {
    pub fn new(base_url: impl Into<String>, token: Option<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            token,
            agent,
            host_lock: Mutex::new(()),
        }
    }

    /// Client for api.github.com using the token from `GITHUB_TOKEN`.
    pub fn from_env() -> Self {
        Self::new(DEFAULT_API_BASE, std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()))
    }

    fn get(&self, path: &str, accept: &str) -> Result<String, ForgeError> {
        let url = format!("{}{}", self.base_url, path);
        let _guard = self.host_lock.lock().unwrap_or_else(|p| p.into_inner());
        debug!(%url, "forge request");
        let mut req = self
            .agent
            .get(&url)
            .header("Accept", accept)
            .header("User-Agent", "patchsentry");
        if let Some(token) = &self.token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req.call().map_err(|e| ForgeError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let header = |name: &str| {
            resp.headers()
                .get(name)
                .and_then(|v| v.to_str().ok())
                .map(str::to_string)
        };
        let remaining = header("x-ratelimit-remaining");
        let retry_after = header("retry-after").and_then(|v| v.parse().ok());
        match status {
            200..=299 => resp
                .body_mut()
                .read_to_string()
                .map_err(|e| ForgeError::Transport(e.to_string())),
            404 => Err(ForgeError::NotFound(path.to_string())),
            429 => Err(ForgeError::RateLimited {
                retry_after_secs: retry_after,
            }),
            403 if remaining.as_deref() == Some("0") || retry_after.is_some() => Err(ForgeError::RateLimited {
                retry_after_secs: retry_after,
            }),
            401 | 403 => Err(ForgeError::AuthError(status)),
            _ => Err(ForgeError::Http { status, url }),
        }
    }

    fn get_json<T: for<'de> Deserialize<'de>>(&self, path: &str) -> Result<T, ForgeError> {
        let body = self.get(path, "application/vnd.github+json")?;
        serde_json::from_str(&body).map_err(|e| ForgeError::Decode {
            url: path.to_string(),
            reason: e.to_string(),
        })
    }

    fn get_paged<T: for<'de> Deserialize<'de>>(&self, path: &str) -> Result<Vec<T>, ForgeError> {
        const PER_PAGE: usize = 100;
        let mut all = Vec::new();
        for page in 1.. {
            let batch: Vec<T> = self.get_json(&format!("{path}?per_page={PER_PAGE}&page={page}"))?;
            let n = batch.len();
            all.extend(batch);
            if n < PER_PAGE {
                break;
            }
        }
        Ok(all)
    }
}

impl Forge for GitHubForge {
    fn fetch_pr(&self, repo: &RepoId, number: u64) -> Result<PullRequest, ForgeError> {
        let base = format!("/repos/{repo}");
        let pull: ApiPull = self.get_json(&format!("{base}/pulls/{number}"))?;
        let diff_text = self.get(&format!("{base}/pulls/{number}"), "application/vnd.github.v3.diff")?;
        let diff = parse_unified_diff(&diff_text)?;

        let mut comments: Vec<ApiComment> = self.get_paged(&format!("{base}/issues/{number}/comments"))?;
        comments.extend(self.get_paged::<ApiComment>(&format!("{base}/pulls/{number}/comments"))?);
        // ISO-8601 timestamps in UTC sort lexicographically
        comments.sort_by(|a, b| a.created_at.cmp(&b.created_at));
        let comments: Vec<String> = comments.into_iter().filter_map(|c| c.body).collect();

        let description = pull.body.unwrap_or_default();
        let refs = issue_references(
            [pull.title.as_str(), description.as_str()]
                .into_iter()
                .chain(comments.iter().map(String::as_str)),
        );
        let mut linked_issues = Vec::new();
        for issue_number in refs.into_iter().filter(|n| *n != number) {
            match self.get_json::<ApiIssue>(&format!("{base}/issues/{issue_number}")) {
                Ok(issue) if issue.pull_request.is_none() => linked_issues.push(IssueRef {
                    number: issue.number,
                    title: issue.title,
                    body: issue.body.unwrap_or_default(),
                }),
                Ok(_) => debug!(issue_number, "reference points at a pull request, skipped"),
                // dangling references are common in prose
                Err(ForgeError::NotFound(_)) => debug!(issue_number, "referenced issue not found"),
                Err(e) => return Err(e),
            }
        }

        Ok(PullRequest {
            repo_id: repo.clone(),
            number,
            title: pull.title,
            description,
            comments,
            linked_issues,
            base_commit: pull.base.sha,
            head_commit: pull.head.sha,
            diff,
        })
    }
}
