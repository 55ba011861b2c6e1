//! Golden bundles: a frozen pull request with its pre/post trees, the model
//! transcript and the recorded runner outcomes of one run. Replaying a
//! bundle needs neither network nor interpreter.
//!
//! ```text
//! <bundle>/
//!   bundle.toml          description and budgets
//!   pr.json              pull request metadata (no diff)
//!   patch.diff           unified diff, pre -> post
//!   pre/ post/           source trees
//!   transcript.jsonl     model calls in order
//!   executions/NNN.json  runner outcomes in order
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::PackageMap;
use crate::ingestion::{parse_unified_diff, DistillOptions, IssueRef, PullRequest, RepoId, Snapshot};
use crate::llm::{Gateway, PromptTemplates, Transcript};
use crate::orchestrator::{Budgets, Pipeline, PipelineError, RunRecord};
use crate::sandbox::{RecordedExecution, StubSandbox, DEFAULT_TIMEOUT};

pub const MANIFEST_FILE: &str = "bundle.toml";
pub const PR_FILE: &str = "pr.json";
pub const PATCH_FILE: &str = "patch.diff";
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("cannot access {path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {reason}")]
    Invalid { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleManifest {
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    DEFAULT_TIMEOUT.as_secs()
}

/// `pr.json`: the pull request without its diff.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct PrDocument {
    repo: RepoId,
    number: u64,
    title: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    comments: Vec<String>,
    #[serde(default)]
    linked_issues: Vec<IssueRef>,
    #[serde(default)]
    base_commit: String,
    #[serde(default)]
    head_commit: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldenBundle {
    pub manifest: BundleManifest,
    pub pr: PullRequest,
    pub pre: Snapshot,
    pub post: Snapshot,
    pub transcript: Transcript,
    pub executions: Vec<RecordedExecution>,
}

/// Result of replaying a bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub record: RunRecord,
    /// Calls actually consumed, in order.
    pub transcript: Transcript,
    pub sandbox_id: String,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> BundleError + '_ {
    move |source| BundleError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn invalid(path: &Path, reason: impl ToString) -> BundleError {
    BundleError::Invalid {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

fn read(path: &Path) -> Result<String, BundleError> {
    fs::read_to_string(path).map_err(io(path))
}

fn load_tree(path: &Path) -> Result<Snapshot, BundleError> {
    if !path.is_dir() {
        return Err(invalid(path, "source tree directory is missing"));
    }
    Snapshot::from_dir(path).map_err(|e| invalid(path, e))
}

fn save_tree(dir: &Path, snap: &Snapshot) -> Result<(), BundleError> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    for p in snap.paths() {
        let target = dir.join(p);
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent).map_err(io(parent))?;
        }
        fs::write(&target, snap.get(p).expect("listed path")).map_err(io(&target))?;
    }
    Ok(())
}

impl GoldenBundle {
    pub fn load(dir: &Path) -> Result<Self, BundleError> {
        let manifest_path = dir.join(MANIFEST_FILE);
        let manifest: BundleManifest =
            toml::from_str(&read(&manifest_path)?).map_err(|e| invalid(&manifest_path, e))?;

        let pr_path = dir.join(PR_FILE);
        let doc: PrDocument = serde_json::from_str(&read(&pr_path)?).map_err(|e| invalid(&pr_path, e))?;
        let patch_path = dir.join(PATCH_FILE);
        let diff = parse_unified_diff(&read(&patch_path)?).map_err(|e| invalid(&patch_path, e))?;
        let pr = PullRequest {
            repo_id: doc.repo,
            number: doc.number,
            title: doc.title,
            description: doc.description,
            comments: doc.comments,
            linked_issues: doc.linked_issues,
            base_commit: doc.base_commit,
            head_commit: doc.head_commit,
            diff,
        };

        let transcript_path = dir.join(TRANSCRIPT_FILE);
        let transcript = Transcript::load(&transcript_path).map_err(|e| invalid(&transcript_path, e))?;

        let exec_dir = dir.join("executions");
        let mut names: Vec<PathBuf> = match fs::read_dir(&exec_dir) {
            Ok(rd) => rd
                .filter_map(Result::ok)
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io(&exec_dir)(e)),
        };
        names.sort();
        let executions = names
            .iter()
            .map(|p| serde_json::from_str(&read(p)?).map_err(|e| invalid(p, e)))
            .collect::<Result<_, _>>()?;

        Ok(Self {
            manifest,
            pr,
            pre: load_tree(&dir.join("pre"))?,
            post: load_tree(&dir.join("post"))?,
            transcript,
            executions,
        })
    }

    /// Writes the bundle into `dir`, which must not exist yet or be empty.
    pub fn save(&self, dir: &Path) -> Result<(), BundleError> {
        if dir.exists() && fs::read_dir(dir).map_err(io(dir))?.next().is_some() {
            return Err(invalid(dir, "refusing to write a bundle into a non-empty directory"));
        }
        fs::create_dir_all(dir).map_err(io(dir))?;
        let manifest = toml::to_string(&self.manifest).map_err(|e| invalid(dir, e))?;
        fs::write(dir.join(MANIFEST_FILE), manifest).map_err(io(dir))?;
        let doc = PrDocument {
            repo: self.pr.repo_id.clone(),
            number: self.pr.number,
            title: self.pr.title.clone(),
            description: self.pr.description.clone(),
            comments: self.pr.comments.clone(),
            linked_issues: self.pr.linked_issues.clone(),
            base_commit: self.pr.base_commit.clone(),
            head_commit: self.pr.head_commit.clone(),
        };
        let pr_json = serde_json::to_string_pretty(&doc).expect("pr serializes") + "\n";
        fs::write(dir.join(PR_FILE), pr_json).map_err(io(dir))?;
        fs::write(dir.join(PATCH_FILE), self.pr.unified_diff()).map_err(io(dir))?;
        save_tree(&dir.join("pre"), &self.pre)?;
        save_tree(&dir.join("post"), &self.post)?;
        self.transcript
            .save(&dir.join(TRANSCRIPT_FILE))
            .map_err(|e| invalid(dir, e))?;
        let exec_dir = dir.join("executions");
        fs::create_dir_all(&exec_dir).map_err(io(&exec_dir))?;
        for (i, e) in self.executions.iter().enumerate() {
            let p = exec_dir.join(format!("{i:03}.json"));
            let text = serde_json::to_string_pretty(e).expect("execution serializes") + "\n";
            fs::write(&p, text).map_err(io(&p))?;
        }
        Ok(())
    }

    /// Package layout of the pre-patch tree.
    pub fn layout(&self) -> PackageMap {
        PackageMap::from_snapshot(&self.pre)
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.manifest.timeout_secs)
    }

    /// Runs the full pipeline against the recorded transcript and outcomes.
    pub fn replay(&self, templates: &PromptTemplates, budgets: Budgets) -> Result<Replay, PipelineError> {
        let gateway = Arc::new(Gateway::replay_only());
        let session = gateway.replay_session(self.transcript.clone(), budgets.max_calls);
        let sandbox = StubSandbox::new(self.executions.clone());
        let pipeline = Pipeline {
            session: &session,
            templates,
            sandbox: &sandbox,
            budgets,
            timeout: self.timeout(),
            distill: DistillOptions::default(),
        };
        let record = pipeline.analyze(&self.pr, &self.pre, &self.post, &self.layout())?;
        Ok(Replay {
            record,
            transcript: session.transcript(),
            sandbox_id: crate::sandbox::Sandbox::id(&sandbox),
        })
    }
}
