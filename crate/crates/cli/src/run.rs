//! Running the pipeline for one pull request, from a bundle or from the
//! forge, and writing its run directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use patchsentry_core::bundle::GoldenBundle;
use patchsentry_core::context::PackageMap;
use patchsentry_core::ingestion::{DistillOptions, Forge, GitHubForge, PullRequest, RepoId, Snapshot, SnapshotCache};
use patchsentry_core::llm::{Gateway, GatewaySettings, LlmSession, Mode, OpenAiCompatible, PromptTemplates, Transcript};
use patchsentry_core::orchestrator::{run_dir_path, write_run_dir, Budgets, Pipeline, RunMetadata, ValidationReport};
use patchsentry_core::sandbox::{ContainerSandbox, Sandbox, StubSandbox, SubprocessSandbox};
use tracing::info;

use crate::config::{RunConfig, SandboxKind};

pub struct RunOutcome {
    pub report: ValidationReport,
    pub run_dir: PathBuf,
    /// Distinct oracle revisions accepted during the run.
    pub oracles: usize,
}

/// Where the LLM responses of a run come from.
enum Responses {
    Replay(Transcript),
    Backend { api_key: Option<String> },
}

/// Checks that need no I/O beyond reading local files. Called before any
/// network or sandbox activity.
fn responses(cfg: &RunConfig, bundle: Option<&GoldenBundle>) -> Result<Responses> {
    match cfg.mode {
        Mode::Replay => match (&cfg.transcript, bundle) {
            (Some(path), _) => {
                ensure!(path.is_file(), "transcript {} does not exist", path.display());
                let t = Transcript::load(path).with_context(|| format!("loading transcript {}", path.display()))?;
                Ok(Responses::Replay(t))
            }
            (None, Some(b)) => Ok(Responses::Replay(b.transcript.clone())),
            (None, None) => bail!("replay mode needs a transcript: pass --transcript FILE or --bundle DIR"),
        },
        Mode::Live | Mode::Record => {
            let var = &cfg.backend.api_key_env;
            if var.is_empty() {
                return Ok(Responses::Backend { api_key: None });
            }
            match std::env::var(var) {
                Ok(key) if !key.is_empty() => Ok(Responses::Backend { api_key: Some(key) }),
                _ => bail!("{} mode needs credentials: set {var}", mode_name(cfg.mode)),
            }
        }
    }
}

pub fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Live => "live",
        Mode::Record => "record",
        Mode::Replay => "replay",
    }
}

/// Fails early when a run could not even start, e.g. replay without a
/// transcript or live mode without credentials.
pub fn preflight(cfg: &RunConfig, bundle: Option<&Path>) -> Result<()> {
    if bundle.is_none() {
        responses(cfg, None)?;
    }
    Ok(())
}

fn session(cfg: &RunConfig, responses: Responses, max_calls: u32) -> (LlmSession, Option<String>) {
    match responses {
        Responses::Replay(t) => (Arc::new(Gateway::replay_only()).replay_session(t, max_calls), None),
        Responses::Backend { api_key } => {
            let backend = OpenAiCompatible::new(
                &cfg.backend.base_url,
                &cfg.backend.model,
                api_key,
                cfg.backend.request_timeout,
            );
            let gateway = Arc::new(Gateway::new(
                Arc::new(backend),
                GatewaySettings {
                    temperature: cfg.backend.temperature,
                    max_output_tokens: cfg.backend.max_output_tokens,
                    ..GatewaySettings::default()
                },
            ));
            let id = gateway.backend_id().map(str::to_string);
            (gateway.live_session(cfg.mode, max_calls), id)
        }
    }
}

/// A sandbox that can import the pre-patch tree rooted at `subject`.
pub fn real_sandbox(cfg: &RunConfig, subject: &Path, tag: &str) -> Result<Box<dyn Sandbox>> {
    let s = &cfg.sandbox;
    match s.kind {
        SandboxKind::Subprocess => {
            let mut sb = SubprocessSandbox::new(&s.python).with_python_path([subject.to_path_buf()]);
            if let Some(shim) = &s.shim {
                sb = sb.with_shim(shim);
            }
            sb.probe().context("subprocess sandbox is not usable")?;
            Ok(Box::new(sb))
        }
        SandboxKind::Container => {
            let engine = ContainerSandbox::connect(&s.docker, &s.image).context("container sandbox is not usable")?;
            let tag = format!("patchsentry-subject:{tag}");
            engine
                .prepare_image(&s.image, subject, &tag)
                .context("building the subject image")?;
            let mut sb = ContainerSandbox::connect(&s.docker, tag)?;
            if let Some(shim) = &s.shim {
                sb = sb.with_shim(shim);
            }
            Ok(Box::new(sb))
        }
    }
}

struct Subject<'a> {
    pr: &'a PullRequest,
    pre: &'a Snapshot,
    post: &'a Snapshot,
    layout: PackageMap,
}

fn execute(
    cfg: &RunConfig,
    subject: Subject<'_>,
    session: &LlmSession,
    backend_id: Option<&str>,
    sandbox: &dyn Sandbox,
    budgets: Budgets,
    note: Option<String>,
) -> Result<RunOutcome> {
    let templates = PromptTemplates::embedded();
    let pipeline = Pipeline {
        session,
        templates: &templates,
        sandbox,
        budgets,
        timeout: cfg.sandbox.timeout,
        distill: DistillOptions::default(),
    };
    let record = pipeline
        .analyze(subject.pr, subject.pre, subject.post, &subject.layout)
        .with_context(|| format!("analyzing {} #{}", subject.pr.repo_id, subject.pr.number))?;
    let run_dir = run_dir_path(&cfg.output_dir, &subject.pr.repo_id, subject.pr.number);
    let mut meta = RunMetadata::now(templates.version(), backend_id, &sandbox.id(), session.mode());
    meta.notes.extend(note);
    write_run_dir(&run_dir, &record, &session.transcript(), &meta)
        .with_context(|| format!("writing {}", run_dir.display()))?;
    info!(run_dir = %run_dir.display(), verdict = %record.report.verdict, "run finished");
    Ok(RunOutcome {
        oracles: record.oracles.len(),
        report: record.report,
        run_dir,
    })
}

/// Analyzes the PR stored in a bundle. In replay mode the bundle's recorded
/// executions stand in for the sandbox.
pub fn run_bundle(cfg: &RunConfig, dir: &Path, expect: Option<(&RepoId, u64)>) -> Result<RunOutcome> {
    let bundle = GoldenBundle::load(dir).with_context(|| format!("loading bundle {}", dir.display()))?;
    if let Some((repo, number)) = expect {
        ensure!(
            &bundle.pr.repo_id == repo && bundle.pr.number == number,
            "bundle {} holds {} #{}, not {repo} #{number}",
            dir.display(),
            bundle.pr.repo_id,
            bundle.pr.number
        );
    }
    let responses = responses(cfg, Some(&bundle))?;
    let budgets = cfg.budgets_over(bundle.manifest.budgets);
    let (session, backend_id) = session(cfg, responses, budgets.max_calls);
    let subject = Subject {
        pr: &bundle.pr,
        pre: &bundle.pre,
        post: &bundle.post,
        layout: bundle.layout(),
    };
    let note = Some(format!("bundle: {}", dir.display()));
    if cfg.mode == Mode::Replay {
        let sandbox = StubSandbox::new(bundle.executions.clone());
        let replay_cfg = RunConfig {
            sandbox: crate::config::SandboxConfig {
                timeout: bundle.timeout(),
                ..cfg.sandbox.clone()
            },
            ..cfg.clone()
        };
        execute(&replay_cfg, subject, &session, backend_id.as_deref(), &sandbox, budgets, note)
    } else {
        let root = bundle.pre.root().context("bundle pre tree has no directory")?;
        let tag = format!("{}-{}", bundle.pr.repo_id.slug(), bundle.pr.number);
        let sandbox = real_sandbox(cfg, root, &tag)?;
        execute(cfg, subject, &session, backend_id.as_deref(), sandbox.as_ref(), budgets, note)
    }
}

/// Fetches the PR and both snapshots from the forge and analyzes it.
pub fn run_forge(cfg: &RunConfig, repo: &RepoId, number: u64) -> Result<RunOutcome> {
    let responses = responses(cfg, None)?;
    let token = std::env::var(&cfg.forge.token_env).ok().filter(|t| !t.is_empty());
    let forge = GitHubForge::new(&cfg.forge.api_base, token);
    let pr = forge
        .fetch_pr(repo, number)
        .with_context(|| format!("fetching {repo} #{number}"))?;
    let remote = format!("{}/{repo}.git", cfg.forge.clone_base.trim_end_matches('/'));
    let cache = SnapshotCache::new(&cfg.forge.cache_dir);
    let pre = cache
        .load(repo, &pr.base_commit, &remote)
        .with_context(|| format!("checking out base {}", pr.base_commit))?;
    let post = cache
        .load(repo, &pr.head_commit, &remote)
        .with_context(|| format!("checking out head {}", pr.head_commit))?;
    let (session, backend_id) = session(cfg, responses, cfg.budgets.max_calls);
    let root = pre.root().context("snapshot has no directory")?.to_path_buf();
    let tag = format!("{}-{}", repo.slug(), pr.base_commit);
    let sandbox = real_sandbox(cfg, &root, &tag)?;
    let subject = Subject {
        pr: &pr,
        pre: &pre,
        post: &post,
        layout: PackageMap::from_snapshot(&pre),
    };
    execute(cfg, subject, &session, backend_id.as_deref(), sandbox.as_ref(), cfg.budgets, None)
}
