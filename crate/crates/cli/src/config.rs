//! Run configuration. Every setting resolves as flag, then environment
//! variable, then config file, then built-in default.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use patchsentry_core::llm::Mode;
use patchsentry_core::orchestrator::Budgets;
use patchsentry_core::sandbox::DEFAULT_TIMEOUT;
use serde::Deserialize;

pub const DEFAULT_BACKEND_URL: &str = "https://api.openai.com/v1";
pub const DEFAULT_MODEL: &str = "gpt-4o-mini";
pub const DEFAULT_API_KEY_ENV: &str = "PATCHSENTRY_API_KEY";
pub const DEFAULT_OUTPUT_DIR: &str = "runs";
pub const DEFAULT_CACHE_DIR: &str = ".patchsentry/cache";
pub const DEFAULT_IMAGE: &str = "python:3.11-slim";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Live,
    Record,
    Replay,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Live => Mode::Live,
            ModeArg::Record => Mode::Record,
            ModeArg::Replay => Mode::Replay,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SandboxKind {
    /// Local interpreter in a scratch directory; no network isolation.
    Subprocess,
    /// One throwaway container per execution.
    Container,
}

/// Settings shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long, global = true, env = "PATCHSENTRY_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, env = "PATCHSENTRY_MODE", value_enum)]
    pub mode: Option<ModeArg>,
    /// Root of the per-run artifact directories.
    #[arg(long, global = true, env = "PATCHSENTRY_OUTPUT_DIR")]
    pub output_dir: Option<PathBuf>,
    /// Transcript served in replay mode.
    #[arg(long, global = true, env = "PATCHSENTRY_TRANSCRIPT")]
    pub transcript: Option<PathBuf>,
    /// Base URL of an OpenAI-compatible endpoint.
    #[arg(long, global = true, env = "PATCHSENTRY_BACKEND_URL")]
    pub backend_url: Option<String>,
    #[arg(long, global = true, env = "PATCHSENTRY_MODEL")]
    pub model: Option<String>,
    #[arg(long, global = true, env = "PATCHSENTRY_TEMPERATURE")]
    pub temperature: Option<f32>,
    /// LLM call budget per PR.
    #[arg(long, global = true, env = "PATCHSENTRY_MAX_CALLS")]
    pub max_calls: Option<u32>,
    /// Enhancement iterations per PR.
    #[arg(long, global = true, env = "PATCHSENTRY_MAX_ITERATIONS")]
    pub max_iterations: Option<u32>,
    #[arg(long, global = true, env = "PATCHSENTRY_REVIEW_CAP")]
    pub review_cap: Option<u32>,
    #[arg(long, global = true, env = "PATCHSENTRY_REPAIR_CAP")]
    pub repair_cap: Option<u32>,
    #[arg(long, global = true, env = "PATCHSENTRY_FORMAT_RETRIES")]
    pub format_retries: Option<u32>,
    #[arg(long, global = true, env = "PATCHSENTRY_SANDBOX", value_enum)]
    pub sandbox: Option<SandboxKind>,
    /// Interpreter for the subprocess sandbox.
    #[arg(long, global = true, env = "PATCHSENTRY_PYTHON")]
    pub python: Option<PathBuf>,
    /// In-sandbox runner script.
    #[arg(long, global = true, env = "PATCHSENTRY_SHIM")]
    pub shim: Option<PathBuf>,
    /// Image for the container sandbox.
    #[arg(long, global = true, env = "PATCHSENTRY_IMAGE")]
    pub image: Option<String>,
    /// Per-execution timeout in seconds.
    #[arg(long, global = true, env = "PATCHSENTRY_TIMEOUT")]
    pub timeout: Option<u64>,
    /// Parallel pipelines in batch mode.
    #[arg(long, global = true, env = "PATCHSENTRY_JOBS")]
    pub jobs: Option<usize>,
    /// Snapshot cache directory.
    #[arg(long, global = true, env = "PATCHSENTRY_CACHE_DIR")]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    mode: Option<ModeArg>,
    output_dir: Option<PathBuf>,
    transcript: Option<PathBuf>,
    jobs: Option<usize>,
    #[serde(default)]
    backend: FileBackend,
    #[serde(default)]
    budgets: FileBudgets,
    #[serde(default)]
    sandbox: FileSandbox,
    #[serde(default)]
    forge: FileForge,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileBackend {
    base_url: Option<String>,
    model: Option<String>,
    api_key_env: Option<String>,
    temperature: Option<f32>,
    max_output_tokens: Option<u32>,
    request_timeout_secs: Option<u64>,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileBudgets {
    pub max_calls: Option<u32>,
    pub max_iterations: Option<u32>,
    pub review_cap: Option<u32>,
    pub repair_cap: Option<u32>,
    pub format_retries: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSandbox {
    kind: Option<SandboxKind>,
    python: Option<PathBuf>,
    shim: Option<PathBuf>,
    image: Option<String>,
    docker: Option<PathBuf>,
    timeout_secs: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileForge {
    api_base: Option<String>,
    clone_base: Option<String>,
    token_env: Option<String>,
    cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendConfig {
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the API key; empty for keyless servers.
    pub api_key_env: String,
    pub temperature: f32,
    pub max_output_tokens: u32,
    pub request_timeout: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandboxConfig {
    pub kind: SandboxKind,
    pub python: PathBuf,
    pub shim: Option<PathBuf>,
    pub image: String,
    pub docker: PathBuf,
    pub timeout: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForgeConfig {
    pub api_base: String,
    /// Prefix of clone URLs; `<clone_base>/<owner>/<name>.git`.
    pub clone_base: String,
    pub token_env: String,
    pub cache_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub backend: BackendConfig,
    pub budgets: Budgets,
    /// Budget values set explicitly by any source; these beat the budgets
    /// stored in a bundle.
    pub budget_overrides: FileBudgets,
    pub sandbox: SandboxConfig,
    pub mode: Mode,
    pub output_dir: PathBuf,
    pub transcript: Option<PathBuf>,
    pub forge: ForgeConfig,
    pub jobs: usize,
}

impl FileBudgets {
    pub fn apply(&self, base: Budgets) -> Budgets {
        Budgets {
            max_calls: self.max_calls.unwrap_or(base.max_calls),
            max_iterations: self.max_iterations.unwrap_or(base.max_iterations),
            review_cap: self.review_cap.unwrap_or(base.review_cap),
            repair_cap: self.repair_cap.unwrap_or(base.repair_cap),
            format_retries: self.format_retries.unwrap_or(base.format_retries),
        }
    }
}

fn load_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config file {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))
}

impl RunConfig {
    /// Resolves `args` (flags already merged with the environment by clap)
    /// over the config file and defaults.
    pub fn resolve(args: &ConfigArgs) -> Result<Self> {
        let file = match &args.config {
            Some(p) => load_file(p)?,
            None => FileConfig::default(),
        };
        let overrides = FileBudgets {
            max_calls: args.max_calls.or(file.budgets.max_calls),
            max_iterations: args.max_iterations.or(file.budgets.max_iterations),
            review_cap: args.review_cap.or(file.budgets.review_cap),
            repair_cap: args.repair_cap.or(file.budgets.repair_cap),
            format_retries: args.format_retries.or(file.budgets.format_retries),
        };
        let cfg = RunConfig {
            backend: BackendConfig {
                base_url: args
                    .backend_url
                    .clone()
                    .or(file.backend.base_url)
                    .unwrap_or_else(|| DEFAULT_BACKEND_URL.into()),
                model: args.model.clone().or(file.backend.model).unwrap_or_else(|| DEFAULT_MODEL.into()),
                api_key_env: file.backend.api_key_env.unwrap_or_else(|| DEFAULT_API_KEY_ENV.into()),
                temperature: args
                    .temperature
                    .or(file.backend.temperature)
                    .unwrap_or(patchsentry_core::llm::gateway::DEFAULT_TEMPERATURE),
                max_output_tokens: file
                    .backend
                    .max_output_tokens
                    .unwrap_or(patchsentry_core::llm::gateway::DEFAULT_MAX_OUTPUT_TOKENS),
                request_timeout: Duration::from_secs(file.backend.request_timeout_secs.unwrap_or(300)),
            },
            budgets: overrides.apply(Budgets::default()),
            budget_overrides: overrides,
            sandbox: SandboxConfig {
                kind: args.sandbox.or(file.sandbox.kind).unwrap_or(SandboxKind::Subprocess),
                python: args
                    .python
                    .clone()
                    .or(file.sandbox.python)
                    .unwrap_or_else(|| patchsentry_core::sandbox::default_interpreter().to_path_buf()),
                shim: args.shim.clone().or(file.sandbox.shim),
                image: args.image.clone().or(file.sandbox.image).unwrap_or_else(|| DEFAULT_IMAGE.into()),
                docker: file.sandbox.docker.unwrap_or_else(|| "docker".into()),
                timeout: Duration::from_secs(
                    args.timeout
                        .or(file.sandbox.timeout_secs)
                        .unwrap_or(DEFAULT_TIMEOUT.as_secs()),
                ),
            },
            mode: args.mode.or(file.mode).unwrap_or(ModeArg::Live).into(),
            output_dir: args
                .output_dir
                .clone()
                .or(file.output_dir)
                .unwrap_or_else(|| DEFAULT_OUTPUT_DIR.into()),
            transcript: args.transcript.clone().or(file.transcript),
            forge: ForgeConfig {
                api_base: file
                    .forge
                    .api_base
                    .unwrap_or_else(|| patchsentry_core::ingestion::forge::DEFAULT_API_BASE.into()),
                clone_base: file.forge.clone_base.unwrap_or_else(|| "https://github.com".into()),
                token_env: file
                    .forge
                    .token_env
                    .unwrap_or_else(|| patchsentry_core::ingestion::forge::TOKEN_ENV.into()),
                cache_dir: args
                    .cache_dir
                    .clone()
                    .or(file.forge.cache_dir)
                    .unwrap_or_else(|| DEFAULT_CACHE_DIR.into()),
            },
            jobs: args.jobs.or(file.jobs).unwrap_or(1),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let b = &self.budgets;
        for (name, v) in [
            ("max-calls", b.max_calls),
            ("max-iterations", b.max_iterations),
            ("review-cap", b.review_cap),
            ("repair-cap", b.repair_cap),
        ] {
            if v == 0 {
                bail!("--{name} must be at least 1");
            }
        }
        if self.sandbox.timeout.is_zero() {
            bail!("--timeout must be at least 1 second");
        }
        if self.jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        if !(0.0..=2.0).contains(&self.backend.temperature) {
            bail!("--temperature must lie in [0, 2], got {}", self.backend.temperature);
        }
        Ok(())
    }

    /// Budgets for a bundle: explicit settings over the bundle's own.
    pub fn budgets_over(&self, bundle: Budgets) -> Budgets {
        self.budget_overrides.apply(bundle)
    }
}
