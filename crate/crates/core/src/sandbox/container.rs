use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use super::subprocess::{wait_with_timeout, PROGRAM_FILE};
use super::{RawOutcome, Sandbox, SandboxError};

const WORKDIR: &str = "/sandbox";

/// Runs programs in a container with networking disabled, through the
/// `docker` command-line client.
#[derive(Debug, Clone)]
pub struct ContainerSandbox {
    docker: PathBuf,
    image: String,
    interpreter: String,
    shim: Option<PathBuf>,
}

static RUN_COUNTER: AtomicU64 = AtomicU64::new(0);

impl ContainerSandbox {
    /// Connects to the container engine; fails when the client is missing
    /// or the daemon does not answer.
    pub fn connect(docker: impl Into<PathBuf>, image: impl Into<String>) -> Result<Self, SandboxError> {
        let docker = docker.into();
        let ok = Command::new(&docker)
            .args(["version", "--format", "{{.Server.Version}}"])
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .status()
            .map_err(|e| SandboxError::Unavailable(format!("{}: {e}", docker.display())))?
            .success();
        if !ok {
            return Err(SandboxError::Unavailable(format!("{} cannot reach a container daemon", docker.display())));
        }
        Ok(Self {
            docker,
            image: image.into(),
            interpreter: "python".into(),
            shim: None,
        })
    }

    pub fn with_shim(mut self, shim: impl Into<PathBuf>) -> Self {
        self.shim = Some(shim.into());
        self
    }

    pub fn image(&self) -> &str {
        &self.image
    }

    /// Builds `tag` from `base_image` with the snapshot at `subject_root`
    /// copied in and placed on the import path.
    pub fn prepare_image(&self, base_image: &str, subject_root: &Path, tag: &str) -> Result<(), SandboxError> {
        let dockerfile = format!(
            "FROM {base_image}\nCOPY . /subject\nRUN if [ -f /subject/pyproject.toml ] || [ -f /subject/setup.py ]; then pip install --no-deps /subject; fi\nENV PYTHONPATH=/subject\n"
        );
        let mut child = Command::new(&self.docker)
            .args(["build", "-t", tag, "-f", "-"])
            .arg(subject_root)
            .stdin(Stdio::piped())
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| SandboxError::Unavailable(e.to_string()))?;
        child
            .stdin
            .take()
            .expect("piped stdin")
            .write_all(dockerfile.as_bytes())
            .map_err(|e| SandboxError::ImagePreparationFailed(e.to_string()))?;
        let out = child
            .wait_with_output()
            .map_err(|e| SandboxError::ImagePreparationFailed(e.to_string()))?;
        if out.status.success() {
            Ok(())
        } else {
            Err(SandboxError::ImagePreparationFailed(
                String::from_utf8_lossy(&out.stderr).into_owned(),
            ))
        }
    }
}

impl Sandbox for ContainerSandbox {
    fn id(&self) -> String {
        format!("container:{}", self.image)
    }

    fn run(&self, source: &str, timeout: Duration) -> Result<RawOutcome, SandboxError> {
        let dir = tempfile::Builder::new()
            .prefix("patchsentry-ctr-")
            .tempdir()
            .map_err(|e| SandboxError::Io(e.to_string()))?;
        std::fs::write(dir.path().join(PROGRAM_FILE), source).map_err(|e| SandboxError::Io(e.to_string()))?;
        let name = format!(
            "patchsentry-{}-{}",
            std::process::id(),
            RUN_COUNTER.fetch_add(1, Ordering::SeqCst)
        );
        let mut args: Vec<String> = vec![
            "run".into(),
            "--rm".into(),
            "--network".into(),
            "none".into(),
            "--name".into(),
            name.clone(),
            "-v".into(),
            format!("{}:{WORKDIR}", dir.path().display()),
            "-w".into(),
            WORKDIR.into(),
            self.image.clone(),
            self.interpreter.clone(),
        ];
        if let Some(shim) = &self.shim {
            std::fs::copy(shim, dir.path().join("shim.py")).map_err(|e| SandboxError::Io(e.to_string()))?;
            args.push(format!("{WORKDIR}/shim.py"));
        }
        args.push(format!("{WORKDIR}/{PROGRAM_FILE}"));
        let child = Command::new(&self.docker)
            .args(&args)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| SandboxError::Unavailable(e.to_string()))?;
        let outcome = wait_with_timeout(child, timeout)?;
        if outcome.timed_out {
            let _ = Command::new(&self.docker)
                .args(["kill", &name])
                .stdout(Stdio::null())
                .stderr(Stdio::null())
                .status();
        }
        Ok(outcome)
    }
}
