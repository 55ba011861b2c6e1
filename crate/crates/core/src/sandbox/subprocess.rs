use std::io::Read;
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use tracing::debug;

use super::{RawOutcome, Sandbox, SandboxError};

pub const PROGRAM_FILE: &str = "program.py";

/// Runs programs with a local interpreter inside a throwaway working
/// directory. Offers no network isolation.
#[derive(Debug, Clone)]
pub struct SubprocessSandbox {
    interpreter: PathBuf,
    shim: Option<PathBuf>,
    python_path: Vec<PathBuf>,
    interpreter_args: Vec<String>,
}

impl SubprocessSandbox {
    pub fn new(interpreter: impl Into<PathBuf>) -> Self {
        Self {
            interpreter: interpreter.into(),
            shim: None,
            python_path: Vec::new(),
            interpreter_args: Vec::new(),
        }
    }

    /// Runs `<interpreter> <shim> program.py` instead of the program directly.
    pub fn with_shim(mut self, shim: impl Into<PathBuf>) -> Self {
        self.shim = Some(shim.into());
        self
    }

    /// Directories placed on the interpreter's import path.
    pub fn with_python_path(mut self, paths: impl IntoIterator<Item = PathBuf>) -> Self {
        self.python_path.extend(paths);
        self
    }

    /// Options passed to the interpreter before the program, e.g. `-S`.
    pub fn with_interpreter_args<S: Into<String>>(mut self, args: impl IntoIterator<Item = S>) -> Self {
        self.interpreter_args.extend(args.into_iter().map(Into::into));
        self
    }

    /// Checks that the interpreter starts.
    pub fn probe(&self) -> Result<(), SandboxError> {
        let status = Command::new(&self.interpreter)
            .arg("-c")
            .arg("pass")
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .status()
            .map_err(|e| SandboxError::Unavailable(format!("{}: {e}", self.interpreter.display())))?;
        if status.success() {
            Ok(())
        } else {
            Err(SandboxError::Unavailable(format!("{} exited with {status}", self.interpreter.display())))
        }
    }
}

fn reader<R: Read + Send + 'static>(mut r: R) -> JoinHandle<String> {
    std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = r.read_to_end(&mut buf);
        String::from_utf8_lossy(&buf).into_owned()
    })
}

/// Waits for `child`, killing its whole process group at `timeout`.
pub(crate) fn wait_with_timeout(mut child: Child, timeout: Duration) -> Result<RawOutcome, SandboxError> {
    let stdout = reader(child.stdout.take().expect("piped stdout"));
    let stderr = reader(child.stderr.take().expect("piped stderr"));
    let start = Instant::now();
    let mut timed_out = false;
    let status = loop {
        if let Some(status) = child.try_wait().map_err(|e| SandboxError::Io(e.to_string()))? {
            break status;
        }
        if start.elapsed() >= timeout {
            timed_out = true;
            // the child leads its own group; take every descendant with it
            unsafe {
                libc::kill(-(child.id() as i32), libc::SIGKILL);
            }
            break child.wait().map_err(|e| SandboxError::Io(e.to_string()))?;
        }
        std::thread::sleep(Duration::from_millis(5));
    };
    let elapsed = start.elapsed();
    let stdout = stdout.join().unwrap_or_default();
    let stderr = stderr.join().unwrap_or_default();
    Ok(RawOutcome {
        exit_code: if timed_out { None } else { status.code() },
        stdout,
        stderr,
        timed_out,
        duration_secs: if timed_out { timeout.as_secs_f64() } else { elapsed.as_secs_f64().min(timeout.as_secs_f64()) },
    })
}

impl Sandbox for SubprocessSandbox {
    fn id(&self) -> String {
        format!("subprocess:{}", self.interpreter.display())
    }

    fn run(&self, source: &str, timeout: Duration) -> Result<RawOutcome, SandboxError> {
        let dir = tempfile::Builder::new()
            .prefix("patchsentry-run-")
            .tempdir()
            .map_err(|e| SandboxError::Io(e.to_string()))?;
        let program = dir.path().join(PROGRAM_FILE);
        std::fs::write(&program, source).map_err(|e| SandboxError::Io(e.to_string()))?;

        let mut cmd = Command::new(&self.interpreter);
        cmd.args(&self.interpreter_args);
        if let Some(shim) = &self.shim {
            cmd.arg(shim);
        }
        cmd.arg(&program)
            .current_dir(dir.path())
            .env_clear()
            .env("HOME", dir.path())
            .env("TMPDIR", dir.path())
            .env("PYTHONDONTWRITEBYTECODE", "1")
            .env("PYTHONHASHSEED", "0")
            .env("PYTHONIOENCODING", "utf-8")
            .env("PYTHONUNBUFFERED", "1")
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .process_group(0);
        if let Some(path) = std::env::var_os("PATH") {
            cmd.env("PATH", path);
        }
        if !self.python_path.is_empty() {
            let joined = std::env::join_paths(&self.python_path).map_err(|e| SandboxError::Io(e.to_string()))?;
            cmd.env("PYTHONPATH", joined);
        }
        debug!(program = %program.display(), "spawning interpreter");
        let child = cmd
            .spawn()
            .map_err(|e| SandboxError::Unavailable(format!("{}: {e}", self.interpreter.display())))?;
        wait_with_timeout(child, timeout)
    }
}

/// Default interpreter: `python3` on `PATH`.
pub fn default_interpreter() -> &'static Path {
    Path::new("python3")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sandbox::{classify, StatusKind};

    fn sb() -> SubprocessSandbox {
        SubprocessSandbox::new(default_interpreter())
    }

    #[test]
    fn clean_run() {
        let out = sb().run("print('hi')\n", Duration::from_secs(20)).unwrap();
        assert_eq!(out.exit_code, Some(0));
        assert_eq!(out.stdout, "hi\n");
        assert_eq!(classify(&out).status, StatusKind::NoViolation);
    }

    #[test]
    fn timeout_kills_the_process_tree() {
        let src = "import subprocess, sys, time\nsubprocess.Popen([sys.executable, '-c', 'import time; time.sleep(60)'])\ntime.sleep(60)\n";
        let limit = Duration::from_millis(700);
        let start = Instant::now();
        let out = sb().run(src, limit).unwrap();
        assert!(start.elapsed() < Duration::from_secs(10), "grandchild kept the pipes open");
        assert!(out.timed_out);
        assert_eq!(out.duration_secs, limit.as_secs_f64());
        assert_eq!(classify(&out).status, StatusKind::Timeout);
    }

    #[test]
    fn python_path_is_honoured() {
        let lib = tempfile::tempdir().unwrap();
        std::fs::create_dir(lib.path().join("pkgx")).unwrap();
        std::fs::write(lib.path().join("pkgx/__init__.py"), "VALUE = 41\n").unwrap();
        let out = sb()
            .with_python_path([lib.path().to_path_buf()])
            .run("import pkgx\nprint(pkgx.VALUE + 1)\n", Duration::from_secs(20))
            .unwrap();
        assert_eq!(out.stdout.trim(), "42");
    }

    #[test]
    fn missing_interpreter_is_unavailable() {
        let err = SubprocessSandbox::new("/nonexistent/python").run("", Duration::from_secs(1)).unwrap_err();
        assert!(matches!(err, SandboxError::Unavailable(_)));
    }
}
