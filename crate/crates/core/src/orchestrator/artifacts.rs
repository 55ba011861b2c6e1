//! On-disk layout of one run. Every file except `metadata.json` is a pure
//! function of the run, so two replays produce identical trees apart from
//! that one file.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::log::RunLog;
use super::pipeline::RunRecord;
use super::report::ValidationReport;
use crate::ingestion::RepoId;
use crate::llm::{Mode, Transcript};

pub const METADATA_FILE: &str = "metadata.json";
pub const REPORT_FILE: &str = "report.json";
pub const RUN_LOG_FILE: &str = "run_log.jsonl";
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";

#[derive(Debug, Error)]
pub enum RunDirError {
    #[error("cannot access {path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {reason}")]
    Decode { path: PathBuf, reason: String },
    #[error("{0} exists and is not a run directory; refusing to overwrite it")]
    NotRunDir(PathBuf),
}

/// Run provenance. The only artifact allowed to differ between replays.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool_version: String,
    pub template_version: String,
    pub backend: Option<String>,
    pub sandbox: String,
    pub mode: Mode,
    pub created_unix_secs: u64,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl RunMetadata {
    pub fn now(template_version: &str, backend: Option<&str>, sandbox: &str, mode: Mode) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            template_version: template_version.to_string(),
            backend: backend.map(str::to_string),
            sandbox: sandbox.to_string(),
            mode,
            created_unix_secs: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            notes: Vec::new(),
        }
    }
}

/// `<root>/<owner>__<name>__<pr>`.
pub fn run_dir_path(root: &Path, repo: &RepoId, pr: u64) -> PathBuf {
    root.join(format!("{}__{pr}", repo.slug()))
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> RunDirError + '_ {
    move |source| RunDirError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write(path: &Path, contents: &str) -> Result<(), RunDirError> {
    fs::write(path, contents).map_err(io(path))
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("artifact serializes") + "\n"
}

/// Writes the artifact tree of `record` into `dir`, replacing a previous
/// run directory at the same place.
pub fn write_run_dir(
    dir: &Path,
    record: &RunRecord,
    transcript: &Transcript,
    metadata: &RunMetadata,
) -> Result<(), RunDirError> {
    if dir.exists() {
        if !dir.join(METADATA_FILE).is_file() && fs::read_dir(dir).map_err(io(dir))?.next().is_some() {
            return Err(RunDirError::NotRunDir(dir.to_path_buf()));
        }
        fs::remove_dir_all(dir).map_err(io(dir))?;
    }
    for sub in ["oracles", "programs", "executions"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(io(&p))?;
    }

    write(&dir.join(METADATA_FILE), &json(metadata))?;
    write(&dir.join(REPORT_FILE), &json(&record.report))?;
    write(&dir.join(RUN_LOG_FILE), &record.log.to_jsonl())?;
    write(&dir.join(TRANSCRIPT_FILE), &transcript.to_jsonl())?;
    if let Some(nl) = &record.nl {
        write(&dir.join("nl_artifacts.json"), &json(nl))?;
    }
    if let Some(ctx) = &record.context {
        let doc = serde_json::json!({ "locator": record.locator, "context": ctx });
        write(&dir.join("context.json"), &json(&doc))?;
    }
    for o in &record.oracles {
        write(&dir.join(format!("oracles/rev-{:03}.json", o.revision)), &json(o))?;
        write(&dir.join(format!("oracles/rev-{:03}.py", o.revision)), &o.program_template)?;
    }
    for (i, e) in record.executions.iter().enumerate() {
        if let Some(src) = &e.program {
            write(&dir.join(format!("programs/exec-{i:03}.py")), src)?;
        }
        write(&dir.join(format!("executions/exec-{i:03}.json")), &json(e))?;
    }
    Ok(())
}

/// Reads back the report and run log of a run directory.
pub fn read_run_dir(dir: &Path) -> Result<(ValidationReport, RunLog), RunDirError> {
    let read = |name: &str| {
        let p = dir.join(name);
        fs::read_to_string(&p).map_err(|source| RunDirError::Io { path: p, source })
    };
    let decode = |name: &str, e: serde_json::Error| RunDirError::Decode {
        path: dir.join(name),
        reason: e.to_string(),
    };
    let report = serde_json::from_str(&read(REPORT_FILE)?).map_err(|e| decode(REPORT_FILE, e))?;
    let log = RunLog::from_jsonl(&read(RUN_LOG_FILE)?).map_err(|e| decode(RUN_LOG_FILE, e))?;
    Ok((report, log))
}
