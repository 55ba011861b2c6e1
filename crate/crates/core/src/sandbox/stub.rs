use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{RawOutcome, Sandbox, SandboxError};

pub fn program_sha256(source: &str) -> String {
    hex::encode(Sha256::digest(source.as_bytes()))
}

/// A captured execution: the program hash and what the process did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedExecution {
    /// Empty to accept any program.
    #[serde(default)]
    pub program_sha256: String,
    #[serde(flatten)]
    pub outcome: RawOutcome,
}

/// Replays recorded outcomes in order.
#[derive(Debug)]
pub struct StubSandbox {
    entries: Vec<RecordedExecution>,
    cursor: Mutex<usize>,
}

impl StubSandbox {
    pub fn new(entries: Vec<RecordedExecution>) -> Self {
        Self {
            entries,
            cursor: Mutex::new(0),
        }
    }

    pub fn consumed(&self) -> usize {
        *self.cursor.lock().unwrap_or_else(|p| p.into_inner())
    }
}

impl Sandbox for StubSandbox {
    fn id(&self) -> String {
        "stub".into()
    }

    fn run(&self, source: &str, _timeout: Duration) -> Result<RawOutcome, SandboxError> {
        let mut cursor = self.cursor.lock().unwrap_or_else(|p| p.into_inner());
        let index = *cursor;
        let entry = self.entries.get(index).ok_or(SandboxError::StubExhausted { index })?;
        let actual = program_sha256(source);
        if !entry.program_sha256.is_empty() && entry.program_sha256 != actual {
            return Err(SandboxError::StubMismatch {
                index,
                expected: entry.program_sha256.clone(),
                actual,
            });
        }
        *cursor += 1;
        Ok(entry.outcome.clone())
    }
}

/// Wraps another sandbox and keeps every outcome it produces.
pub struct RecordingSandbox {
    inner: Arc<dyn Sandbox>,
    log: Mutex<Vec<RecordedExecution>>,
}

impl RecordingSandbox {
    pub fn new(inner: Arc<dyn Sandbox>) -> Self {
        Self {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn recorded(&self) -> Vec<RecordedExecution> {
        self.log.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }
}

impl Sandbox for RecordingSandbox {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn run(&self, source: &str, timeout: Duration) -> Result<RawOutcome, SandboxError> {
        let outcome = self.inner.run(source, timeout)?;
        self.log
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .push(RecordedExecution {
                program_sha256: program_sha256(source),
                outcome: outcome.clone(),
            });
        Ok(outcome)
    }
}
