//! Isolated execution of comparison programs and outcome classification.

mod classify;
mod container;
pub mod report;
mod stub;
mod subprocess;

use std::time::Duration;

use thiserror::Error;

pub use classify::{classify, ExecutionResult, RawOutcome, StatusKind};
pub use container::ContainerSandbox;
pub use report::{AssertionRecord, ShimReport};
pub use stub::{program_sha256, RecordedExecution, RecordingSandbox, StubSandbox};
pub use subprocess::{default_interpreter, SubprocessSandbox};

use crate::oracle::ComparisonProgram;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SandboxError {
    #[error("sandbox backend unavailable: {0}")]
    Unavailable(String),
    #[error("image preparation failed: {0}")]
    ImagePreparationFailed(String),
    #[error("sandbox I/O: {0}")]
    Io(String),
    #[error("no recorded execution {index}")]
    StubExhausted { index: usize },
    #[error("recorded execution {index} is for program {expected}, got {actual}")]
    StubMismatch { index: usize, expected: String, actual: String },
}

/// An execution backend. Failures of the program itself are outcomes, not
/// errors.
pub trait Sandbox: Send + Sync {
    fn id(&self) -> String;
    fn run(&self, source: &str, timeout: Duration) -> Result<RawOutcome, SandboxError>;
}

/// Runs `program` once and classifies the outcome.
pub fn execute(sandbox: &dyn Sandbox, program: &ComparisonProgram, timeout: Duration) -> Result<ExecutionResult, SandboxError> {
    sandbox.run(&program.source, timeout).map(|raw| classify(&raw))
}
