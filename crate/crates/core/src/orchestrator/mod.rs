//! The inference loop: infer, execute, then enhance, review or repair
//! until a verdict or a budget is reached.

mod artifacts;
mod log;
mod pipeline;
mod report;
mod state;

pub use artifacts::{read_run_dir, run_dir_path, write_run_dir, RunDirError, RunMetadata, METADATA_FILE, REPORT_FILE, RUN_LOG_FILE, TRANSCRIPT_FILE};
pub use log::{RunEvent, RunLog};
pub use pipeline::{ExecutionEntry, Pipeline, PipelineError, PipelineFailure, RunRecord};
pub use report::{BudgetSummary, Termination, ValidationReport, Verdict, Warning, REPORT_SCHEMA_VERSION};
pub use state::{next_action, Action, Budgets, OrchestratorState};
