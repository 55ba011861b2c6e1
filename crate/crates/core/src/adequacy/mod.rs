//! Oracle adequacy: mutate the patched function and count the mutants an
//! oracle kills.

mod mutate;

use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::CodeContext;
use crate::oracle::{build_comparison_program, BuildError, PatchOracle};
use crate::sandbox::{execute, Sandbox, SandboxError, StatusKind};

pub use mutate::{generate_mutants, MutateError, Mutant, MutationOperator};

pub const DEFAULT_MUTANT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Error)]
pub enum AdequacyError {
    #[error("oracle does not pass on the unmutated function ({status}): {message}")]
    NotGreen { status: StatusKind, message: String },
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutantResult {
    pub id: usize,
    pub operator: MutationOperator,
    pub status: StatusKind,
    pub killed: bool,
    pub timed_out: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    /// `killed / total`; `None` when there are no mutants.
    pub score: Option<f64>,
    pub killed: usize,
    pub total: usize,
    /// Killed by timeout, included in `killed`.
    pub timeouts: usize,
    pub mutants: Vec<MutantResult>,
}

impl ScoreReport {
    pub fn from_results(mutants: Vec<MutantResult>) -> Self {
        let total = mutants.len();
        let killed = mutants.iter().filter(|m| m.killed).count();
        let timeouts = mutants.iter().filter(|m| m.timed_out).count();
        Self {
            score: (total > 0).then(|| killed as f64 / total as f64),
            killed,
            total,
            timeouts,
            mutants,
        }
    }

    /// Score with timed-out mutants left out entirely.
    pub fn score_without_timeouts(&self) -> Option<f64> {
        let total = self.total - self.timeouts;
        (total > 0).then(|| (self.killed - self.timeouts) as f64 / total as f64)
    }

    pub fn kill_vector(&self) -> Vec<bool> {
        self.mutants.iter().map(|m| m.killed).collect()
    }
}

/// Runs `oracle` once per mutant with the post-patch function replaced by
/// the mutant. A mutant is killed when the run is anything but clean.
pub fn mutation_score(
    oracle: &PatchOracle,
    ctx: &CodeContext,
    mutants: &[Mutant],
    sandbox: &dyn Sandbox,
    timeout: Duration,
) -> Result<ScoreReport, AdequacyError> {
    let baseline = execute(sandbox, &build_comparison_program(oracle, ctx)?, timeout)?;
    if baseline.status != StatusKind::NoViolation {
        return Err(AdequacyError::NotGreen {
            status: baseline.status,
            message: baseline.message,
        });
    }
    let results = mutants
        .par_iter()
        .map(|m| {
            let mut mutated = ctx.clone();
            mutated.post_function = m.mutated_source.clone();
            let status = match build_comparison_program(oracle, &mutated) {
                Ok(program) => execute(sandbox, &program, timeout)?.status,
                // a mutant the builder rejects cannot run cleanly
                Err(_) => StatusKind::SyntaxError,
            };
            Ok(MutantResult {
                id: m.id,
                operator: m.operator,
                status,
                killed: status != StatusKind::NoViolation,
                timed_out: status == StatusKind::Timeout,
            })
        })
        .collect::<Result<Vec<_>, SandboxError>>()?;
    Ok(ScoreReport::from_results(results))
}
