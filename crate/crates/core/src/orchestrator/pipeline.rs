use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, info, warn};

use super::log::{RunEvent, RunLog};
use super::report::{BudgetSummary, Termination, ValidationReport, Verdict, Warning, REPORT_SCHEMA_VERSION};
use super::state::{next_action, Action, Budgets, OrchestratorState};
use crate::context::{extract_context, CodeContext, ContextError, FunctionLocator, PackageMap};
use crate::ingestion::{
    gather_nl_artifacts, is_doc_path, is_target_pr, DistillOptions, FileStatus, FilterError, NlArtifacts,
    PullRequest, Snapshot,
};
use crate::llm::{
    parse_review_verdict, validate_and_parse_oracle, GatewayError, LlmResponse, LlmSession, Phase, PromptInputs,
    PromptTemplates,
};
use crate::oracle::{apply_oracle_edits, build_comparison_program, PatchOracle};
use crate::sandbox::{self, ExecutionResult, Sandbox, SandboxError, StatusKind};

#[derive(Debug, Error)]
pub enum PipelineFailure {
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error("no modified Python file yields a modified function")]
    NoModifiedFunction,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
}

/// An unrecoverable failure, with what was known when it happened.
#[derive(Debug, Error)]
#[error("{failure}")]
pub struct PipelineError {
    #[source]
    pub failure: PipelineFailure,
    pub state: Option<Box<OrchestratorState>>,
    pub log: RunLog,
}

/// One execution of a comparison program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionEntry {
    pub revision: u32,
    /// Built program; `None` when building failed.
    pub program: Option<String>,
    pub result: ExecutionResult,
}

/// Everything a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub report: ValidationReport,
    pub oracle: Option<PatchOracle>,
    /// Every accepted oracle revision, in order.
    pub oracles: Vec<PatchOracle>,
    pub executions: Vec<ExecutionEntry>,
    pub log: RunLog,
    pub nl: Option<NlArtifacts>,
    pub locator: Option<FunctionLocator>,
    pub context: Option<CodeContext>,
}

pub struct Pipeline<'a> {
    pub session: &'a LlmSession,
    pub templates: &'a PromptTemplates,
    pub sandbox: &'a dyn Sandbox,
    pub budgets: Budgets,
    pub timeout: Duration,
    pub distill: DistillOptions,
}

impl<'a> Pipeline<'a> {
    /// Filters the PR, extracts its context, gathers its text and runs the
    /// inference loop.
    pub fn analyze(
        &self,
        pr: &PullRequest,
        pre: &Snapshot,
        post: &Snapshot,
        layout: &PackageMap,
    ) -> Result<RunRecord, PipelineError> {
        let mut log = RunLog::default();
        let fail = |failure: PipelineFailure, log: &RunLog| PipelineError {
            failure,
            state: None,
            log: log.clone(),
        };

        let (accepted, reason) = is_target_pr(pr, pre, post).map_err(|e| fail(e.into(), &log))?;
        log.push(RunEvent::Filtered { accepted, reason });
        if !accepted {
            info!(pr = pr.number, ?reason, "not a target pull request");
            return Ok(self.finish_without_oracle(pr, log, Termination::NotTarget { reason }, None));
        }

        let (locator, ctx) = locate(pr, pre, post, layout).map_err(|e| fail(e, &log))?;
        log.push(RunEvent::ContextExtracted {
            path: locator.path.clone(),
            function: locator.name.clone(),
        });

        let before = self.session.calls();
        let nl = gather_nl_artifacts(pr, self.session, self.templates, self.distill);
        if self.session.calls() > before {
            let (i, o) = last_call_tokens(self.session);
            log.push(RunEvent::LlmCall {
                phase: Phase::Distillation,
                q: self.session.calls(),
                input_tokens: i,
                output_tokens: o,
            });
        }
        let nl = match nl {
            Ok(nl) => nl,
            Err(GatewayError::BudgetExhausted { .. }) => {
                let mut rec = self.finish_without_oracle(pr, log, Termination::BudgetExhausted, None);
                rec.locator = Some(locator);
                rec.context = Some(ctx);
                return Ok(rec);
            }
            Err(e) => return Err(fail(e.into(), &log)),
        };

        let mut rec = self.run_logged(pr, &nl, &ctx, log)?;
        rec.locator = Some(locator);
        rec.context = Some(ctx);
        Ok(rec)
    }

    /// The inference loop on an already accepted PR.
    pub fn run(&self, pr: &PullRequest, nl: &NlArtifacts, ctx: &CodeContext) -> Result<RunRecord, PipelineError> {
        let mut rec = self.run_logged(pr, nl, ctx, RunLog::default())?;
        rec.context = Some(ctx.clone());
        Ok(rec)
    }

    fn run_logged(
        &self,
        pr: &PullRequest,
        nl: &NlArtifacts,
        ctx: &CodeContext,
        log: RunLog,
    ) -> Result<RunRecord, PipelineError> {
        let mut run = Run {
            p: self,
            pr,
            nl,
            ctx,
            patch: pr.unified_diff(),
            log,
            oracles: Vec::new(),
            executions: Vec::new(),
            iter: 0,
            review_round: 0,
            repair_rounds: 0,
            current: None,
            last_result: None,
        };
        let stop = match run.drive() {
            Ok(never) => match never {},
            Err(stop) => stop,
        };
        match stop {
            Stop::Done {
                verdict,
                termination,
                warnings,
            } => Ok(run.finish(verdict, termination, warnings)),
            Stop::Fatal(failure) => {
                warn!(pr = pr.number, error = %failure, "pipeline failed");
                let state = run.current.clone().map(|o| Box::new(run.state(o)));
                Err(PipelineError {
                    failure,
                    state,
                    log: run.log,
                })
            }
        }
    }

    fn finish_without_oracle(
        &self,
        pr: &PullRequest,
        mut log: RunLog,
        termination: Termination,
        nl: Option<NlArtifacts>,
    ) -> RunRecord {
        let verdict = Verdict::Inconclusive;
        log.push(RunEvent::Terminated {
            verdict,
            termination: termination.clone(),
        });
        let (input_tokens, output_tokens) = self.session.tokens();
        RunRecord {
            report: ValidationReport {
                schema_version: REPORT_SCHEMA_VERSION,
                repo: pr.repo_id.clone(),
                pr: pr.number,
                verdict,
                termination,
                warnings: Vec::new(),
                oracle_revision: None,
                budget_summary: BudgetSummary {
                    llm_calls: self.session.calls(),
                    max_llm_calls: self.budgets.max_calls,
                    max_iterations: self.budgets.max_iterations,
                    input_tokens,
                    output_tokens,
                    ..Default::default()
                },
            },
            oracle: None,
            oracles: Vec::new(),
            executions: Vec::new(),
            log,
            nl,
            locator: None,
            context: None,
        }
    }
}

/// Extracts the context of the single modified function, trying each
/// modified Python file of the diff in order.
fn locate(
    pr: &PullRequest,
    pre: &Snapshot,
    post: &Snapshot,
    layout: &PackageMap,
) -> Result<(FunctionLocator, CodeContext), PipelineFailure> {
    let mut last_err = None;
    for fd in &pr.diff {
        let candidate = fd.path.ends_with(".py")
            && !is_doc_path(&fd.path)
            && !fd.binary
            && matches!(fd.status, FileStatus::Modified | FileStatus::Renamed);
        if !candidate {
            continue;
        }
        match extract_context(pre, post, fd, layout) {
            Ok(found) => return Ok(found),
            Err(e) => {
                debug!(path = %fd.path, error = %e, "no modified function here");
                last_err = Some(e);
            }
        }
    }
    Err(last_err.map_or(PipelineFailure::NoModifiedFunction, PipelineFailure::Context))
}

fn last_call_tokens(session: &LlmSession) -> (u64, u64) {
    session
        .transcript()
        .entries
        .last()
        .map_or((0, 0), |e| (e.input_tokens, e.output_tokens))
}

enum Never {}

enum Stop {
    Done {
        verdict: Verdict,
        termination: Termination,
        warnings: Vec<Warning>,
    },
    Fatal(PipelineFailure),
}

impl Stop {
    fn inconclusive(termination: Termination) -> Self {
        Stop::Done {
            verdict: Verdict::Inconclusive,
            termination,
            warnings: Vec::new(),
        }
    }
}

enum ReviewStep {
    Confirmed(Vec<Warning>),
    Revised(PatchOracle),
}

struct Run<'r, 'a> {
    p: &'r Pipeline<'a>,
    pr: &'r PullRequest,
    nl: &'r NlArtifacts,
    ctx: &'r CodeContext,
    patch: String,
    log: RunLog,
    oracles: Vec<PatchOracle>,
    executions: Vec<ExecutionEntry>,
    iter: u32,
    review_round: u32,
    repair_rounds: u32,
    current: Option<PatchOracle>,
    last_result: Option<ExecutionResult>,
}

impl Run<'_, '_> {
    fn q(&self) -> u32 {
        self.p.session.calls()
    }

    fn state(&self, oracle: PatchOracle) -> OrchestratorState {
        OrchestratorState {
            oracle,
            q: self.q(),
            m: self.p.budgets.max_calls,
            iter: self.iter,
            n: self.p.budgets.max_iterations,
            review_round: self.review_round,
            last_result: self.last_result.clone(),
        }
    }

    fn drive(&mut self) -> Result<Never, Stop> {
        let b = self.p.budgets;
        let mut oracle = self.ask_oracle(
            Phase::Inference,
            PromptInputs {
                nl: Some(self.nl),
                code: Some(self.ctx),
                ..Default::default()
            },
            0,
        )?;
        self.accept(&oracle);
        let mut result = self.execute(&oracle)?;
        // (signature, consecutive occurrences) of the error being repaired
        let mut repairing: Option<(String, u32)> = None;

        loop {
            let state = self.state(oracle.clone());
            let action = next_action(&state);
            self.log.push(RunEvent::Transition {
                action,
                status: result.status,
                q: state.q,
                iter: state.iter,
                review_round: state.review_round,
            });
            debug!(?action, status = %result.status, q = state.q, iter = state.iter, "transition");
            if action != Action::Repair {
                repairing = None;
            }
            oracle = match action {
                Action::TerminateBudget => return Err(Stop::inconclusive(Termination::BudgetExhausted)),
                Action::TerminateConsistent => {
                    return Err(Stop::Done {
                        verdict: Verdict::Consistent,
                        termination: Termination::IterationsExhausted,
                        warnings: Vec::new(),
                    })
                }
                Action::Enhance => {
                    self.iter += 1;
                    self.ask_oracle(
                        Phase::Enhancement,
                        PromptInputs {
                            nl: Some(self.nl),
                            code: Some(self.ctx),
                            oracle: Some(&oracle),
                            ..Default::default()
                        },
                        oracle.revision + 1,
                    )?
                }
                Action::SelfReview => {
                    if self.review_round >= b.review_cap {
                        return Err(Stop::inconclusive(Termination::ReviewCapReached));
                    }
                    self.review_round += 1;
                    match self.review(&oracle, &result)? {
                        ReviewStep::Confirmed(warnings) => {
                            return Err(Stop::Done {
                                verdict: Verdict::Inconsistent,
                                termination: Termination::TruePositive,
                                warnings,
                            })
                        }
                        ReviewStep::Revised(o) => o,
                    }
                }
                Action::Repair => {
                    let signature = result.error_signature();
                    let seen = match &repairing {
                        Some((s, n)) if *s == signature => n + 1,
                        _ => 1,
                    };
                    if seen > b.repair_cap {
                        return Err(Stop::inconclusive(Termination::UnresolvableError { signature }));
                    }
                    repairing = Some((signature, seen));
                    self.repair_rounds += 1;
                    let logs = result.log_text();
                    let report = error_report(&result);
                    self.ask_oracle(
                        Phase::Repair,
                        PromptInputs {
                            nl: Some(self.nl),
                            code: Some(self.ctx),
                            oracle: Some(&oracle),
                            execution_logs: Some(&logs),
                            error_report: Some(&report),
                            ..Default::default()
                        },
                        oracle.revision + 1,
                    )?
                }
            };
            self.accept(&oracle);
            result = self.execute(&oracle)?;
        }
    }

    fn accept(&mut self, oracle: &PatchOracle) {
        self.current = Some(oracle.clone());
        self.oracles.push(oracle.clone());
    }

    /// One charged model call.
    fn call(&mut self, phase: Phase, inputs: &PromptInputs<'_>) -> Result<LlmResponse, Stop> {
        if self.q() >= self.p.budgets.max_calls {
            return Err(Stop::inconclusive(Termination::BudgetExhausted));
        }
        let prompt = self
            .p
            .templates
            .build_prompt(phase, inputs)
            .expect("pipeline supplies every input the phase requires");
        match self.p.session.complete(&prompt) {
            Ok(resp) => {
                self.log.push(RunEvent::LlmCall {
                    phase,
                    q: self.q(),
                    input_tokens: resp.input_tokens,
                    output_tokens: resp.output_tokens,
                });
                Ok(resp)
            }
            Err(GatewayError::BudgetExhausted { .. }) => Err(Stop::inconclusive(Termination::BudgetExhausted)),
            Err(e) => Err(Stop::Fatal(e.into())),
        }
    }

    /// Asks for an oracle, re-asking with the problems found while the
    /// response is unusable.
    fn ask_oracle(&mut self, phase: Phase, base: PromptInputs<'_>, revision: u32) -> Result<PatchOracle, Stop> {
        let mut feedback: Option<Vec<String>> = None;
        for _ in 0..=self.p.budgets.format_retries {
            let inputs = PromptInputs {
                format_feedback: feedback.as_deref(),
                ..base
            };
            let resp = self.call(phase, &inputs)?;
            match validate_and_parse_oracle(&resp.text, revision) {
                Ok(oracle) => {
                    self.log.push(RunEvent::OracleAccepted {
                        phase,
                        revision,
                        assertions: oracle.assertions.len(),
                    });
                    return Ok(oracle);
                }
                Err(e) => {
                    warn!(?phase, reasons = ?e.reasons, "unusable response");
                    self.log.push(RunEvent::FormatRejected {
                        phase,
                        reasons: e.reasons.clone(),
                    });
                    feedback = Some(e.reasons);
                }
            }
        }
        Err(Stop::inconclusive(Termination::FormatRetriesExhausted {
            reasons: feedback.unwrap_or_default(),
        }))
    }

    fn review(&mut self, oracle: &PatchOracle, result: &ExecutionResult) -> Result<ReviewStep, Stop> {
        let logs = result.log_text();
        let report = error_report(result);
        let patch = self.patch.clone();
        let base = PromptInputs {
            nl: Some(self.nl),
            code: Some(self.ctx),
            oracle: Some(oracle),
            execution_logs: Some(&logs),
            error_report: Some(&report),
            patch: Some(&patch),
            ..Default::default()
        };
        let mut feedback: Option<Vec<String>> = None;
        for _ in 0..=self.p.budgets.format_retries {
            let inputs = PromptInputs {
                format_feedback: feedback.as_deref(),
                ..base
            };
            let resp = self.call(Phase::SelfReview, &inputs)?;
            let outcome = match parse_review_verdict(&resp.text) {
                Ok(o) => o,
                Err(e) => {
                    self.log.push(RunEvent::FormatRejected {
                        phase: Phase::SelfReview,
                        reasons: e.reasons.clone(),
                    });
                    feedback = Some(e.reasons);
                    continue;
                }
            };
            let true_positives: Vec<usize> = outcome
                .true_positives()
                .map(|a| a.index.unwrap_or_else(|| first_failing(result)))
                .collect();
            self.log.push(RunEvent::Reviewed {
                round: self.review_round,
                verdict: outcome.verdict,
                true_positives: true_positives.clone(),
                edits: outcome.edits.len(),
            });
            if !true_positives.is_empty() {
                let warnings = outcome
                    .true_positives()
                    .zip(true_positives)
                    .map(|(a, index)| Warning {
                        assertion_index: index,
                        assertion_message: oracle
                            .assertions
                            .get(index)
                            .map_or_else(|| result.message.clone(), |x| x.message.clone()),
                        justification: a.justification.clone(),
                    })
                    .collect();
                return Ok(ReviewStep::Confirmed(warnings));
            }
            match apply_oracle_edits(oracle, &outcome.edits) {
                Ok(revised) => {
                    self.log.push(RunEvent::OracleAccepted {
                        phase: Phase::SelfReview,
                        revision: revised.revision,
                        assertions: revised.assertions.len(),
                    });
                    return Ok(ReviewStep::Revised(revised));
                }
                Err(e) => {
                    let reason = format!("oracle edits could not be applied: {e}");
                    self.log.push(RunEvent::EditRejected { error: e.to_string() });
                    feedback = Some(vec![reason]);
                }
            }
        }
        Err(Stop::inconclusive(Termination::FormatRetriesExhausted {
            reasons: feedback.unwrap_or_default(),
        }))
    }

    /// Builds and runs the comparison program. A program that cannot be
    /// built counts as a syntax error of the oracle.
    fn execute(&mut self, oracle: &PatchOracle) -> Result<ExecutionResult, Stop> {
        let (program, result) = match build_comparison_program(oracle, self.ctx) {
            Ok(program) => {
                let result = sandbox::execute(self.p.sandbox, &program, self.p.timeout)
                    .map_err(|e| Stop::Fatal(e.into()))?;
                (Some(program.source), result)
            }
            Err(e) => {
                self.log.push(RunEvent::BuildFailed {
                    revision: oracle.revision,
                    error: e.to_string(),
                });
                let result = ExecutionResult {
                    status: StatusKind::SyntaxError,
                    message: format!("comparison program could not be built: {e}"),
                    stdout: String::new(),
                    stderr: String::new(),
                    assertion_records: Vec::new(),
                    duration_secs: 0.0,
                    report_problem: None,
                };
                (None, result)
            }
        };
        self.log.push(RunEvent::Executed {
            execution: self.executions.len(),
            revision: oracle.revision,
            status: result.status,
            message: result.message.clone(),
        });
        self.executions.push(ExecutionEntry {
            revision: oracle.revision,
            program,
            result: result.clone(),
        });
        self.last_result = Some(result.clone());
        Ok(result)
    }

    fn finish(mut self, verdict: Verdict, termination: Termination, warnings: Vec<Warning>) -> RunRecord {
        info!(pr = self.pr.number, %verdict, ?termination, "run finished");
        self.log.push(RunEvent::Terminated {
            verdict,
            termination: termination.clone(),
        });
        let (input_tokens, output_tokens) = self.p.session.tokens();
        let report = ValidationReport {
            schema_version: REPORT_SCHEMA_VERSION,
            repo: self.pr.repo_id.clone(),
            pr: self.pr.number,
            verdict,
            termination,
            warnings,
            oracle_revision: self.current.as_ref().map(|o| o.revision),
            budget_summary: BudgetSummary {
                llm_calls: self.q(),
                max_llm_calls: self.p.budgets.max_calls,
                iterations: self.iter,
                max_iterations: self.p.budgets.max_iterations,
                review_rounds: self.review_round,
                repair_rounds: self.repair_rounds,
                input_tokens,
                output_tokens,
            },
        };
        RunRecord {
            report,
            oracle: self.current,
            oracles: self.oracles,
            executions: self.executions,
            log: self.log,
            nl: Some(self.nl.clone()),
            locator: None,
            context: None,
        }
    }
}

fn first_failing(result: &ExecutionResult) -> usize {
    result.failing_indices().first().copied().unwrap_or(0)
}

/// The failure summary handed to review and repair prompts.
fn error_report(result: &ExecutionResult) -> String {
    let mut out = format!("{}: {}\n", result.status, result.message.trim());
    for r in result.assertion_records.iter().filter(|r| !r.passed) {
        out.push_str(&format!("assertion {} [{}] failed: {}\n", r.index, r.target, r.message));
        if let Some(detail) = &r.failure_detail {
            out.push_str(&format!("  {}\n", detail.trim_end().replace('\n', "\n  ")));
        }
    }
    out
}
