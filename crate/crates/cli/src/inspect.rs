//! Reading back run directories: `inspect` and `score`.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use patchsentry_core::adequacy::{generate_mutants, mutation_score, ScoreReport};
use patchsentry_core::context::CodeContext;
use patchsentry_core::oracle::PatchOracle;
use patchsentry_core::orchestrator::{read_run_dir, RunEvent};
use patchsentry_core::sandbox::{Sandbox, SubprocessSandbox};
use serde::Deserialize;

use crate::config::{RunConfig, SandboxKind};

fn describe(e: &RunEvent) -> String {
    match e {
        RunEvent::Filtered { accepted, reason } => format!("filter: accepted={accepted} ({reason:?})"),
        RunEvent::ContextExtracted { path, function } => format!("context: {function} in {path}"),
        RunEvent::LlmCall {
            phase,
            q,
            input_tokens,
            output_tokens,
        } => format!("llm call {q} ({phase:?}): {input_tokens} in / {output_tokens} out"),
        RunEvent::FormatRejected { phase, reasons } => format!("rejected {phase:?} response: {}", reasons.join("; ")),
        RunEvent::OracleAccepted {
            phase,
            revision,
            assertions,
        } => format!("oracle rev {revision} from {phase:?}: {assertions} assertions"),
        RunEvent::BuildFailed { revision, error } => format!("build of rev {revision} failed: {error}"),
        RunEvent::Executed {
            execution,
            revision,
            status,
            message,
        } => {
            let msg = if message.is_empty() { String::new() } else { format!(": {message}") };
            format!("execution {execution} (rev {revision}): {status:?}{msg}")
        }
        RunEvent::Transition {
            action,
            status,
            q,
            iter,
            review_round,
        } => format!("{status:?} -> {action:?} (q={q}, iter={iter}, review={review_round})"),
        RunEvent::Reviewed {
            round,
            verdict,
            true_positives,
            edits,
        } => format!("review {round}: {verdict:?}, confirmed {true_positives:?}, {edits} edits"),
        RunEvent::EditRejected { error } => format!("review edit rejected: {error}"),
        RunEvent::Terminated { verdict, termination } => format!("terminated: {verdict} ({termination:?})"),
    }
}

pub fn inspect(dir: &Path, json: bool) -> Result<String> {
    let (report, log) = read_run_dir(dir).with_context(|| format!("reading run directory {}", dir.display()))?;
    if json {
        let doc = serde_json::json!({ "report": report, "events": log.events });
        return Ok(serde_json::to_string_pretty(&doc)? + "\n");
    }
    let mut out = report.render_text();
    out.push_str("events:\n");
    for (i, e) in log.events.iter().enumerate() {
        out.push_str(&format!("  {i:>3}  {}\n", describe(e)));
    }
    Ok(out)
}

#[derive(Deserialize)]
struct ContextDoc {
    context: CodeContext,
}

/// Mutation score of the final oracle of a run. `source_root` is put on
/// the import path so that the function's dependencies resolve.
pub fn score(cfg: &RunConfig, dir: &Path, source_root: Option<&Path>) -> Result<ScoreReport> {
    let (report, _) = read_run_dir(dir).with_context(|| format!("reading run directory {}", dir.display()))?;
    let rev = report
        .oracle_revision
        .with_context(|| format!("{} ended without an oracle", dir.display()))?;
    let ctx_path = dir.join("context.json");
    let ctx: ContextDoc = serde_json::from_str(
        &std::fs::read_to_string(&ctx_path).with_context(|| format!("reading {}", ctx_path.display()))?,
    )
    .with_context(|| format!("decoding {}", ctx_path.display()))?;
    let oracle_path = dir.join(format!("oracles/rev-{rev:03}.json"));
    let oracle: PatchOracle = serde_json::from_str(
        &std::fs::read_to_string(&oracle_path).with_context(|| format!("reading {}", oracle_path.display()))?,
    )
    .with_context(|| format!("decoding {}", oracle_path.display()))?;

    let mutants = generate_mutants(&ctx.context.post_function).context("generating mutants")?;
    let sandbox: Box<dyn Sandbox> = match (cfg.sandbox.kind, source_root) {
        (SandboxKind::Container, Some(root)) => crate::run::real_sandbox(cfg, root, "score")?,
        _ => {
            let mut sb = SubprocessSandbox::new(&cfg.sandbox.python);
            if let Some(root) = source_root {
                sb = sb.with_python_path([root.to_path_buf()]);
            }
            if let Some(shim) = &cfg.sandbox.shim {
                sb = sb.with_shim(shim);
            }
            Box::new(sb)
        }
    };
    Ok(mutation_score(&oracle, &ctx.context, &mutants, sandbox.as_ref(), cfg.sandbox.timeout)?)
}

pub fn render_score(r: &ScoreReport) -> String {
    let mut per_op: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for m in &r.mutants {
        let e = per_op.entry(m.operator.to_string()).or_default();
        e.0 += usize::from(m.killed);
        e.1 += 1;
    }
    let score = r.score.map_or("n/a (no mutants)".to_string(), |s| format!("{s:.3}"));
    let mut out = format!("mutation score: {score} ({} of {} killed, {} timeouts)\n", r.killed, r.total, r.timeouts);
    for (op, (killed, total)) in per_op {
        out.push_str(&format!("  {op:<14} {killed}/{total}\n"));
    }
    out
}
