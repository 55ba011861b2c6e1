//! Many pull requests from a manifest, run in parallel with isolated
//! artifacts.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use patchsentry_core::ingestion::RepoId;
use patchsentry_core::llm::Mode;
use patchsentry_core::orchestrator::Verdict;
use rayon::prelude::*;
use serde::Serialize;
use tracing::warn;

use crate::config::RunConfig;
use crate::run::{run_bundle, run_forge, RunOutcome};

pub const SUMMARY_FILE: &str = "summary.json";
pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub repo: RepoId,
    pub pr: u64,
}

/// Parses `owner/name number` lines. Blank lines and `#` comments are
/// ignored; repeated entries are dropped with a warning.
pub fn parse_manifest(text: &str) -> Result<(Vec<Entry>, usize)> {
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    let mut duplicates = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(repo), Some(pr), None) = (parts.next(), parts.next(), parts.next()) else {
            bail!("manifest line {}: expected `owner/name number`, got {raw:?}", i + 1);
        };
        let repo: RepoId = repo.parse().with_context(|| format!("manifest line {}", i + 1))?;
        let pr: u64 = pr
            .parse()
            .with_context(|| format!("manifest line {}: bad PR number {pr:?}", i + 1))?;
        if !seen.insert((repo.clone(), pr)) {
            warn!("manifest line {}: duplicate entry {repo} {pr} skipped", i + 1);
            duplicates += 1;
            continue;
        }
        entries.push(Entry { repo, pr });
    }
    Ok((entries, duplicates))
}

#[derive(Debug, Serialize)]
pub struct Row {
    pub repo: String,
    pub pr: u64,
    pub verdict: Option<Verdict>,
    pub error: Option<String>,
    pub oracle_revision: Option<u32>,
    pub oracles: usize,
    pub warnings: usize,
    pub llm_calls: u32,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub run_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Serialize)]
pub struct Totals {
    pub runs: usize,
    pub consistent: usize,
    pub inconsistent: usize,
    pub inconclusive: usize,
    pub failed: usize,
    pub skipped_duplicates: usize,
    /// Runs that produced at least one oracle.
    pub with_oracle: usize,
    pub oracles: usize,
    pub warnings: usize,
    pub llm_calls: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub runs: Vec<Row>,
    pub totals: Totals,
}

fn row(entry: &Entry, result: Result<RunOutcome>) -> Row {
    match result {
        Ok(o) => {
            let b = &o.report.budget_summary;
            Row {
                repo: entry.repo.to_string(),
                pr: entry.pr,
                verdict: Some(o.report.verdict),
                error: None,
                oracle_revision: o.report.oracle_revision,
                oracles: o.oracles,
                warnings: o.report.warnings.len(),
                llm_calls: b.llm_calls,
                input_tokens: b.input_tokens,
                output_tokens: b.output_tokens,
                run_dir: Some(o.run_dir),
            }
        }
        Err(e) => Row {
            repo: entry.repo.to_string(),
            pr: entry.pr,
            verdict: None,
            error: Some(format!("{e:#}")),
            oracle_revision: None,
            oracles: 0,
            warnings: 0,
            llm_calls: 0,
            input_tokens: 0,
            output_tokens: 0,
            run_dir: None,
        },
    }
}

fn totals(rows: &[Row], skipped_duplicates: usize) -> Totals {
    let mut t = Totals {
        runs: rows.len(),
        skipped_duplicates,
        ..Totals::default()
    };
    for r in rows {
        match r.verdict {
            Some(Verdict::Consistent) => t.consistent += 1,
            Some(Verdict::Inconsistent) => t.inconsistent += 1,
            Some(Verdict::Inconclusive) => t.inconclusive += 1,
            None => t.failed += 1,
        }
        t.with_oracle += usize::from(r.oracles > 0);
        t.oracles += r.oracles;
        t.warnings += r.warnings;
        t.llm_calls += u64::from(r.llm_calls);
        t.input_tokens += r.input_tokens;
        t.output_tokens += r.output_tokens;
    }
    t
}

pub fn run(cfg: &RunConfig, manifest: &Path, bundle_root: Option<&Path>) -> Result<Summary> {
    if cfg.mode == Mode::Replay && bundle_root.is_none() {
        bail!("batch replay needs --bundle-root DIR holding one bundle per PR");
    }
    if cfg.mode == Mode::Replay && cfg.transcript.is_some() {
        bail!("--transcript names a single run; batch replay reads each bundle's own transcript");
    }
    let text = std::fs::read_to_string(manifest).with_context(|| format!("reading manifest {}", manifest.display()))?;
    let (entries, duplicates) = parse_manifest(&text)?;
    if bundle_root.is_none() {
        crate::run::preflight(cfg, None)?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .context("starting worker pool")?;
    let rows: Vec<Row> = pool.install(|| {
        entries
            .par_iter()
            .map(|e| {
                let result = match bundle_root {
                    Some(root) => {
                        let dir = root.join(format!("{}__{}", e.repo.slug(), e.pr));
                        run_bundle(cfg, &dir, Some((&e.repo, e.pr)))
                    }
                    None => run_forge(cfg, &e.repo, e.pr),
                };
                if let Err(err) = &result {
                    warn!("{} #{} failed: {err:#}", e.repo, e.pr);
                }
                row(e, result)
            })
            .collect()
    });

    let summary = Summary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        totals: totals(&rows, duplicates),
        runs: rows,
    };
    std::fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display()))?;
    let path = cfg.output_dir.join(SUMMARY_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(summary)
}

pub fn render(summary: &Summary) -> String {
    let mut out = format!(
        "{:<40} {:>6}  {:<12} {:>6} {:>8} {:>6} {:>9} {:>9}\n",
        "repo", "pr", "verdict", "oracle", "warnings", "calls", "in", "out"
    );
    for r in &summary.runs {
        let verdict = r.verdict.map_or("error".to_string(), |v| v.to_string());
        let rev = r.oracle_revision.map_or("-".to_string(), |v| v.to_string());
        out.push_str(&format!(
            "{:<40} {:>6}  {:<12} {:>6} {:>8} {:>6} {:>9} {:>9}\n",
            r.repo, r.pr, verdict, rev, r.warnings, r.llm_calls, r.input_tokens, r.output_tokens
        ));
        if let Some(e) = &r.error {
            out.push_str(&format!("    {e}\n"));
        }
    }
    let t = &summary.totals;
    out.push_str(&format!(
        "{:<40} {:>6}  {:<12} {:>6} {:>8} {:>6} {:>9} {:>9}\n",
        "total", t.runs, "", t.with_oracle, t.warnings, t.llm_calls, t.input_tokens, t.output_tokens
    ));
    out.push_str(&format!(
        "{} consistent, {} inconsistent, {} inconclusive, {} failed; {} runs produced an oracle; {} duplicate entries skipped\n",
        t.consistent, t.inconsistent, t.inconclusive, t.failed, t.with_oracle, t.skipped_duplicates
    ));
    out
}
