mod batch;
mod config;
mod inspect;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use patchsentry_core::ingestion::RepoId;
use patchsentry_core::llm::Mode;
use patchsentry_core::orchestrator::{ValidationReport, REPORT_FILE};
use tracing_subscriber::EnvFilter;

use crate::config::{ConfigArgs, RunConfig};

/// Checks that a pull request's code does what its description says.
#[derive(Parser)]
#[command(name = "patchsentry", version)]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    /// More log output on stderr; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze one pull request.
    Analyze {
        /// Repository as `owner/name`.
        repo: RepoId,
        pr: u64,
        /// Read the PR, snapshots and recordings from a bundle instead of the forge.
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
    /// Analyze every `owner/name number` line of a manifest.
    Batch {
        manifest: PathBuf,
        /// Directory holding one bundle per PR, named `<owner>__<name>__<pr>`.
        #[arg(long)]
        bundle_root: Option<PathBuf>,
    },
    /// Re-run a bundle from its transcript and recorded executions.
    Replay {
        bundle: PathBuf,
        /// Compare the report with the bundle's expected/report.json.
        #[arg(long)]
        check: bool,
    },
    /// Mutation score of a finished run's oracle.
    Score {
        run_dir: PathBuf,
        /// Source tree put on the import path while scoring.
        #[arg(long)]
        source_root: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Print a run directory's report and event log.
    Inspect {
        run_dir: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    let filter = EnvFilter::try_from_env("PATCHSENTRY_LOG").unwrap_or_else(|_| EnvFilter::new(default));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_target(false)
        .init();
}

fn report_exit(report: &ValidationReport) -> u8 {
    report.verdict.exit_code() as u8
}

fn dispatch(cli: Cli) -> Result<u8> {
    let mut cfg = RunConfig::resolve(&cli.config)?;
    match cli.command {
        Command::Analyze { repo, pr, bundle } => {
            let outcome = match &bundle {
                Some(dir) => run::run_bundle(&cfg, dir, Some((&repo, pr)))?,
                None => {
                    run::preflight(&cfg, None)?;
                    run::run_forge(&cfg, &repo, pr)?
                }
            };
            print!("{}", outcome.report.render_text());
            println!("  artifacts: {}", outcome.run_dir.display());
            Ok(report_exit(&outcome.report))
        }
        Command::Batch { manifest, bundle_root } => {
            let summary = batch::run(&cfg, &manifest, bundle_root.as_deref())?;
            print!("{}", batch::render(&summary));
            Ok(u8::from(summary.totals.failed > 0))
        }
        Command::Replay { bundle, check } => {
            cfg.mode = Mode::Replay;
            let outcome = run::run_bundle(&cfg, &bundle, None)?;
            print!("{}", outcome.report.render_text());
            println!("  artifacts: {}", outcome.run_dir.display());
            if check {
                let path = bundle.join("expected").join(REPORT_FILE);
                let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                let expected: ValidationReport =
                    serde_json::from_str(&text).with_context(|| format!("decoding {}", path.display()))?;
                if expected != outcome.report {
                    bail!("replayed report differs from {}", path.display());
                }
                println!("  matches {}", path.display());
            }
            Ok(report_exit(&outcome.report))
        }
        Command::Score {
            run_dir,
            source_root,
            json,
        } => {
            let report = inspect::score(&cfg, &run_dir, source_root.as_deref())?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", inspect::render_score(&report));
            }
            Ok(0)
        }
        Command::Inspect { run_dir, json } => {
            print!("{}", inspect::inspect(&run_dir, json)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
