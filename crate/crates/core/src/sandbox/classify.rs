use std::fmt;

use serde::{Deserialize, Serialize};

use super::report::{scan_report, AssertionRecord, ReportScan};
use crate::oracle::{target_tag, Target};

/// Outcome category of one execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "target")]
pub enum StatusKind {
    NoViolation,
    /// Carries the target of the first failing assertion.
    AssertionViolation(Target),
    SyntaxError,
    RuntimeError,
    Timeout,
}

impl fmt::Display for StatusKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatusKind::NoViolation => f.write_str("NoViolation"),
            StatusKind::AssertionViolation(t) => write!(f, "AssertionViolation({t})"),
            StatusKind::SyntaxError => f.write_str("SyntaxError"),
            StatusKind::RuntimeError => f.write_str("RuntimeError"),
            StatusKind::Timeout => f.write_str("Timeout"),
        }
    }
}

/// What the process did, before interpretation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawOutcome {
    /// `None` when the process was killed by a signal.
    pub exit_code: Option<i32>,
    pub stdout: String,
    pub stderr: String,
    pub timed_out: bool,
    pub duration_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub status: StatusKind,
    /// First failing diagnostic; empty for a clean run.
    pub message: String,
    pub stdout: String,
    pub stderr: String,
    pub assertion_records: Vec<AssertionRecord>,
    pub duration_secs: f64,
    /// Why a report block present in stdout was ignored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_problem: Option<String>,
}

impl ExecutionResult {
    /// Zero-based indices of failing assertions.
    pub fn failing_indices(&self) -> Vec<usize> {
        self.assertion_records
            .iter()
            .filter(|r| !r.passed)
            .map(|r| r.index)
            .collect()
    }

    /// Stable key identifying "the same error" across repair attempts.
    pub fn error_signature(&self) -> String {
        format!("{}|{}", self.status, self.message.trim())
    }

    /// Log text handed to the model: streams plus the failure summary.
    pub fn log_text(&self) -> String {
        let mut out = format!("status: {}\nduration: {:.3}s\n", self.status, self.duration_secs);
        for r in &self.assertion_records {
            out.push_str(&format!(
                "assertion {} [{}]: {} - {}\n",
                r.index,
                r.target,
                if r.passed { "passed" } else { "FAILED" },
                r.message
            ));
        }
        let stdout = super::report::strip_report(&self.stdout);
        if !stdout.trim().is_empty() {
            out.push_str(&format!("--- stdout ---\n{}\n", stdout.trim_end()));
        }
        if !self.stderr.trim().is_empty() {
            out.push_str(&format!("--- stderr ---\n{}\n", self.stderr.trim_end()));
        }
        out
    }
}

const COMPILE_ERRORS: [&str; 3] = ["SyntaxError", "IndentationError", "TabError"];

fn last_line(text: &str) -> Option<&str> {
    text.lines().rev().map(str::trim).find(|l| !l.is_empty())
}

/// Exception type at the start of a traceback's final line.
fn exception_type(line: &str) -> &str {
    let head = line.split(':').next().unwrap_or(line);
    head.rsplit('.').next().unwrap_or(head).trim()
}

/// Maps a raw outcome to exactly one status. Precedence: runner report,
/// compile-stage failure, nonzero exit, timeout, clean exit.
pub fn classify(raw: &RawOutcome) -> ExecutionResult {
    let mut result = ExecutionResult {
        status: StatusKind::NoViolation,
        message: String::new(),
        stdout: raw.stdout.clone(),
        stderr: raw.stderr.clone(),
        assertion_records: Vec::new(),
        duration_secs: raw.duration_secs,
        report_problem: None,
    };
    match scan_report(&raw.stdout) {
        ReportScan::Found(report) => {
            let first_failed = report.records.iter().find(|r| !r.passed).cloned();
            result.assertion_records = report.records;
            if let (true, Some(exc)) = (report.aborted, &report.exception) {
                let text = format!("{}: {}", exc.type_name, exc.message);
                if COMPILE_ERRORS.contains(&exc.type_name.as_str()) {
                    result.status = StatusKind::SyntaxError;
                    result.message = text;
                    return result;
                }
                if first_failed.is_none() {
                    result.status = StatusKind::RuntimeError;
                    result.message = text;
                    return result;
                }
            } else if report.aborted && first_failed.is_none() {
                result.status = StatusKind::RuntimeError;
                result.message = "run aborted without an exception descriptor".into();
                return result;
            }
            if let Some(rec) = first_failed {
                result.status = StatusKind::AssertionViolation(rec.target);
                result.message = rec
                    .failure_detail
                    .clone()
                    .unwrap_or_else(|| format!("AssertionError: {}", rec.message));
            }
            return result;
        }
        ReportScan::Malformed(problem) => result.report_problem = Some(problem),
        ReportScan::Absent => {}
    }

    let tail = last_line(&raw.stderr).unwrap_or("");
    let tail_type = exception_type(tail);
    if COMPILE_ERRORS.contains(&tail_type) {
        result.status = StatusKind::SyntaxError;
        result.message = tail.to_string();
    } else if matches!(raw.exit_code, Some(c) if c != 0) {
        if tail_type == "AssertionError" {
            let msg = tail.split_once(':').map_or("", |(_, m)| m.trim());
            result.status = StatusKind::AssertionViolation(target_tag(msg).unwrap_or(Target::Cross));
        } else {
            result.status = StatusKind::RuntimeError;
        }
        result.message = if tail.is_empty() {
            format!("exited with status {}", raw.exit_code.unwrap_or_default())
        } else {
            tail.to_string()
        };
    } else if raw.timed_out {
        result.status = StatusKind::Timeout;
        result.message = format!("timed out after {:.0} s", raw.duration_secs);
    } else if raw.exit_code == Some(0) {
        result.status = StatusKind::NoViolation;
    } else {
        result.status = StatusKind::RuntimeError;
        result.message = if tail.is_empty() { "killed by a signal".to_string() } else { tail.to_string() };
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sandbox::report::{ExceptionDescriptor, ShimReport};

    fn raw(exit: Option<i32>, stdout: &str, stderr: &str, timed_out: bool) -> RawOutcome {
        RawOutcome {
            exit_code: exit,
            stdout: stdout.into(),
            stderr: stderr.into(),
            timed_out,
            duration_secs: 1.0,
        }
    }

    fn rec(index: usize, passed: bool, target: Target) -> AssertionRecord {
        AssertionRecord {
            index,
            passed,
            target,
            message: format!("[CHANGED BEHAVIORS] m{index}"),
            failure_detail: (!passed).then(|| format!("AssertionError: [CHANGED BEHAVIORS] m{index}")),
        }
    }

    #[test]
    fn all_passed_report_is_no_violation() {
        let r = ShimReport::new(vec![rec(0, true, Target::Cross)], None);
        assert_eq!(classify(&raw(Some(0), &r.to_block(), "", false)).status, StatusKind::NoViolation);
    }

    #[test]
    fn first_failure_sets_target() {
        let r = ShimReport::new(
            vec![rec(0, true, Target::Cross), rec(1, false, Target::Pre), rec(2, false, Target::Post)],
            None,
        );
        let res = classify(&raw(Some(1), &r.to_block(), "", false));
        assert_eq!(res.status, StatusKind::AssertionViolation(Target::Pre));
        assert_eq!(res.failing_indices(), [1, 2]);
        assert_eq!(res.message, "AssertionError: [CHANGED BEHAVIORS] m1");
    }

    #[test]
    fn name_error_without_report_is_runtime() {
        let stderr = "Traceback (most recent call last):\n  File \"p.py\", line 3, in <module>\nNameError: name 'helper' is not defined\n";
        let res = classify(&raw(Some(1), "", stderr, false));
        assert_eq!(res.status, StatusKind::RuntimeError);
        assert_eq!(res.message, "NameError: name 'helper' is not defined");
    }

    #[test]
    fn compile_diagnostic_is_syntax_error() {
        let stderr = "  File \"p.py\", line 2\n    def f(:\n          ^\nSyntaxError: invalid syntax\n";
        assert_eq!(classify(&raw(Some(1), "", stderr, false)).status, StatusKind::SyntaxError);
    }

    #[test]
    fn report_abort_before_failures_is_runtime() {
        let exc = ExceptionDescriptor {
            type_name: "ZeroDivisionError".into(),
            message: "division by zero".into(),
            traceback: None,
        };
        let r = ShimReport::new(vec![rec(0, true, Target::Cross)], Some(exc));
        let res = classify(&raw(Some(1), &r.to_block(), "", false));
        assert_eq!(res.status, StatusKind::RuntimeError);
        assert_eq!(res.message, "ZeroDivisionError: division by zero");
    }

    #[test]
    fn uncaught_assertion_in_raw_mode() {
        let stderr = "Traceback...\nAssertionError: [PRESERVED BEHAVIORS][POST] keeps\n";
        assert_eq!(
            classify(&raw(Some(1), "", stderr, false)).status,
            StatusKind::AssertionViolation(Target::Post)
        );
    }

    #[test]
    fn timeout_and_signals() {
        assert_eq!(classify(&raw(None, "", "", true)).status, StatusKind::Timeout);
        assert_eq!(classify(&raw(None, "", "", false)).status, StatusKind::RuntimeError);
    }
}
