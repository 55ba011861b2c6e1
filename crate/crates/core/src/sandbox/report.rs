//! Host side of the runner report protocol.

use serde::{Deserialize, Serialize};

use crate::oracle::Target;

pub const REPORT_BEGIN: &str = "===ORACLE-REPORT-BEGIN===";
pub const REPORT_END: &str = "===ORACLE-REPORT-END===";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssertionRecord {
    pub index: usize,
    pub passed: bool,
    pub target: Target,
    pub message: String,
    #[serde(default)]
    pub failure_detail: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExceptionDescriptor {
    #[serde(rename = "type")]
    pub type_name: String,
    pub message: String,
    #[serde(default)]
    pub traceback: Option<String>,
}

/// Structured report the runner prints between the sentinel lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShimReport {
    pub schema_version: u32,
    pub records: Vec<AssertionRecord>,
    pub counts: Counts,
    pub aborted: bool,
    #[serde(default)]
    pub exception: Option<ExceptionDescriptor>,
    #[serde(default)]
    pub metadata: serde_json::Map<String, serde_json::Value>,
}

impl ShimReport {
    /// Report with counts tallied from `records`.
    pub fn new(records: Vec<AssertionRecord>, exception: Option<ExceptionDescriptor>) -> Self {
        let failed = records.iter().filter(|r| !r.passed).count();
        Self {
            schema_version: SCHEMA_VERSION,
            counts: Counts {
                passed: records.len() - failed,
                failed,
            },
            aborted: exception.is_some(),
            records,
            exception,
            metadata: serde_json::Map::new(),
        }
    }

    /// The sentinel-delimited block as the runner prints it.
    pub fn to_block(&self) -> String {
        format!(
            "{REPORT_BEGIN}\n{}\n{REPORT_END}\n",
            serde_json::to_string(self).expect("report serializes")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReportScan {
    Absent,
    Found(ShimReport),
    Malformed(String),
}

/// Finds the single report block in `stdout`.
pub fn scan_report(stdout: &str) -> ReportScan {
    let mut blocks = Vec::new();
    let mut current: Option<String> = None;
    for line in stdout.lines() {
        let bare = line.trim_end_matches('\r');
        match &mut current {
            None if bare == REPORT_BEGIN => current = Some(String::new()),
            None => {}
            Some(body) if bare == REPORT_END => {
                blocks.push(std::mem::take(body));
                current = None;
            }
            Some(body) => {
                body.push_str(bare);
                body.push('\n');
            }
        }
    }
    if current.is_some() {
        return ReportScan::Malformed("report block is not terminated".into());
    }
    match blocks.len() {
        0 => ReportScan::Absent,
        1 => match serde_json::from_str::<ShimReport>(&blocks[0]) {
            Ok(r) if r.schema_version != SCHEMA_VERSION => {
                ReportScan::Malformed(format!("unsupported report schema version {}", r.schema_version))
            }
            Ok(r) => {
                let failed = r.records.iter().filter(|x| !x.passed).count();
                if r.counts.failed != failed || r.counts.passed + failed != r.records.len() {
                    ReportScan::Malformed("report counts disagree with its records".into())
                } else {
                    ReportScan::Found(r)
                }
            }
            Err(e) => ReportScan::Malformed(format!("report is not valid JSON: {e}")),
        },
        n => ReportScan::Malformed(format!("{n} report blocks found, expected one")),
    }
}

/// `stdout` with the report block removed.
pub fn strip_report(stdout: &str) -> String {
    let mut out = String::new();
    let mut inside = false;
    for line in stdout.split_inclusive('\n') {
        let bare = line.trim_end_matches(['\n', '\r']);
        if bare == REPORT_BEGIN {
            inside = true;
        } else if bare == REPORT_END {
            inside = false;
        } else if !inside {
            out.push_str(line);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(index: usize, passed: bool) -> AssertionRecord {
        AssertionRecord {
            index,
            passed,
            target: Target::Cross,
            message: format!("m{index}"),
            failure_detail: (!passed).then(|| "AssertionError: m".to_string()),
        }
    }

    #[test]
    fn tally_of_four_records() {
        let r = ShimReport::new(vec![rec(0, true), rec(1, true), rec(2, true), rec(3, false)], None);
        assert_eq!(r.counts, Counts { passed: 3, failed: 1 });
        let stdout = format!("user output\n{}trailing\n", r.to_block());
        assert_eq!(scan_report(&stdout), ReportScan::Found(r));
        assert_eq!(strip_report(&stdout), "user output\ntrailing\n");
    }

    #[test]
    fn aborted_report_keeps_exception() {
        let exc = ExceptionDescriptor {
            type_name: "ZeroDivisionError".into(),
            message: "division by zero".into(),
            traceback: None,
        };
        let r = ShimReport::new(vec![rec(0, true)], Some(exc.clone()));
        assert!(r.aborted);
        match scan_report(&r.to_block()) {
            ReportScan::Found(back) => assert_eq!(back.exception, Some(exc)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_blocks() {
        let block = ShimReport::new(vec![], None).to_block();
        assert!(matches!(scan_report(&format!("{block}{block}")), ReportScan::Malformed(_)));
        assert!(matches!(scan_report(&format!("{REPORT_BEGIN}\n{{}}\n")), ReportScan::Malformed(_)));
        assert!(matches!(scan_report(&format!("{REPORT_BEGIN}\nnope\n{REPORT_END}\n")), ReportScan::Malformed(_)));
        assert_eq!(scan_report("plain output"), ReportScan::Absent);
    }
}
