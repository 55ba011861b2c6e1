//! Structured parsing of model responses.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::oracle::{OracleEdit, PatchOracle};

/// Machine-readable reasons a response could not be used, fed back to the
/// model on retry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatError {
    pub reasons: Vec<String>,
}

impl FormatError {
    fn one(reason: impl Into<String>) -> Self {
        Self {
            reasons: vec![reason.into()],
        }
    }
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unusable response: {}", self.reasons.join("; "))
    }
}

impl std::error::Error for FormatError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReviewVerdict {
    TruePositive,
    FalsePositive,
}

pub const BUG_MARKER: &str = "[BUG]";
pub const FALSE_POSITIVE_MARKER: &str = "[FALSE-POSITIVE]";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssertionVerdict {
    /// Zero-based assertion index, when the review names one.
    pub index: Option<usize>,
    pub verdict: ReviewVerdict,
    pub justification: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewOutcome {
    /// True positive when any reviewed assertion is a true positive.
    pub verdict: ReviewVerdict,
    pub assertions: Vec<AssertionVerdict>,
    pub edits: Vec<OracleEdit>,
}

impl ReviewOutcome {
    pub fn true_positives(&self) -> impl Iterator<Item = &AssertionVerdict> {
        self.assertions.iter().filter(|a| a.verdict == ReviewVerdict::TruePositive)
    }
}

static FENCE_OPEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*```\s*(?:python3?|py)?\s*$").expect("static regex"));
static PROGRAM_HEADER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?im)^#{1,4}\s*comparison\s+program\b.*$").expect("static regex"));
static EDITS_HEADER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?im)^#{1,4}\s*oracle\s+edits\b.*$").expect("static regex"));
static EDIT_ENTRY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?im)^#{2,4}\s*(replace|remove|append)\b[ \t]*(\d+)?.*$").expect("static regex"));
static ASSERTION_BLOCK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?im)^[ \t*_]*assertion\s+#?(\d+)\s*[:.)-]").expect("static regex"));
static VERDICT_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\[\s*(BUG|FALSE[-_ ]POSITIVE)\s*\]").expect("static regex"));
static DISTILLED_HEADER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?im)^#{1,4}\s*distilled\s+context\b.*$").expect("static regex"));

/// Fenced code blocks of `text` as `(start_offset, body)`; only untagged and
/// python fences count.
fn code_blocks(text: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut offset = 0;
    let mut open: Option<(usize, String)> = None;
    for line in text.split_inclusive('\n') {
        let bare = line.trim_end_matches(['\n', '\r']);
        match &mut open {
            None => {
                if FENCE_OPEN.is_match(bare) {
                    open = Some((offset, String::new()));
                }
            }
            Some((start, body)) => {
                if bare.trim() == "```" {
                    out.push((*start, std::mem::take(body)));
                    open = None;
                } else {
                    body.push_str(bare);
                    body.push('\n');
                }
            }
        }
        offset += line.len();
    }
    out
}

/// The comparison program of an oracle response: the first python block
/// after the `Comparison Program` header, else the last python block.
pub fn extract_program(text: &str) -> Option<String> {
    let blocks = code_blocks(text);
    if let Some(h) = PROGRAM_HEADER.find(text) {
        if let Some((_, body)) = blocks.iter().find(|(start, _)| *start >= h.end()) {
            return Some(body.clone());
        }
    }
    blocks.into_iter().last().map(|(_, b)| b)
}

/// Extracts and validates the oracle carried by an inference, enhancement
/// or repair response.
pub fn validate_and_parse_oracle(text: &str, revision: u32) -> Result<PatchOracle, FormatError> {
    let Some(program) = extract_program(text) else {
        return Err(FormatError::one("missing comparison program: no ```python block found"));
    };
    PatchOracle::parse(&program, revision).map_err(|p| FormatError { reasons: p.0 })
}

/// Renders an oracle in the response format that
/// [`validate_and_parse_oracle`] accepts.
pub fn render_oracle_response(o: &PatchOracle, reasoning: &str, hypotheses: &[&str]) -> String {
    let mut out = format!("## Reasoning\n{}\n\n## Hypotheses\n", reasoning.trim());
    for h in hypotheses {
        out.push_str(&format!("- {h}\n"));
    }
    out.push_str("\n## Comparison Program\n```python\n");
    out.push_str(&o.program_template);
    if !o.program_template.ends_with('\n') {
        out.push('\n');
    }
    out.push_str("```\n");
    out
}

fn marker_verdict(text: &str) -> Option<ReviewVerdict> {
    VERDICT_MARKER.captures_iter(text).last().map(|c| {
        if c[1].eq_ignore_ascii_case("BUG") {
            ReviewVerdict::TruePositive
        } else {
            ReviewVerdict::FalsePositive
        }
    })
}

/// Parses a self-review response into per-assertion verdicts and any
/// proposed oracle edits.
pub fn parse_review_verdict(text: &str) -> Result<ReviewOutcome, FormatError> {
    let (review, edits_text) = match EDITS_HEADER.find(text) {
        Some(m) => (&text[..m.start()], Some(&text[m.end()..])),
        None => (text, None),
    };
    let mut assertions = Vec::new();
    let starts: Vec<(usize, usize)> = ASSERTION_BLOCK
        .captures_iter(review)
        .filter_map(|c| Some((c.get(0)?.start(), c[1].parse().ok()?)))
        .collect();
    let mut reasons = Vec::new();
    if starts.is_empty() {
        match marker_verdict(review) {
            Some(verdict) => assertions.push(AssertionVerdict {
                index: None,
                verdict,
                justification: review.trim().to_string(),
            }),
            None => reasons.push("no verdict marker found; end with `Conclusion: [BUG]` or `Conclusion: [FALSE-POSITIVE]`".to_string()),
        }
    } else {
        for (i, (start, index)) in starts.iter().enumerate() {
            let end = starts.get(i + 1).map_or(review.len(), |s| s.0);
            let block = review[*start..end].trim();
            match marker_verdict(block) {
                Some(verdict) => assertions.push(AssertionVerdict {
                    index: Some(*index),
                    verdict,
                    justification: block.to_string(),
                }),
                None => reasons.push(format!("assertion {index}: no verdict marker found")),
            }
        }
    }

    let edits = match edits_text {
        Some(t) => parse_edits(t).unwrap_or_else(|mut e| {
            reasons.append(&mut e);
            Vec::new()
        }),
        None => Vec::new(),
    };
    if !reasons.is_empty() {
        return Err(FormatError { reasons });
    }
    let verdict = if assertions.iter().any(|a| a.verdict == ReviewVerdict::TruePositive) {
        ReviewVerdict::TruePositive
    } else {
        ReviewVerdict::FalsePositive
    };
    if verdict == ReviewVerdict::FalsePositive && edits.is_empty() {
        return Err(FormatError::one(
            "a [FALSE-POSITIVE] verdict must come with an `## Oracle Edits` section",
        ));
    }
    Ok(ReviewOutcome {
        verdict,
        assertions,
        edits,
    })
}

fn parse_edits(text: &str) -> Result<Vec<OracleEdit>, Vec<String>> {
    let entries: Vec<_> = EDIT_ENTRY.captures_iter(text).collect();
    let mut edits = Vec::new();
    let mut problems = Vec::new();
    for (i, cap) in entries.iter().enumerate() {
        let whole = cap.get(0).expect("match");
        let end = entries.get(i + 1).map_or(text.len(), |c| c.get(0).expect("match").start());
        let body = &text[whole.end()..end];
        let code = code_blocks(body).into_iter().next().map(|(_, b)| b);
        let index = cap.get(2).and_then(|m| m.as_str().parse::<usize>().ok());
        let op = cap[1].to_ascii_lowercase();
        match (op.as_str(), index, code) {
            ("replace", Some(index), Some(code)) => edits.push(OracleEdit::Replace { index, code }),
            ("remove", Some(index), _) => edits.push(OracleEdit::Remove { index }),
            ("append", _, Some(code)) => edits.push(OracleEdit::Append { code }),
            ("replace", None, _) | ("remove", None, _) => problems.push(format!("`{op}` edit needs an assertion index")),
            _ => problems.push(format!("`{op}` edit needs a ```python block")),
        }
    }
    if problems.is_empty() {
        Ok(edits)
    } else {
        Err(problems)
    }
}

/// Renders a review response in the mandated format.
pub fn render_review_response(verdicts: &[AssertionVerdict], edits: &[OracleEdit]) -> String {
    let mut out = String::new();
    for v in verdicts {
        if let Some(i) = v.index {
            out.push_str(&format!("Assertion {i}: "));
        }
        out.push_str(v.justification.trim());
        let marker = match v.verdict {
            ReviewVerdict::TruePositive => BUG_MARKER,
            ReviewVerdict::FalsePositive => FALSE_POSITIVE_MARKER,
        };
        if marker_verdict(&v.justification) != Some(v.verdict) {
            out.push_str(&format!(" Conclusion: {marker}"));
        }
        out.push_str("\n\n");
    }
    if !edits.is_empty() {
        out.push_str("## Oracle Edits\n\n");
        for e in edits {
            match e {
                OracleEdit::Replace { index, code } => {
                    out.push_str(&format!("### replace {index}\n```python\n{}\n```\n\n", code.trim_end()))
                }
                OracleEdit::Remove { index } => out.push_str(&format!("### remove {index}\n\n")),
                OracleEdit::Append { code } => {
                    out.push_str(&format!("### append\n```python\n{}\n```\n\n", code.trim_end()))
                }
            }
        }
    }
    out
}

/// The distilled issue summary: the `Distilled Context` section if present,
/// else the whole response.
pub fn parse_distillation(text: &str) -> String {
    match DISTILLED_HEADER.find(text) {
        Some(m) => text[m.end()..].trim().to_string(),
        None => text.trim().to_string(),
    }
}
