use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::{PatchOracle, TemplateProblems};

/// A change to an oracle proposed by the model during review.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum OracleEdit {
    /// Replace the statement of assertion `index` with `code`.
    Replace { index: usize, code: String },
    Remove { index: usize },
    /// Append `code` (inputs and assertions) to the end of the template.
    Append { code: String },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InvalidEdit {
    #[error("edit targets assertion {index} but the oracle has {count}")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("assertion {0} is edited more than once")]
    ConflictingEdits(usize),
    #[error("edited oracle is invalid: {0}")]
    Invalid(TemplateProblems),
}

/// Applies `edits` and re-validates the result. The revision always
/// increases by one, even for an empty edit list.
pub fn apply_oracle_edits(o: &PatchOracle, edits: &[OracleEdit]) -> Result<PatchOracle, InvalidEdit> {
    let count = o.assertions.len();
    let mut touched: Vec<(usize, Option<&str>)> = Vec::new();
    let mut appends: Vec<&str> = Vec::new();
    for edit in edits {
        let (index, code) = match edit {
            OracleEdit::Replace { index, code } => (*index, Some(code.as_str())),
            OracleEdit::Remove { index } => (*index, None),
            OracleEdit::Append { code } => {
                appends.push(code);
                continue;
            }
        };
        if index >= count {
            return Err(InvalidEdit::IndexOutOfRange { index, count });
        }
        if touched.iter().any(|(i, _)| *i == index) {
            return Err(InvalidEdit::ConflictingEdits(index));
        }
        touched.push((index, code));
    }

    let mut lines: Vec<String> = o.program_template.lines().map(str::to_string).collect();
    // bottom-up so earlier spans stay valid
    touched.sort_by_key(|t| std::cmp::Reverse(t.0));
    for (index, code) in touched {
        let span = o.assertions[index].source_span;
        let indent: String = lines[span.start - 1]
            .chars()
            .take_while(|c| c.is_whitespace())
            .collect();
        let replacement: Vec<String> = match code {
            Some(code) => code.trim_end().lines().map(|l| format!("{indent}{l}")).collect(),
            None => Vec::new(),
        };
        lines.splice(span.start - 1..span.end, replacement);
    }
    let mut template = lines.join("\n");
    template.push('\n');
    for code in appends {
        template.push('\n');
        template.push_str(code.trim_end());
        template.push('\n');
    }
    PatchOracle::parse(&template, o.revision + 1).map_err(InvalidEdit::Invalid)
}
