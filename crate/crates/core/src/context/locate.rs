use std::collections::BTreeSet;

use thiserror::Error;

use super::FunctionLocator;
use crate::ingestion::FileDiff;
use crate::pyast::{self, Definition};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LocateError {
    #[error("changed lines of {path} lie outside every function")]
    NotInFunction { path: String },
    #[error("changed lines of {path} span several definitions: {names:?}")]
    Ambiguous { path: String, names: Vec<String> },
    #[error("modified function is `{pre}` before the patch but `{post}` after it")]
    NameMismatch { pre: String, post: String },
}

/// Finds the single function (or method) whose span contains the changed
/// lines in both versions of the file.
pub fn locate_modified_function(pre_file: &str, post_file: &str, fd: &FileDiff) -> Result<FunctionLocator, LocateError> {
    let pre_units = pyast::function_units(&pyast::parse_lenient(pre_file), pre_file);
    let post_units = pyast::function_units(&pyast::parse_lenient(post_file), post_file);

    let mut pre_lines = fd.removed_lines();
    let mut post_lines = fd.added_lines();
    for hunk in &fd.hunks {
        let (old_anchor, new_anchor) = hunk.anchor_lines();
        if hunk.removed_lines().is_empty() {
            pre_lines.extend(old_anchor);
        }
        if hunk.added_lines().is_empty() {
            post_lines.extend(new_anchor);
        }
    }

    let pre_hit = touched_unit(pre_file, &pre_units, &pre_lines, &fd.path)?;
    let post_hit = touched_unit(post_file, &post_units, &post_lines, &fd.path)?;

    let (pre_def, post_def) = match (pre_hit, post_hit) {
        (Some(a), Some(b)) => {
            if a.qualname != b.qualname {
                return Err(LocateError::NameMismatch {
                    pre: a.qualname.clone(),
                    post: b.qualname.clone(),
                });
            }
            (a, b)
        }
        (Some(a), None) => (a, find(&post_units, &a.qualname, &fd.path)?),
        (None, Some(b)) => (find(&pre_units, &b.qualname, &fd.path)?, b),
        (None, None) => return Err(LocateError::NotInFunction { path: fd.path.clone() }),
    };

    let enclosing_class = (!pre_def.class_path.is_empty()).then(|| pre_def.class_path.join("."));
    Ok(FunctionLocator {
        path: fd.path.clone(),
        name: pre_def.qualname.clone(),
        pre_span: pre_def.span,
        post_span: post_def.span,
        enclosing_class,
    })
}

fn find<'u>(units: &'u [Definition], qualname: &str, path: &str) -> Result<&'u Definition, LocateError> {
    units
        .iter()
        .find(|u| u.qualname == qualname)
        .ok_or_else(|| LocateError::NotInFunction { path: path.to_string() })
}

/// The unit containing the meaningful changed lines, ignoring blank and
/// comment-only lines. Lines at module level are ignored as long as some
/// line falls inside a function.
fn touched_unit<'u>(
    file: &str,
    units: &'u [Definition],
    lines: &[usize],
    path: &str,
) -> Result<Option<&'u Definition>, LocateError> {
    let text_lines: Vec<&str> = file.lines().collect();
    let mut hit: BTreeSet<usize> = BTreeSet::new();
    for &line in lines {
        let Some(text) = text_lines.get(line.wrapping_sub(1)) else {
            continue;
        };
        let trimmed = text.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(idx) = units.iter().position(|u| u.span.contains_line(line)) {
            hit.insert(idx);
        }
    }
    match hit.len() {
        0 => Ok(None),
        1 => Ok(Some(&units[*hit.iter().next().expect("one element")])),
        _ => Err(LocateError::Ambiguous {
            path: path.to_string(),
            names: hit.into_iter().map(|i| units[i].qualname.clone()).collect(),
        }),
    }
}
