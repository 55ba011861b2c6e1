//! Target-PR selection: executable change confined to one function.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tree_sitter::Node;

use super::{FileStatus, PullRequest, Snapshot};
use crate::pyast::{self, SyntaxDiagnostic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FilterReason {
    Accepted,
    /// Only documentation files, comments or docstrings changed.
    DocOnly,
    /// More than one function or method body differs.
    MultiFunction,
    /// Nothing executable changed inside a function body: formatting-only
    /// edits, non-Python files, or module-level statements alone.
    NoExecutableChange,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FilterError {
    #[error("{path} does not parse in the {side} snapshot: {diagnostic}")]
    ParseError {
        path: String,
        side: &'static str,
        diagnostic: SyntaxDiagnostic,
    },
    #[error("{path} is touched by the diff but missing from the {side} snapshot")]
    MissingFile { path: String, side: &'static str },
}

/// Paths that count as documentation regardless of content.
pub fn is_doc_path(path: &str) -> bool {
    let p = Path::new(path);
    let in_doc_dir = p
        .parent()
        .into_iter()
        .flat_map(|d| d.components())
        .any(|c| matches!(c.as_os_str().to_str(), Some("docs" | "doc")));
    let doc_ext = matches!(
        p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("md" | "rst" | "txt")
    );
    in_doc_dir || doc_ext
}

fn is_python(path: &str) -> bool {
    path.ends_with(".py")
}

enum FileChange {
    /// Comment, docstring or documentation-file edits.
    Documentation,
    /// Whitespace or non-Python edits.
    NonExecutable,
    Executable { functions: Vec<String> },
}

/// Decides whether a PR is in scope: at least one executable change, and
/// exactly one function body differing between the snapshots.
pub fn is_target_pr(pr: &PullRequest, pre: &Snapshot, post: &Snapshot) -> Result<(bool, FilterReason), FilterError> {
    let mut all_doc = true;
    let mut any_executable = false;
    let mut changed_functions: Vec<String> = Vec::new();

    for fd in &pr.diff {
        let change = if is_doc_path(&fd.path) && is_doc_path(fd.pre_path()) {
            FileChange::Documentation
        } else if !is_python(&fd.path) || fd.binary {
            FileChange::NonExecutable
        } else {
            let pre_src = match fd.status {
                FileStatus::Added => None,
                _ => Some(pre.get(fd.pre_path()).ok_or_else(|| FilterError::MissingFile {
                    path: fd.pre_path().to_string(),
                    side: "pre",
                })?),
            };
            let post_src = match fd.status {
                FileStatus::Deleted => None,
                _ => Some(post.get(&fd.path).ok_or_else(|| FilterError::MissingFile {
                    path: fd.path.clone(),
                    side: "post",
                })?),
            };
            classify_python_change(&fd.path, pre_src, post_src)?
        };
        match change {
            FileChange::Documentation => {}
            FileChange::NonExecutable => all_doc = false,
            FileChange::Executable { functions } => {
                all_doc = false;
                any_executable = true;
                changed_functions.extend(functions.into_iter().map(|f| format!("{}::{f}", fd.path)));
            }
        }
    }

    let reason = if !any_executable {
        if all_doc {
            FilterReason::DocOnly
        } else {
            FilterReason::NoExecutableChange
        }
    } else {
        match changed_functions.len() {
            0 => FilterReason::NoExecutableChange,
            1 => FilterReason::Accepted,
            _ => FilterReason::MultiFunction,
        }
    };
    Ok((reason == FilterReason::Accepted, reason))
}

struct Parsed {
    tree: tree_sitter::Tree,
    src: String,
}

fn parse_side(path: &str, side: &'static str, src: Option<&str>) -> Result<Option<Parsed>, FilterError> {
    src.map(|s| {
        pyast::parse(s)
            .map(|tree| Parsed {
                tree,
                src: s.to_string(),
            })
            .map_err(|diagnostic| FilterError::ParseError {
                path: path.to_string(),
                side,
                diagnostic,
            })
    })
    .transpose()
}

fn classify_python_change(path: &str, pre: Option<&str>, post: Option<&str>) -> Result<FileChange, FilterError> {
    let pre = parse_side(path, "pre", pre)?;
    let post = parse_side(path, "post", post)?;

    let module_sig = |p: &Option<Parsed>, skip_docs: bool| {
        p.as_ref()
            .map(|p| pyast::signature(p.tree.root_node(), &p.src, skip_docs))
            .unwrap_or_default()
    };
    if module_sig(&pre, true) == module_sig(&post, true) {
        let docs_differ = module_sig(&pre, false) != module_sig(&post, false)
            || comments(&pre) != comments(&post);
        return Ok(if docs_differ {
            FileChange::Documentation
        } else {
            FileChange::NonExecutable
        });
    }

    let pre_units = unit_signatures(&pre);
    let post_units = unit_signatures(&post);
    let mut functions: Vec<String> = pre_units
        .keys()
        .chain(post_units.keys())
        .filter(|name| pre_units.get(*name) != post_units.get(*name))
        .cloned()
        .collect();
    functions.sort();
    functions.dedup();
    Ok(FileChange::Executable { functions })
}

fn comments(p: &Option<Parsed>) -> Vec<String> {
    fn walk(node: Node<'_>, src: &str, out: &mut Vec<String>) {
        if node.kind() == "comment" {
            out.push(pyast::node_text(node, src).trim().to_string());
            return;
        }
        let mut cursor = node.walk();
        for child in node.children(&mut cursor) {
            walk(child, src, out);
        }
    }
    let mut out = Vec::new();
    if let Some(p) = p {
        walk(p.tree.root_node(), &p.src, &mut out);
    }
    out
}

fn unit_signatures(p: &Option<Parsed>) -> BTreeMap<String, String> {
    let Some(p) = p else {
        return BTreeMap::new();
    };
    pyast::function_unit_nodes(&p.tree, &p.src)
        .into_iter()
        .map(|(def, node)| (def.qualname, pyast::signature(node, &p.src, true)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingestion::diff::parse_unified_diff;

    const PRE: &str = "\
\"\"\"Helpers.\"\"\"
LIMIT = 3


def a(x):
    return x + 1


def b(x):
    return x * 2


class K:
    def m(self):
        return LIMIT
";

    fn pr_for(files: &[(&str, &str, &str)]) -> (PullRequest, Snapshot, Snapshot) {
        let mut diff_text = String::new();
        for (path, before, after) in files {
            let d = similar::TextDiff::from_lines(*before, *after);
            diff_text.push_str(&format!("diff --git a/{path} b/{path}\n"));
            diff_text.push_str(
                &d.unified_diff()
                    .header(&format!("a/{path}"), &format!("b/{path}"))
                    .to_string(),
            );
        }
        let pr = PullRequest {
            repo_id: "o/n".parse().unwrap(),
            number: 1,
            title: String::new(),
            description: String::new(),
            comments: vec![],
            linked_issues: vec![],
            base_commit: String::new(),
            head_commit: String::new(),
            diff: parse_unified_diff(&diff_text).unwrap(),
        };
        let pre = Snapshot::from_files(files.iter().map(|(p, b, _)| (p.to_string(), b.to_string())));
        let post = Snapshot::from_files(files.iter().map(|(p, _, a)| (p.to_string(), a.to_string())));
        (pr, pre, post)
    }

    fn decide(files: &[(&str, &str, &str)]) -> (bool, FilterReason) {
        let (pr, pre, post) = pr_for(files);
        is_target_pr(&pr, &pre, &post).unwrap()
    }

    #[test]
    fn readme_and_docstring_only() {
        let post = PRE.replace("\"\"\"Helpers.\"\"\"", "\"\"\"Helper functions.\"\"\"");
        assert_eq!(
            decide(&[("README.md", "old\n", "new\n"), ("pkg/m.py", PRE, &post)]),
            (false, FilterReason::DocOnly)
        );
    }

    #[test]
    fn comment_only_is_doc() {
        let post = PRE.replace("return x * 2", "return x * 2  # double");
        assert_eq!(decide(&[("pkg/m.py", PRE, &post)]), (false, FilterReason::DocOnly));
    }

    #[test]
    fn single_function_accepted() {
        let post = PRE.replace("return x + 1", "return x + 2");
        assert_eq!(decide(&[("pkg/m.py", PRE, &post)]), (true, FilterReason::Accepted));
    }

    #[test]
    fn method_counts_as_function() {
        let post = PRE.replace("return LIMIT", "return LIMIT + 1");
        assert_eq!(decide(&[("pkg/m.py", PRE, &post)]), (true, FilterReason::Accepted));
    }

    #[test]
    fn two_functions_rejected() {
        let post = PRE.replace("return x + 1", "return x + 2").replace("x * 2", "x * 3");
        assert_eq!(decide(&[("pkg/m.py", PRE, &post)]), (false, FilterReason::MultiFunction));
    }

    #[test]
    fn functions_in_two_files_rejected() {
        let post = PRE.replace("return x + 1", "return x + 2");
        assert_eq!(
            decide(&[("pkg/m.py", PRE, &post), ("pkg/n.py", PRE, &post)]),
            (false, FilterReason::MultiFunction)
        );
    }

    #[test]
    fn top_level_only_has_no_function_change() {
        let post = PRE.replace("LIMIT = 3", "LIMIT = 4");
        assert_eq!(decide(&[("pkg/m.py", PRE, &post)]), (false, FilterReason::NoExecutableChange));
    }

    #[test]
    fn formatting_only_is_not_executable() {
        let post = PRE.replace("return x + 1", "return x+1");
        assert_eq!(decide(&[("pkg/m.py", PRE, &post)]), (false, FilterReason::NoExecutableChange));
    }

    #[test]
    fn new_helper_plus_edit_is_multi() {
        let post = format!("{}\n\ndef c():\n    return 0\n", PRE.replace("return x + 1", "return c()"));
        assert_eq!(decide(&[("pkg/m.py", PRE, &post)]), (false, FilterReason::MultiFunction));
    }

    #[test]
    fn doc_dir_python_is_doc() {
        let post = PRE.replace("return x + 1", "return x + 2");
        assert_eq!(decide(&[("docs/conf.py", PRE, &post)]), (false, FilterReason::DocOnly));
    }

    #[test]
    fn unparsable_file_is_error() {
        let post = PRE.replace("return x + 1", "return (x + 1");
        let (pr, pre, post) = pr_for(&[("pkg/m.py", PRE, &post)]);
        assert!(matches!(
            is_target_pr(&pr, &pre, &post),
            Err(FilterError::ParseError { side: "post", .. })
        ));
    }

    #[test]
    fn doc_paths() {
        assert!(is_doc_path("docs/index.py"));
        assert!(is_doc_path("pkg/doc/x.py"));
        assert!(is_doc_path("CHANGELOG.rst"));
        assert!(is_doc_path("requirements.txt"));
        assert!(!is_doc_path("src/docsify.py"));
        assert!(!is_doc_path("docs.py"));
    }
}
