use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tree_sitter::Node;

use crate::pyast::{self, SyntaxDiagnostic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MutationOperator {
    /// `+ - * / // % **` replaced by a different arithmetic operator.
    ArithSwap,
    /// Comparison replaced by its negation.
    CompareFlip,
    /// `and`/`or` swapped, `not` dropped, `True`/`False` swapped.
    BoolNegate,
    /// Integer `n` becomes `n + 1`; a string gains an `XX` marker at both ends.
    ConstPerturb,
    /// A simple statement replaced by `pass`.
    StmtDelete,
}

impl MutationOperator {
    pub const ALL: [MutationOperator; 5] = [
        MutationOperator::ArithSwap,
        MutationOperator::CompareFlip,
        MutationOperator::BoolNegate,
        MutationOperator::ConstPerturb,
        MutationOperator::StmtDelete,
    ];
}

impl fmt::Display for MutationOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mutant {
    pub id: usize,
    pub operator: MutationOperator,
    /// 1-based line within the function source.
    pub line: usize,
    /// 0-based byte column.
    pub column: usize,
    pub mutated_source: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MutateError {
    #[error("function does not parse: {0}")]
    Parse(SyntaxDiagnostic),
    #[error("source does not contain a function definition")]
    NotAFunction,
}

const SIMPLE_STATEMENTS: [&str; 7] = [
    "expression_statement",
    "return_statement",
    "raise_statement",
    "assert_statement",
    "delete_statement",
    "break_statement",
    "continue_statement",
];

struct Site {
    operator: MutationOperator,
    start: usize,
    end: usize,
    replacement: String,
}

fn arith_swap(op: &str) -> Option<&'static str> {
    Some(match op {
        "+" => "-",
        "-" => "+",
        "*" => "/",
        "/" => "*",
        "//" => "/",
        "%" => "/",
        "**" => "*",
        _ => return None,
    })
}

fn compare_flip(op: &str) -> Option<&'static str> {
    Some(match op {
        "<" => ">=",
        "<=" => ">",
        ">" => "<=",
        ">=" => "<",
        "==" => "!=",
        "!=" => "==",
        "in" => "not in",
        "not in" => "in",
        "is" => "is not",
        "is not" => "is",
        _ => return None,
    })
}

/// Value of a Python integer literal, `None` for imaginary or oversized ones.
fn int_value(text: &str) -> Option<u128> {
    let t = text.replace('_', "");
    let lower = t.to_ascii_lowercase();
    let (digits, radix) = match lower.get(..2) {
        Some("0x") => (&lower[2..], 16),
        Some("0o") => (&lower[2..], 8),
        Some("0b") => (&lower[2..], 2),
        _ => (lower.as_str(), 10),
    };
    u128::from_str_radix(digits, radix).ok()
}

/// Plain or raw text strings; bytes and f-strings are left alone.
fn mutable_string(node: Node<'_>, src: &str) -> Option<(usize, usize)> {
    let mut cursor = node.walk();
    let children: Vec<Node> = node.children(&mut cursor).collect();
    let start = children.first().filter(|c| c.kind() == "string_start")?;
    let end = children.last().filter(|c| c.kind() == "string_end")?;
    if children.iter().any(|c| c.kind() == "interpolation") {
        return None;
    }
    let prefix = pyast::node_text(*start, src).trim_end_matches(['\'', '"']);
    if prefix.chars().any(|c| matches!(c, 'b' | 'B' | 'f' | 'F')) {
        return None;
    }
    Some((start.end_byte(), end.start_byte()))
}

/// A docstring of a function or class body. Leading strings of other
/// blocks are ordinary expressions.
fn is_body_docstring(stmt: Node<'_>) -> bool {
    pyast::is_docstring(stmt)
        && stmt
            .parent()
            .and_then(|b| b.parent())
            .is_some_and(|d| matches!(d.kind(), "function_definition" | "class_definition"))
}

fn collect(node: Node<'_>, src: &str, out: &mut Vec<Site>) {
    let text = |n: Node| pyast::node_text(n, src);
    match node.kind() {
        "binary_operator" => {
            if let Some(op) = node.child_by_field_name("operator") {
                if let Some(r) = arith_swap(text(op)) {
                    out.push(Site {
                        operator: MutationOperator::ArithSwap,
                        start: op.start_byte(),
                        end: op.end_byte(),
                        replacement: r.into(),
                    });
                }
            }
        }
        "comparison_operator" => {
            let mut cursor = node.walk();
            for op in node.children_by_field_name("operators", &mut cursor) {
                if let Some(r) = compare_flip(text(op)) {
                    out.push(Site {
                        operator: MutationOperator::CompareFlip,
                        start: op.start_byte(),
                        end: op.end_byte(),
                        replacement: r.into(),
                    });
                }
            }
        }
        "boolean_operator" => {
            if let Some(op) = node.child_by_field_name("operator") {
                let r = if text(op) == "and" { "or" } else { "and" };
                out.push(Site {
                    operator: MutationOperator::BoolNegate,
                    start: op.start_byte(),
                    end: op.end_byte(),
                    replacement: r.into(),
                });
            }
        }
        "not_operator" => {
            if let Some(arg) = node.child_by_field_name("argument") {
                out.push(Site {
                    operator: MutationOperator::BoolNegate,
                    start: node.start_byte(),
                    end: arg.start_byte(),
                    replacement: String::new(),
                });
            }
        }
        "true" | "false" => out.push(Site {
            operator: MutationOperator::BoolNegate,
            start: node.start_byte(),
            end: node.end_byte(),
            replacement: if node.kind() == "true" { "False" } else { "True" }.into(),
        }),
        "integer" => {
            if let Some(v) = int_value(text(node)).and_then(|v| v.checked_add(1)) {
                out.push(Site {
                    operator: MutationOperator::ConstPerturb,
                    start: node.start_byte(),
                    end: node.end_byte(),
                    replacement: v.to_string(),
                });
            }
        }
        "string" => {
            let in_docstring = node.parent().is_some_and(is_body_docstring);
            let concatenated = node.parent().is_some_and(|p| p.kind() == "concatenated_string");
            if !in_docstring && !concatenated {
                if let Some((a, b)) = mutable_string(node, src) {
                    out.push(Site {
                        operator: MutationOperator::ConstPerturb,
                        start: a,
                        end: b,
                        replacement: format!("XX{}XX", &src[a..b]),
                    });
                }
            }
            // strings hold nothing else to mutate
            return;
        }
        _ => {}
    }
    if SIMPLE_STATEMENTS.contains(&node.kind())
        && node.parent().is_some_and(|p| p.kind() == "block")
        && !is_body_docstring(node)
    {
        out.push(Site {
            operator: MutationOperator::StmtDelete,
            start: node.start_byte(),
            end: node.end_byte(),
            replacement: "pass".into(),
        });
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        collect(child, src, out);
    }
}

fn line_col(src: &str, byte: usize) -> (usize, usize) {
    let before = &src[..byte];
    let line = before.matches('\n').count() + 1;
    let col = byte - before.rfind('\n').map_or(0, |i| i + 1);
    (line, col)
}

/// One mutant per operator site in the body of the first function of
/// `source`, deduplicated by text and ordered by (line, column, operator).
pub fn generate_mutants(source: &str) -> Result<Vec<Mutant>, MutateError> {
    let tree = pyast::parse(source).map_err(MutateError::Parse)?;
    let root = tree.root_node();
    let mut cursor = root.walk();
    let func = root
        .named_children(&mut cursor)
        .find_map(|n| match n.kind() {
            "function_definition" => Some(n),
            "decorated_definition" => n
                .child_by_field_name("definition")
                .filter(|d| d.kind() == "function_definition"),
            _ => None,
        })
        .ok_or(MutateError::NotAFunction)?;
    let body = func.child_by_field_name("body").ok_or(MutateError::NotAFunction)?;

    let mut sites = Vec::new();
    collect(body, source, &mut sites);
    let mut keyed: Vec<(usize, usize, MutationOperator, String)> = sites
        .into_iter()
        .map(|s| {
            let (line, col) = line_col(source, s.start);
            let mutated = pyast::splice(source, vec![(s.start..s.end, s.replacement)]);
            (line, col, s.operator, mutated)
        })
        .collect();
    keyed.sort_by_key(|k| (k.0, k.1, k.2));

    let mut seen = HashSet::new();
    seen.insert(source.to_string());
    Ok(keyed
        .into_iter()
        .filter(|(_, _, _, m)| pyast::parses(m) && seen.insert(m.clone()))
        .enumerate()
        .map(|(id, (line, column, operator, mutated_source))| Mutant {
            id,
            operator,
            line,
            column,
            mutated_source,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ops(src: &str) -> Vec<(MutationOperator, String)> {
        generate_mutants(src)
            .unwrap()
            .into_iter()
            .map(|m| (m.operator, m.mutated_source))
            .collect()
    }

    #[test]
    fn arith_swap_on_return() {
        let src = "def add(a, b):\n    return a + b\n";
        let muts = ops(src);
        assert!(muts.contains(&(MutationOperator::ArithSwap, "def add(a, b):\n    return a - b\n".into())));
        assert!(muts.contains(&(MutationOperator::StmtDelete, "def add(a, b):\n    pass\n".into())));
        assert_eq!(muts.len(), 2);
    }

    #[test]
    fn pass_only_body_has_no_mutants() {
        assert!(generate_mutants("def f():\n    pass\n").unwrap().is_empty());
        assert!(generate_mutants("def f():\n    \"\"\"Doc.\"\"\"\n").unwrap().is_empty());
    }

    #[test]
    fn multi_token_comparisons_flip_as_one() {
        let muts = ops("def f(a, b):\n    return a not in b\n");
        assert!(muts.iter().any(|(_, s)| s.contains("return a in b")));
        let muts = ops("def f(a, b):\n    return a is not b\n");
        assert!(muts.iter().any(|(_, s)| s.contains("return a is b")));
    }

    #[test]
    fn bool_negation_forms() {
        let muts = ops("def f(a, b):\n    return not a and True\n");
        let texts: Vec<&str> = muts.iter().map(|(_, s)| s.as_str()).collect();
        assert!(texts.contains(&"def f(a, b):\n    return not a or True\n"));
        assert!(texts.contains(&"def f(a, b):\n    return a and True\n"));
        assert!(texts.contains(&"def f(a, b):\n    return not a and False\n"));
    }

    #[test]
    fn constants_perturbed_but_not_docstrings_bytes_or_fstrings() {
        let src = "def f(x):\n    \"\"\"Doc.\"\"\"\n    y = 0x1f\n    return ('a', b'b', f'{x}', r'c', y)\n";
        let consts: Vec<String> = ops(src)
            .into_iter()
            .filter(|(o, _)| *o == MutationOperator::ConstPerturb)
            .map(|(_, s)| s)
            .collect();
        assert_eq!(consts.len(), 3);
        assert!(consts.iter().any(|s| s.contains("y = 32")));
        assert!(consts.iter().any(|s| s.contains("'XXaXX'")));
        assert!(consts.iter().any(|s| s.contains("r'XXcXX'")));
        assert!(consts.iter().all(|s| s.contains("\"\"\"Doc.\"\"\"")));
    }

    #[test]
    fn leading_string_of_an_if_block_is_not_a_docstring() {
        let src = "def f(x):\n    if x:\n        'marker'\n    return x\n";
        let muts = ops(src);
        assert!(muts.iter().any(|(_, s)| s.contains("'XXmarkerXX'")));
        assert!(muts.iter().any(|(o, s)| *o == MutationOperator::StmtDelete && s.contains("if x:\n        pass")));
    }

    #[test]
    fn signature_and_decorators_untouched() {
        let src = "@cache(1)\ndef f(x=2):\n    return x\n";
        for (_, s) in ops(src) {
            assert!(s.starts_with("@cache(1)\ndef f(x=2):\n"));
        }
    }

    #[test]
    fn ordering_and_ids_are_stable() {
        let src = "def f(a, b):\n    if a < b and b > 0:\n        return a * 2\n    return b - 1\n";
        let m = generate_mutants(src).unwrap();
        assert_eq!(m, generate_mutants(src).unwrap());
        let keys: Vec<_> = m.iter().map(|m| (m.line, m.column, m.operator)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(m.iter().enumerate().all(|(i, x)| x.id == i));
        assert!(m.iter().all(|x| pyast::parses(&x.mutated_source) && x.mutated_source != src));
    }

    #[test]
    fn not_a_function() {
        assert_eq!(generate_mutants("x = 1\n"), Err(MutateError::NotAFunction));
        assert!(matches!(generate_mutants("def f(:\n"), Err(MutateError::Parse(_))));
    }
}
