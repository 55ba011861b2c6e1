//! Thin helpers over the tree-sitter Python grammar.
//!
//! Everything that inspects Python source goes through here: parse checks,
//! enumeration of function/class definitions, structural signatures that
//! ignore comments and docstrings, and line-oriented text utilities.

use std::fmt;

use tree_sitter::{Node, Parser, Tree};

/// 1-based inclusive line interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct LineSpan {
    pub start: usize,
    pub end: usize,
}

impl LineSpan {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end, "inverted span {start}..{end}");
        Self { start, end }
    }

    pub fn contains_line(&self, line: usize) -> bool {
        self.start <= line && line <= self.end
    }

    pub fn encloses(&self, other: &LineSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Smallest span covering both.
    pub fn union(&self, other: &LineSpan) -> LineSpan {
        LineSpan::new(self.start.min(other.start), self.end.max(other.end))
    }
}

impl fmt::Display for LineSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.start, self.end)
    }
}

/// Location of the first syntax error tree-sitter reported.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxDiagnostic {
    pub line: usize,
    pub column: usize,
    pub snippet: String,
}

impl fmt::Display for SyntaxDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "syntax error at line {}, column {}", self.line, self.column)?;
        if !self.snippet.is_empty() {
            write!(f, " near `{}`", self.snippet)?;
        }
        Ok(())
    }
}

pub fn parser() -> Parser {
    let mut parser = Parser::new();
    parser
        .set_language(&tree_sitter_python::LANGUAGE.into())
        .expect("tree-sitter-python grammar is ABI compatible");
    parser
}

/// Parses `src`, returning the tree even when it contains error nodes.
pub fn parse_lenient(src: &str) -> Tree {
    parser().parse(src, None).expect("parser has a language and no timeout")
}

/// Parses `src` and rejects trees with any ERROR or MISSING node.
pub fn parse(src: &str) -> Result<Tree, SyntaxDiagnostic> {
    let tree = parse_lenient(src);
    match first_error(tree.root_node(), src) {
        Some(diag) => Err(diag),
        None => Ok(tree),
    }
}

pub fn parses(src: &str) -> bool {
    parse(src).is_ok()
}

fn first_error(node: Node<'_>, src: &str) -> Option<SyntaxDiagnostic> {
    if !node.has_error() {
        return None;
    }
    if node.is_error() || node.is_missing() {
        let pos = node.start_position();
        let text = node_text(node, src);
        let snippet: String = text.lines().next().unwrap_or("").chars().take(40).collect();
        return Some(SyntaxDiagnostic {
            line: pos.row + 1,
            column: pos.column + 1,
            snippet: if node.is_missing() {
                format!("missing {}", node.kind())
            } else {
                snippet
            },
        });
    }
    let mut cursor = node.walk();
    let children: Vec<Node<'_>> = node.children(&mut cursor).collect();
    children.into_iter().find_map(|c| first_error(c, src))
}

pub fn node_text<'s>(node: Node<'_>, src: &'s str) -> &'s str {
    &src[node.byte_range()]
}

/// Line span of a node, 1-based inclusive.
pub fn node_span(node: Node<'_>) -> LineSpan {
    let start = node.start_position().row + 1;
    let end_pos = node.end_position();
    // A node that ends at column 0 stops at the end of the previous line.
    let end = if end_pos.column == 0 && end_pos.row > node.start_position().row {
        end_pos.row
    } else {
        end_pos.row + 1
    };
    LineSpan::new(start, end)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DefKind {
    Function,
    Class,
}

/// A function or class definition, with decorators folded into its span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Definition {
    pub name: String,
    /// Dotted path from the module, e.g. `Url.validate`.
    pub qualname: String,
    pub kind: DefKind,
    /// Classes enclosing this definition, outermost first.
    pub class_path: Vec<String>,
    /// Span including decorators.
    pub span: LineSpan,
    pub byte_range: std::ops::Range<usize>,
}

impl Definition {
    pub fn text<'s>(&self, src: &'s str) -> &'s str {
        &src[self.byte_range.clone()]
    }
}

/// Unwraps a `decorated_definition` to its inner definition.
pub fn definition_of(node: Node<'_>) -> Option<Node<'_>> {
    match node.kind() {
        "function_definition" | "class_definition" => Some(node),
        "decorated_definition" => node.child_by_field_name("definition"),
        _ => None,
    }
}

fn def_name(node: Node<'_>, src: &str) -> Option<String> {
    let inner = definition_of(node)?;
    inner
        .child_by_field_name("name")
        .map(|n| node_text(n, src).to_string())
}

/// Byte range of a whole statement including leading indentation on its
/// first line, so the text can be dedented as a unit.
fn full_line_range(node: Node<'_>, src: &str) -> std::ops::Range<usize> {
    let start = src[..node.start_byte()].rfind('\n').map_or(0, |i| i + 1);
    start..node.end_byte()
}

/// Functions at module level and methods of (possibly nested) classes.
/// Functions nested inside other functions are part of their parent.
pub fn function_units(tree: &Tree, src: &str) -> Vec<Definition> {
    function_unit_nodes(tree, src).into_iter().map(|(d, _)| d).collect()
}

/// Like [`function_units`], paired with the definition node (the
/// `decorated_definition` when decorators are present).
pub fn function_unit_nodes<'t>(tree: &'t Tree, src: &str) -> Vec<(Definition, Node<'t>)> {
    let mut out = Vec::new();
    collect_units(tree.root_node(), src, &mut Vec::new(), &mut out);
    out
}

fn collect_units<'t>(
    container: Node<'t>,
    src: &str,
    classes: &mut Vec<String>,
    out: &mut Vec<(Definition, Node<'t>)>,
) {
    let mut cursor = container.walk();
    for child in container.named_children(&mut cursor) {
        let Some(inner) = definition_of(child) else {
            continue;
        };
        let Some(name) = def_name(child, src) else {
            continue;
        };
        match inner.kind() {
            "function_definition" => {
                let mut qual = classes.clone();
                qual.push(name.clone());
                let def = Definition {
                    name,
                    qualname: qual.join("."),
                    kind: DefKind::Function,
                    class_path: classes.clone(),
                    span: node_span(child),
                    byte_range: full_line_range(child, src),
                };
                out.push((def, child));
            }
            "class_definition" => {
                if let Some(body) = inner.child_by_field_name("body") {
                    classes.push(name);
                    collect_units(body, src, classes, out);
                    classes.pop();
                }
            }
            _ => {}
        }
    }
}

/// Top-level class definitions, decorators included.
pub fn top_level_classes(tree: &Tree, src: &str) -> Vec<Definition> {
    let root = tree.root_node();
    let mut cursor = root.walk();
    root.named_children(&mut cursor)
        .filter(|c| definition_of(*c).is_some_and(|d| d.kind() == "class_definition"))
        .filter_map(|c| {
            let name = def_name(c, src)?;
            Some(Definition {
                qualname: name.clone(),
                name,
                kind: DefKind::Class,
                class_path: Vec::new(),
                span: node_span(c),
                byte_range: full_line_range(c, src),
            })
        })
        .collect()
}

/// What kind of statement sits at module level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopLevelKind {
    Function,
    Class,
    Assignment,
    Import,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopLevelItem {
    pub kind: TopLevelKind,
    /// Defined name; for assignments the first target identifier.
    pub name: Option<String>,
    pub span: LineSpan,
    pub byte_range: std::ops::Range<usize>,
}

impl TopLevelItem {
    pub fn text<'s>(&self, src: &'s str) -> &'s str {
        &src[self.byte_range.clone()]
    }
}

pub fn top_level_items(tree: &Tree, src: &str) -> Vec<TopLevelItem> {
    let root = tree.root_node();
    let mut cursor = root.walk();
    let mut items = Vec::new();
    for child in root.named_children(&mut cursor) {
        if child.kind() == "comment" {
            continue;
        }
        let (kind, name) = match definition_of(child).map(|d| d.kind()) {
            Some("function_definition") => (TopLevelKind::Function, def_name(child, src)),
            Some("class_definition") => (TopLevelKind::Class, def_name(child, src)),
            _ => match child.kind() {
                "import_statement" | "import_from_statement" | "future_import_statement" => {
                    (TopLevelKind::Import, None)
                }
                "expression_statement" => match assignment_target(child, src) {
                    Some(n) => (TopLevelKind::Assignment, Some(n)),
                    None => (TopLevelKind::Other, None),
                },
                _ => (TopLevelKind::Other, None),
            },
        };
        items.push(TopLevelItem {
            kind,
            name,
            span: node_span(child),
            byte_range: child.byte_range(),
        });
    }
    items
}

/// `NAME = ...` or `NAME: T = ...` at the start of an expression statement.
fn assignment_target(stmt: Node<'_>, src: &str) -> Option<String> {
    let expr = stmt.named_child(0)?;
    if expr.kind() != "assignment" {
        return None;
    }
    let left = expr.child_by_field_name("left")?;
    match left.kind() {
        "identifier" => Some(node_text(left, src).to_string()),
        "pattern_list" | "tuple_pattern" => {
            let first = left.named_child(0)?;
            (first.kind() == "identifier").then(|| node_text(first, src).to_string())
        }
        _ => None,
    }
}

/// Names bound at module level by definitions and simple assignments.
pub fn top_level_names(tree: &Tree, src: &str) -> Vec<String> {
    top_level_items(tree, src)
        .into_iter()
        .filter_map(|i| i.name)
        .collect()
}

/// True for a string-only expression statement that opens a module, class
/// or function body.
pub fn is_docstring(node: Node<'_>) -> bool {
    if node.kind() != "expression_statement" || node.named_child_count() != 1 {
        return false;
    }
    let only = node.named_child(0).expect("one named child");
    if !matches!(only.kind(), "string" | "concatenated_string") {
        return false;
    }
    let Some(parent) = node.parent() else {
        return false;
    };
    if !matches!(parent.kind(), "module" | "block") {
        return false;
    }
    let mut cursor = parent.walk();
    let first = parent
        .named_children(&mut cursor)
        .find(|c| c.kind() != "comment");
    first.map(|f| f.id()) == Some(node.id())
}

/// Structural fingerprint of a subtree. Comments never contribute;
/// docstrings are dropped when `skip_docstrings` is set. Whitespace and
/// layout are invisible because only token text is recorded.
pub fn signature(node: Node<'_>, src: &str, skip_docstrings: bool) -> String {
    let mut out = String::new();
    write_signature(node, src, skip_docstrings, &mut out);
    out
}

fn write_signature(node: Node<'_>, src: &str, skip_docs: bool, out: &mut String) {
    if node.kind() == "comment" || (skip_docs && is_docstring(node)) {
        return;
    }
    if node.child_count() == 0 {
        out.push_str(node_text(node, src));
        out.push('\u{1f}');
        return;
    }
    out.push('(');
    out.push_str(node.kind());
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        write_signature(child, src, skip_docs, out);
    }
    out.push(')');
}

/// Removes the common leading whitespace of all non-blank lines.
pub fn dedent(text: &str) -> String {
    let indent = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    let mut out = String::with_capacity(text.len());
    for (i, line) in text.split('\n').enumerate() {
        if i > 0 {
            out.push('\n');
        }
        if line.trim().is_empty() {
            out.push_str(line.trim_start_matches([' ', '\t']));
        } else {
            out.push_str(&line[indent.min(line.len())..]);
        }
    }
    out
}

/// Prefixes every non-blank line with `prefix`.
pub fn indent(text: &str, prefix: &str) -> String {
    text.split('\n')
        .map(|l| {
            if l.trim().is_empty() {
                String::new()
            } else {
                format!("{prefix}{l}")
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Leading whitespace of the line containing byte offset `at`.
pub fn line_indent(src: &str, at: usize) -> &str {
    let start = src[..at].rfind('\n').map_or(0, |i| i + 1);
    let line = &src[start..];
    let width = line.len() - line.trim_start_matches([' ', '\t']).len();
    &line[..width]
}

/// Identifier nodes under `node` that reference `name` as a variable,
/// excluding attribute names (`x.name`) and keyword-argument names.
pub fn identifier_refs<'t>(node: Node<'t>, src: &str, name: &str) -> Vec<Node<'t>> {
    let mut out = Vec::new();
    collect_refs(node, src, name, &mut out);
    out
}

fn collect_refs<'t>(node: Node<'t>, src: &str, name: &str, out: &mut Vec<Node<'t>>) {
    if node.kind() == "identifier" && node_text(node, src) == name {
        let excluded = node.parent().is_some_and(|p| {
            (p.kind() == "attribute" && p.child_by_field_name("attribute").map(|a| a.id()) == Some(node.id()))
                || (p.kind() == "keyword_argument"
                    && p.child_by_field_name("name").map(|a| a.id()) == Some(node.id()))
        });
        if !excluded {
            out.push(node);
        }
        return;
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        collect_refs(child, src, name, out);
    }
}

/// Applies non-overlapping byte-range replacements.
pub fn splice(src: &str, mut edits: Vec<(std::ops::Range<usize>, String)>) -> String {
    edits.sort_by_key(|(r, _)| r.start);
    let mut out = String::with_capacity(src.len());
    let mut pos = 0;
    for (range, text) in edits {
        debug_assert!(range.start >= pos, "overlapping edits");
        out.push_str(&src[pos..range.start]);
        out.push_str(&text);
        pos = range.end;
    }
    out.push_str(&src[pos..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#""""Module doc."""
import os

LIMIT = 3

def free(a, b):
    """Adds."""
    return a + b  # sum

@decorator
def decorated(x):
    def inner(y):
        return y
    return inner(x)

class Outer:
    ATTR = 1

    def method(self):
        return self.ATTR

    class Inner:
        def deep(self):
            pass
"#;

    #[test]
    fn units_cover_methods_but_not_nested_functions() {
        let tree = parse(SAMPLE).unwrap();
        let names: Vec<_> = function_units(&tree, SAMPLE)
            .into_iter()
            .map(|d| d.qualname)
            .collect();
        assert_eq!(names, ["free", "decorated", "Outer.method", "Outer.Inner.deep"]);
    }

    #[test]
    fn decorated_span_starts_at_decorator() {
        let tree = parse(SAMPLE).unwrap();
        let units = function_units(&tree, SAMPLE);
        let dec = units.iter().find(|d| d.name == "decorated").unwrap();
        assert_eq!(dec.span, LineSpan::new(10, 14));
        assert!(dec.text(SAMPLE).starts_with("@decorator"));
    }

    #[test]
    fn top_level_items_classify_statements() {
        let tree = parse(SAMPLE).unwrap();
        let kinds: Vec<_> = top_level_items(&tree, SAMPLE)
            .into_iter()
            .map(|i| (i.kind, i.name))
            .collect();
        assert_eq!(kinds[0], (TopLevelKind::Other, None));
        assert_eq!(kinds[1], (TopLevelKind::Import, None));
        assert_eq!(kinds[2], (TopLevelKind::Assignment, Some("LIMIT".into())));
        assert_eq!(kinds[3], (TopLevelKind::Function, Some("free".into())));
        assert_eq!(kinds[5], (TopLevelKind::Class, Some("Outer".into())));
    }

    #[test]
    fn signature_ignores_comments_docstrings_and_layout() {
        let a = "def f(x):\n    \"\"\"Doc.\"\"\"\n    return x + 1  # c\n";
        let b = "def f(x):\n    # other\n    return (x+1)\n";
        let c = "def f(x):\n    return x+1\n";
        let sig = |s: &str| signature(parse(s).unwrap().root_node(), s, true);
        assert_ne!(sig(a), sig(b), "parentheses are structure");
        assert_eq!(sig(a), sig(c));
        let with_docs = |s: &str| signature(parse(s).unwrap().root_node(), s, false);
        assert_ne!(with_docs(a), with_docs(c));
    }

    #[test]
    fn parse_reports_first_error_line() {
        let err = parse("x = 1\ndef f(:\n    pass\n").unwrap_err();
        assert_eq!(err.line, 2);
    }

    #[test]
    fn dedent_and_indent_are_inverse_on_code() {
        let body = "    def m(self):\n        return 1\n";
        let flat = dedent(body);
        assert_eq!(flat, "def m(self):\n    return 1\n");
        assert_eq!(indent(&flat, "    "), body);
    }

    #[test]
    fn identifier_refs_skip_attributes_and_keywords() {
        let src = "def f(h):\n    return h(x.h, h=1) + g.h\n";
        let tree = parse(src).unwrap();
        let refs = identifier_refs(tree.root_node(), src, "h");
        assert_eq!(refs.len(), 2);
    }
}
