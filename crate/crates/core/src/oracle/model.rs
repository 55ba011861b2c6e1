use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use tree_sitter::Node;

use crate::pyast::{self, LineSpan};

/// Marker replaced by the renamed pre-patch implementation.
pub const PRE_PLACEHOLDER: &str = "<<PRE_IMPL>>";
/// Marker replaced by the renamed post-patch implementation.
pub const POST_PLACEHOLDER: &str = "<<POST_IMPL>>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AssertionKind {
    /// Same behavior before and after the patch.
    Preserved,
    /// Behavior the patch intentionally modifies.
    Changed,
    /// Functionality the patch introduces.
    New,
}

/// Which implementation(s) an assertion constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Target {
    Pre,
    Post,
    Cross,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Pre => "PRE",
            Target::Post => "POST",
            Target::Cross => "CROSS",
        })
    }
}

impl Target {
    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag.to_ascii_uppercase().as_str() {
            "PRE" => Some(Target::Pre),
            "POST" => Some(Target::Post),
            "CROSS" => Some(Target::Cross),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assertion {
    pub kind: AssertionKind,
    pub target: Target,
    pub message: String,
    /// Lines of the `assert` statement within the template.
    pub source_span: LineSpan,
}

/// An inferred patch oracle: a comparison-program template with one
/// placeholder per implementation, and the assertions it contains.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchOracle {
    pub program_template: String,
    pub assertions: Vec<Assertion>,
    pub revision: u32,
}

/// Reasons a candidate template is not a usable oracle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateProblems(pub Vec<String>);

impl fmt::Display for TemplateProblems {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join("; "))
    }
}

static KIND_TAG: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\[\s*(PRESERVED|CHANGED|NEW)\s+BEHAVIOU?RS?\s*\]").expect("static regex"));
static KIND_HEADER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^\s*#+\s*(PRESERVED|CHANGED|NEW)\s+BEHAVIOU?RS?\b").expect("static regex"));
static TARGET_TAG: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\[\s*(PRE|POST|CROSS)\s*\]").expect("static regex"));

fn kind_from_word(word: &str) -> AssertionKind {
    match word.to_ascii_uppercase().as_str() {
        "PRESERVED" => AssertionKind::Preserved,
        "CHANGED" => AssertionKind::Changed,
        _ => AssertionKind::New,
    }
}

/// Kind tag carried in an assertion message, e.g. `[CHANGED BEHAVIORS]`.
pub fn kind_tag(message: &str) -> Option<AssertionKind> {
    KIND_TAG.captures(message).map(|c| kind_from_word(&c[1]))
}

/// Target tag carried in an assertion message, e.g. `[POST]`.
pub fn target_tag(message: &str) -> Option<Target> {
    TARGET_TAG.captures(message).and_then(|c| Target::from_tag(&c[1]))
}

/// Target of an assertion: its explicit tag, or `Cross` when untagged.
pub fn classify_assertion_target(a: &Assertion) -> Target {
    target_tag(&a.message).unwrap_or(Target::Cross)
}

impl PatchOracle {
    /// Validates `template` and extracts its assertions.
    pub fn parse(template: &str, revision: u32) -> Result<Self, TemplateProblems> {
        let mut problems = Vec::new();
        for (marker, side) in [(PRE_PLACEHOLDER, "pre"), (POST_PLACEHOLDER, "post")] {
            match template.matches(marker).count() {
                0 => problems.push(format!("missing placeholder: {side}")),
                1 => {}
                n => problems.push(format!("placeholder {side} appears {n} times, expected once")),
            }
        }
        let tree = match pyast::parse(template) {
            Ok(t) => t,
            Err(diag) => {
                problems.push(format!("program does not parse: {diag}"));
                return Err(TemplateProblems(problems));
            }
        };
        let lines: Vec<&str> = template.lines().collect();
        let mut assertions = Vec::new();
        let mut asserts = Vec::new();
        collect_asserts(tree.root_node(), &mut asserts);
        for (i, node) in asserts.into_iter().enumerate() {
            let span = pyast::node_span(node);
            let message = assertion_message(node, template);
            if message.trim().is_empty() {
                problems.push(format!("assertion {i} has no message"));
                continue;
            }
            let kind = kind_tag(&message).or_else(|| {
                lines[..span.start - 1]
                    .iter()
                    .rev()
                    .find_map(|l| KIND_HEADER.captures(l).map(|c| kind_from_word(&c[1])))
            });
            let Some(kind) = kind else {
                problems.push(format!("assertion {i} (line {}) has no behavior kind tag", span.start));
                continue;
            };
            let target = target_tag(&message).unwrap_or(Target::Cross);
            assertions.push(Assertion {
                kind,
                target,
                message,
                source_span: span,
            });
        }
        if assertions.is_empty() && problems.iter().all(|p| !p.starts_with("assertion")) {
            problems.push("no assertions found".to_string());
        }
        if problems.is_empty() {
            Ok(Self {
                program_template: template.to_string(),
                assertions,
                revision,
            })
        } else {
            Err(TemplateProblems(problems))
        }
    }

    pub fn count_by_kind(&self, kind: AssertionKind) -> usize {
        self.assertions.iter().filter(|a| a.kind == kind).count()
    }
}

fn collect_asserts<'t>(node: Node<'t>, out: &mut Vec<Node<'t>>) {
    if node.kind() == "assert_statement" {
        out.push(node);
        return;
    }
    let mut cursor = node.walk();
    for child in node.named_children(&mut cursor) {
        collect_asserts(child, out);
    }
}

/// The message operand of an `assert`, with string quoting removed.
fn assertion_message(node: Node<'_>, src: &str) -> String {
    let mut cursor = node.walk();
    let operands: Vec<Node<'_>> = node
        .named_children(&mut cursor)
        .filter(|c| c.kind() != "comment")
        .collect();
    match operands.get(1) {
        Some(msg) => string_value(*msg, src).unwrap_or_else(|| pyast::node_text(*msg, src).to_string()),
        None => String::new(),
    }
}

fn string_value(node: Node<'_>, src: &str) -> Option<String> {
    match node.kind() {
        "parenthesized_expression" => node.named_child(0).and_then(|n| string_value(n, src)),
        "concatenated_string" => {
            let mut cursor = node.walk();
            let parts: Option<Vec<String>> = node
                .named_children(&mut cursor)
                .filter(|c| c.kind() != "comment")
                .map(|c| string_value(c, src))
                .collect();
            parts.map(|p| p.concat())
        }
        "string" => {
            let mut cursor = node.walk();
            Some(
                node.named_children(&mut cursor)
                    .filter(|c| matches!(c.kind(), "string_content" | "interpolation" | "escape_sequence"))
                    .map(|c| pyast::node_text(c, src))
                    .collect(),
            )
        }
        _ => None,
    }
}
