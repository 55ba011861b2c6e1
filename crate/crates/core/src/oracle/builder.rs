use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tree_sitter::Node;

use super::model::{PatchOracle, POST_PLACEHOLDER, PRE_PLACEHOLDER};
use crate::context::CodeContext;
use crate::pyast::{self, SyntaxDiagnostic};

pub const PRE_PREFIX: &str = "pre_";
pub const POST_PREFIX: &str = "post_";

/// An executable program holding both implementations side by side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonProgram {
    pub source: String,
    pub pre_fn_name: String,
    pub post_fn_name: String,
    /// Internal dependencies linked into the program, in order.
    pub linked_deps: Vec<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BuildError {
    #[error("template has no {0} placeholder")]
    PlaceholderMissing(&'static str),
    #[error("renamed identifier `{0}` is already bound by a dependency")]
    NameCollision(String),
    #[error("{side} implementation does not parse: {diagnostic}")]
    FunctionSource { side: &'static str, diagnostic: SyntaxDiagnostic },
    #[error("assembled program does not parse: {0}")]
    ParseFailure(SyntaxDiagnostic),
}

/// Substitutes both implementations into the oracle template and links the
/// module context ahead of it.
pub fn build_comparison_program(o: &PatchOracle, ctx: &CodeContext) -> Result<ComparisonProgram, BuildError> {
    build_from_template(&o.program_template, ctx)
}

/// [`build_comparison_program`] over a raw template.
pub fn build_from_template(template: &str, ctx: &CodeContext) -> Result<ComparisonProgram, BuildError> {
    if !template.contains(PRE_PLACEHOLDER) {
        return Err(BuildError::PlaceholderMissing("pre"));
    }
    if !template.contains(POST_PLACEHOLDER) {
        return Err(BuildError::PlaceholderMissing("post"));
    }
    let fname = ctx.function_name();
    let pre_fn_name = format!("{PRE_PREFIX}{fname}");
    let post_fn_name = format!("{POST_PREFIX}{fname}");

    let (pre_block, post_block, introduced) = match &ctx.enclosing_class {
        None => {
            let pre = rename_free_function(&ctx.pre_function, fname, PRE_PREFIX).map_err(|diagnostic| {
                BuildError::FunctionSource { side: "pre", diagnostic }
            })?;
            let post = rename_free_function(&ctx.post_function, fname, POST_PREFIX).map_err(|diagnostic| {
                BuildError::FunctionSource { side: "post", diagnostic }
            })?;
            (pre, post, vec![pre_fn_name.clone(), post_fn_name.clone()])
        }
        Some(class_src) => {
            let outer = ctx.class_path()[0].to_string();
            let pre = class_copy(class_src, ctx, &ctx.pre_function, PRE_PREFIX)
                .map_err(|diagnostic| BuildError::FunctionSource { side: "pre", diagnostic })?;
            let post = class_copy(class_src, ctx, &ctx.post_function, POST_PREFIX)
                .map_err(|diagnostic| BuildError::FunctionSource { side: "post", diagnostic })?;
            (
                pre,
                post,
                vec![
                    pre_fn_name.clone(),
                    post_fn_name.clone(),
                    format!("{PRE_PREFIX}{outer}"),
                    format!("{POST_PREFIX}{outer}"),
                ],
            )
        }
    };

    let mut bound: BTreeSet<String> = ctx.internal_deps.iter().map(|d| d.name.clone()).collect();
    for stmt in &ctx.external_deps {
        bound.extend(import_bound_names(stmt));
    }
    if let Some(name) = introduced.iter().find(|n| bound.contains(*n)) {
        return Err(BuildError::NameCollision(name.clone()));
    }

    let body = substitute(template, PRE_PLACEHOLDER, &pre_block);
    let body = substitute(&body, POST_PLACEHOLDER, &post_block);

    let mut source = String::new();
    if !ctx.external_deps.is_empty() {
        for stmt in &ctx.external_deps {
            source.push_str(stmt.trim_end());
            source.push('\n');
        }
        source.push_str("\n\n");
    }
    for dep in &ctx.internal_deps {
        source.push_str(dep.source.trim_end());
        source.push_str("\n\n\n");
    }
    source.push_str(&body);
    if !source.ends_with('\n') {
        source.push('\n');
    }
    pyast::parse(&source).map_err(BuildError::ParseFailure)?;

    Ok(ComparisonProgram {
        source,
        pre_fn_name,
        post_fn_name,
        linked_deps: ctx.internal_deps.iter().map(|d| d.name.clone()).collect(),
    })
}

/// Replaces the whole line holding `marker` with `block`, indented like
/// that line.
fn substitute(template: &str, marker: &str, block: &str) -> String {
    let mut out = String::with_capacity(template.len() + block.len());
    for line in template.split_inclusive('\n') {
        if line.contains(marker) {
            let indent: String = line.chars().take_while(|c| *c == ' ' || *c == '\t').collect();
            out.push_str(&pyast::indent(block.trim_end(), &indent));
            out.push('\n');
        } else {
            out.push_str(line);
        }
    }
    out
}

/// Renames a top-level function and the functions nested in it, rewriting
/// every reference inside the definition.
fn rename_free_function(src: &str, name: &str, prefix: &str) -> Result<String, SyntaxDiagnostic> {
    let tree = pyast::parse(src)?;
    let root = tree.root_node();
    let Some(def) = root.named_child(0).and_then(pyast::definition_of) else {
        return Ok(src.to_string());
    };
    let mut names = BTreeSet::from([name.to_string()]);
    if let Some(body) = def.child_by_field_name("body") {
        nested_function_names(body, src, &mut names);
    }
    let mut edits = Vec::new();
    for n in &names {
        for node in pyast::identifier_refs(def, src, n) {
            edits.push((node.byte_range(), format!("{prefix}{n}")));
        }
    }
    Ok(pyast::splice(src, edits))
}

fn nested_function_names(node: Node<'_>, src: &str, out: &mut BTreeSet<String>) {
    let mut cursor = node.walk();
    for child in node.named_children(&mut cursor) {
        match pyast::definition_of(child).map(|d| (d.kind(), d)) {
            Some(("function_definition", d)) => {
                if let Some(n) = d.child_by_field_name("name") {
                    out.insert(pyast::node_text(n, src).to_string());
                }
                if let Some(body) = d.child_by_field_name("body") {
                    nested_function_names(body, src, out);
                }
            }
            Some(_) => {}
            None => nested_function_names(child, src, out),
        }
    }
}

/// Copy of the outermost enclosing class holding `method_src` as the
/// target method, renamed with `prefix`, followed by a module-level alias
/// `<prefix><method> = <prefix><Outer>[.Inner].<method>`.
fn class_copy(class_src: &str, ctx: &CodeContext, method_src: &str, prefix: &str) -> Result<String, SyntaxDiagnostic> {
    let tree = pyast::parse(class_src)?;
    let units = pyast::function_units(&tree, class_src);
    let with_method = match units.iter().find(|u| u.qualname == ctx.qualname) {
        Some(unit) => {
            let indent = pyast::line_indent(class_src, unit.byte_range.start).to_string();
            let replacement = pyast::indent(method_src.trim_end(), &indent);
            pyast::splice(class_src, vec![(unit.byte_range.clone(), replacement)])
        }
        None => class_src.to_string(),
    };
    let tree = pyast::parse(&with_method)?;
    let classes = ctx.class_path();
    let outer = classes[0];
    let edits = pyast::identifier_refs(tree.root_node(), &with_method, outer)
        .into_iter()
        .map(|n| (n.byte_range(), format!("{prefix}{outer}")))
        .collect();
    let mut out = pyast::splice(&with_method, edits);
    let mut path = vec![format!("{prefix}{outer}")];
    path.extend(classes[1..].iter().map(|c| c.to_string()));
    let fname = ctx.function_name();
    out = out.trim_end().to_string();
    out.push_str(&format!("\n\n\n{prefix}{fname} = {}.{fname}\n", path.join(".")));
    Ok(out)
}

/// Names an import statement binds in the importing module.
fn import_bound_names(stmt: &str) -> Vec<String> {
    let tree = pyast::parse_lenient(stmt);
    let root = tree.root_node();
    let mut names = Vec::new();
    let mut cursor = root.walk();
    for node in root.named_children(&mut cursor) {
        let mut c = node.walk();
        let module = node.child_by_field_name("module_name").map(|m| m.id());
        for child in node.named_children(&mut c) {
            if Some(child.id()) == module {
                continue;
            }
            match child.kind() {
                "aliased_import" => {
                    if let Some(alias) = child.child_by_field_name("alias") {
                        names.push(pyast::node_text(alias, stmt).to_string());
                    }
                }
                "dotted_name" => {
                    let text = pyast::node_text(child, stmt);
                    let bound = if node.kind() == "import_statement" {
                        text.split('.').next().unwrap_or(text)
                    } else {
                        text
                    };
                    names.push(bound.to_string());
                }
                _ => {}
            }
        }
    }
    names
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::InternalDep;

    fn free_ctx(pre: &str, post: &str) -> CodeContext {
        CodeContext {
            qualname: "f".into(),
            pre_function: pre.into(),
            post_function: post.into(),
            internal_deps: vec![InternalDep {
                name: "h".into(),
                source: "def h(x):\n    return x * 2".into(),
            }],
            external_deps: vec!["import math".into()],
            enclosing_class: None,
        }
    }

    const TEMPLATE: &str = "# <<PRE_IMPL>>\n# <<POST_IMPL>>\n## PRESERVED BEHAVIORS\nassert pre_f(1) == post_f(1), \"same\"\n";

    #[test]
    fn free_function_is_renamed_with_recursion() {
        let pre = "def f(n):\n    return 1 if n <= 1 else n * f(n - 1)\n";
        let post = "def f(n):\n    if n <= 1:\n        return 1\n    return n * f(n - 1)\n";
        let p = build_from_template(TEMPLATE, &free_ctx(pre, post)).unwrap();
        assert!(p.source.contains("def pre_f(n):\n    return 1 if n <= 1 else n * pre_f(n - 1)"));
        assert!(p.source.contains("return n * post_f(n - 1)"));
        assert!(!p.source.contains(PRE_PLACEHOLDER) && !p.source.contains(POST_PLACEHOLDER));
        assert_eq!((p.pre_fn_name.as_str(), p.post_fn_name.as_str()), ("pre_f", "post_f"));
        assert_eq!(p.linked_deps, ["h"]);
        assert!(p.source.starts_with("import math\n"));
    }

    #[test]
    fn nested_helpers_are_duplicated() {
        let pre = "def f(x):\n    def h(y):\n        return y + 1\n    return h(x)\n";
        let post = "def f(x):\n    def h(y):\n        return y + 2\n    return h(x)\n";
        let p = build_from_template(TEMPLATE, &free_ctx(pre, post)).unwrap();
        assert!(p.source.contains("def pre_h(y):") && p.source.contains("return pre_h(x)"));
        assert!(p.source.contains("def post_h(y):") && p.source.contains("return post_h(x)"));
        // the module-level h is untouched
        assert!(p.source.contains("def h(x):\n    return x * 2"));
    }

    #[test]
    fn attribute_and_keyword_names_survive() {
        let pre = "def f(obj):\n    return obj.f(f=1)\n";
        let p = build_from_template(TEMPLATE, &free_ctx(pre, pre)).unwrap();
        assert!(p.source.contains("def pre_f(obj):\n    return obj.f(f=1)"));
    }

    #[test]
    fn placeholders_are_required() {
        let ctx = free_ctx("def f():\n    pass\n", "def f():\n    pass\n");
        assert_eq!(
            build_from_template("assert True, 'x'\n", &ctx),
            Err(BuildError::PlaceholderMissing("pre"))
        );
    }

    #[test]
    fn collision_with_dependency() {
        let mut ctx = free_ctx("def f():\n    pass\n", "def f():\n    pass\n");
        ctx.external_deps.push("from helpers import thing as pre_f".into());
        assert_eq!(
            build_from_template(TEMPLATE, &ctx),
            Err(BuildError::NameCollision("pre_f".into()))
        );
    }

    #[test]
    fn method_target_duplicates_class() {
        let class = "class Url:\n    SCHEMES = ('http',)\n\n    def validation(self, v):\n        return v in Url.SCHEMES\n\n    def other(self):\n        return self.validation('x')\n";
        let ctx = CodeContext {
            qualname: "Url.validation".into(),
            pre_function: "def validation(self, v):\n    return v in Url.SCHEMES\n".into(),
            post_function: "def validation(self, v):\n    return v.lower() in Url.SCHEMES\n".into(),
            internal_deps: vec![],
            external_deps: vec![],
            enclosing_class: Some(class.into()),
        };
        let t = "# <<PRE_IMPL>>\n# <<POST_IMPL>>\nassert pre_validation(pre_Url(), 'http'), \"[PRESERVED BEHAVIORS] x\"\n";
        let p = build_from_template(t, &ctx).unwrap();
        assert!(p.source.contains("class pre_Url:"));
        assert!(p.source.contains("class post_Url:"));
        assert!(p.source.contains("        return v.lower() in post_Url.SCHEMES"));
        assert!(p.source.contains("pre_validation = pre_Url.validation\n"));
        assert!(p.source.contains("post_validation = post_Url.validation\n"));
        assert_eq!(p.source.matches("def other(self)").count(), 2);
    }

    #[test]
    fn building_is_idempotent() {
        let pre = "def f(x):\n    return x\n";
        let a = build_from_template(TEMPLATE, &free_ctx(pre, pre)).unwrap();
        let b = build_from_template(TEMPLATE, &free_ctx(pre, pre)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bound_names_of_imports() {
        assert_eq!(import_bound_names("import os.path"), ["os"]);
        assert_eq!(import_bound_names("import numpy as np"), ["np"]);
        assert_eq!(import_bound_names("from a.b import c, d as e"), ["c", "e"]);
    }
}
