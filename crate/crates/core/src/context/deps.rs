use thiserror::Error;
use tree_sitter::Node;

use super::{FunctionLocator, PackageMap};
use crate::pyast::{self, SyntaxDiagnostic, TopLevelKind};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("`{statement}` in {path} climbs {level} levels but the module sits {depth} package(s) deep")]
pub struct UnresolvableRelativeImport {
    pub path: String,
    pub statement: String,
    pub level: usize,
    pub depth: usize,
}

/// Top-level functions, classes and simple assignments of `file`, minus the
/// target function and the class that encloses it (that class travels
/// separately as the enclosing class).
pub fn extract_internal_deps(
    file: &str,
    target: &FunctionLocator,
) -> Result<Vec<(String, String)>, SyntaxDiagnostic> {
    let tree = pyast::parse(file)?;
    let excluded = match target.class_path().first() {
        Some(outer) => (TopLevelKind::Class, outer.to_string()),
        None => (TopLevelKind::Function, target.function_name().to_string()),
    };
    let mut deps: Vec<(String, String)> = Vec::new();
    for item in pyast::top_level_items(&tree, file) {
        if !matches!(
            item.kind,
            TopLevelKind::Function | TopLevelKind::Class | TopLevelKind::Assignment
        ) {
            continue;
        }
        let Some(name) = item.name.clone() else {
            continue;
        };
        if item.kind == excluded.0 && name == excluded.1 {
            continue;
        }
        // a later binding of the same name wins, as at import time
        deps.retain(|(n, _)| n != &name);
        deps.push((name, item.text(file).to_string()));
    }
    Ok(deps)
}

/// Module-level import statements of `file` with relative imports rewritten
/// to absolute ones, based on where `path` sits in the package layout.
pub fn resolve_external_deps(
    file: &str,
    path: &str,
    layout: &PackageMap,
) -> Result<Vec<String>, UnresolvableRelativeImport> {
    let tree = pyast::parse_lenient(file);
    let root = tree.root_node();
    let package = layout.package_of(path);
    let mut out = Vec::new();
    let mut cursor = root.walk();
    for node in root.named_children(&mut cursor) {
        match node.kind() {
            "import_statement" | "future_import_statement" => {
                out.push(pyast::node_text(node, file).to_string());
            }
            "import_from_statement" => out.push(absolutize(node, file, path, &package)?),
            _ => {}
        }
    }
    Ok(out)
}

fn absolutize(
    node: Node<'_>,
    src: &str,
    path: &str,
    package: &[String],
) -> Result<String, UnresolvableRelativeImport> {
    let text = pyast::node_text(node, src);
    let Some(module) = node.child_by_field_name("module_name") else {
        return Ok(text.to_string());
    };
    if module.kind() != "relative_import" {
        return Ok(text.to_string());
    }
    let module_text = pyast::node_text(module, src);
    let level = module_text.chars().take_while(|c| *c == '.').count();
    let rest = module_text[level..].trim();
    if level > package.len() {
        return Err(UnresolvableRelativeImport {
            path: path.to_string(),
            statement: text.to_string(),
            level,
            depth: package.len(),
        });
    }
    let mut parts: Vec<&str> = package[..package.len() + 1 - level].iter().map(String::as_str).collect();
    if !rest.is_empty() {
        parts.push(rest);
    }
    // everything after the module reference, starting at `import`
    let tail = &src[module.end_byte()..node.end_byte()];
    Ok(format!("from {}{}", parts.join("."), tail))
}

/// Full source of the outermost class enclosing the target, when the target
/// is a method.
pub fn extract_enclosing_class(file: &str, target: &FunctionLocator) -> Result<Option<String>, SyntaxDiagnostic> {
    let tree = pyast::parse(file)?;
    let Some(outer) = target.class_path().first().map(|s| s.to_string()) else {
        return Ok(None);
    };
    Ok(pyast::top_level_classes(&tree, file)
        .into_iter()
        .rev()
        .find(|c| c.name == outer)
        .map(|c| {
            let mut text = c.text(file).to_string();
            text.push('\n');
            text
        }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingestion::Snapshot;
    use crate::pyast::LineSpan;

    fn locator(name: &str, class: Option<&str>) -> FunctionLocator {
        FunctionLocator {
            path: "pkg/m.py".into(),
            name: name.into(),
            pre_span: LineSpan::new(1, 1),
            post_span: LineSpan::new(1, 1),
            enclosing_class: class.map(str::to_string),
        }
    }

    #[test]
    fn internal_deps_exclude_target() {
        let src = "def f():\n    pass\n\ndef g():\n    pass\n\ndef h():\n    return f() + g()\n";
        let deps = extract_internal_deps(src, &locator("h", None)).unwrap();
        let names: Vec<_> = deps.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ["f", "g"]);
    }

    #[test]
    fn only_target_means_no_deps() {
        let src = "def h():\n    return 1\n";
        assert!(extract_internal_deps(src, &locator("h", None)).unwrap().is_empty());
    }

    #[test]
    fn method_target_leaves_class_to_enclosing_extraction() {
        let src = "class A:\n    def m(self):\n        return b()\n\ndef b():\n    return 2\n";
        let deps = extract_internal_deps(src, &locator("A.m", Some("A"))).unwrap();
        assert_eq!(deps, vec![("b".to_string(), "def b():\n    return 2".to_string())]);
        let class = extract_enclosing_class(src, &locator("A.m", Some("A"))).unwrap().unwrap();
        assert!(class.starts_with("class A:") && class.contains("def m(self)"));
    }

    #[test]
    fn nested_class_yields_outermost() {
        let src = "class Outer:\n    class Inner:\n        def m(self):\n            return 1\n";
        let class = extract_enclosing_class(src, &locator("Outer.Inner.m", Some("Outer.Inner"))).unwrap().unwrap();
        assert!(class.starts_with("class Outer:"));
        assert!(pyast::parses(&class));
    }

    #[test]
    fn free_function_has_no_class() {
        let src = "def f():\n    pass\n";
        assert_eq!(extract_enclosing_class(src, &locator("f", None)).unwrap(), None);
    }

    #[test]
    fn duplicate_names_keep_last_binding() {
        let src = "X = 1\ndef f():\n    pass\nX = 2\ndef t():\n    pass\n";
        let deps = extract_internal_deps(src, &locator("t", None)).unwrap();
        assert_eq!(
            deps,
            vec![("f".into(), "def f():\n    pass".into()), ("X".into(), "X = 2".into())]
        );
    }

    fn layout() -> PackageMap {
        PackageMap::from_snapshot(&Snapshot::from_files([
            ("marshmallow/__init__.py", ""),
            ("marshmallow/fields.py", ""),
            ("marshmallow/sub/__init__.py", ""),
            ("marshmallow/sub/x.py", ""),
        ]))
    }

    #[test]
    fn relative_imports_become_absolute() {
        let src = "from . import exceptions\nfrom .utils import (\n    a,\n    b as c,\n)\nimport math\nfrom typing import Any\n";
        let deps = resolve_external_deps(src, "marshmallow/fields.py", &layout()).unwrap();
        assert_eq!(
            deps,
            [
                "from marshmallow import exceptions",
                "from marshmallow.utils import (\n    a,\n    b as c,\n)",
                "import math",
                "from typing import Any",
            ]
        );
    }

    #[test]
    fn parent_relative_import() {
        let src = "from ..fields import Url\n";
        let deps = resolve_external_deps(src, "marshmallow/sub/x.py", &layout()).unwrap();
        assert_eq!(deps, ["from marshmallow.fields import Url"]);
    }

    #[test]
    fn too_deep_relative_import_is_rejected() {
        let src = "from ...x import y\n";
        let err = resolve_external_deps(src, "marshmallow/sub/x.py", &layout()).unwrap_err();
        assert_eq!((err.level, err.depth), (3, 2));
    }

    #[test]
    fn non_toplevel_imports_ignored() {
        let src = "def f():\n    import os\n    return os\n";
        assert!(resolve_external_deps(src, "marshmallow/fields.py", &layout()).unwrap().is_empty());
    }
}
