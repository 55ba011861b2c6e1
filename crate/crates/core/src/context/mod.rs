//! Code context of the modified function: both implementations plus the
//! module-level definitions and imports needed to run them in isolation.

mod deps;
mod locate;
mod package_map;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingestion::{FileDiff, FileStatus, Snapshot};
use crate::pyast::{self, LineSpan, SyntaxDiagnostic};

pub use deps::{extract_enclosing_class, extract_internal_deps, resolve_external_deps, UnresolvableRelativeImport};
pub use locate::{locate_modified_function, LocateError};
pub use package_map::PackageMap;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionLocator {
    pub path: String,
    /// Qualified name, e.g. `Url.validate` for a method.
    pub name: String,
    pub pre_span: LineSpan,
    pub post_span: LineSpan,
    /// Qualified name of the innermost enclosing class.
    pub enclosing_class: Option<String>,
}

impl FunctionLocator {
    /// Bare function name, the last component of `name`.
    pub fn function_name(&self) -> &str {
        self.name.rsplit('.').next().unwrap_or(&self.name)
    }

    /// Enclosing classes from outermost to innermost.
    pub fn class_path(&self) -> Vec<&str> {
        self.enclosing_class
            .as_deref()
            .map(|c| c.split('.').collect())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InternalDep {
    pub name: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeContext {
    /// Qualified name of the modified function.
    pub qualname: String,
    /// Pre-patch definition, dedented, decorators included.
    pub pre_function: String,
    pub post_function: String,
    /// Top-level definitions of the modified file, in source order.
    pub internal_deps: Vec<InternalDep>,
    /// Absolute import statements of the modified file.
    pub external_deps: Vec<String>,
    /// Outermost class enclosing the function when it is a method.
    pub enclosing_class: Option<String>,
}

impl CodeContext {
    pub fn function_name(&self) -> &str {
        self.qualname.rsplit('.').next().unwrap_or(&self.qualname)
    }

    /// Classes enclosing the function, outermost first.
    pub fn class_path(&self) -> Vec<&str> {
        let mut parts: Vec<&str> = self.qualname.split('.').collect();
        parts.pop();
        parts
    }

    pub fn is_method(&self) -> bool {
        self.enclosing_class.is_some()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContextError {
    #[error("{path} does not parse: {diagnostic}")]
    Parse { path: String, diagnostic: SyntaxDiagnostic },
    #[error("{path} is missing from the {side} snapshot")]
    MissingFile { path: String, side: &'static str },
    #[error("{path} was added or deleted by the patch; a modified function needs both versions")]
    NotModified { path: String },
    #[error(transparent)]
    Locate(#[from] LocateError),
    #[error(transparent)]
    Import(#[from] UnresolvableRelativeImport),
}

/// Locates the modified function of `fd` and gathers everything needed to
/// execute both versions in isolation.
pub fn extract_context(
    pre: &Snapshot,
    post: &Snapshot,
    fd: &FileDiff,
    layout: &PackageMap,
) -> Result<(FunctionLocator, CodeContext), ContextError> {
    if matches!(fd.status, FileStatus::Added | FileStatus::Deleted) {
        return Err(ContextError::NotModified { path: fd.path.clone() });
    }
    let pre_file = pre.get(fd.pre_path()).ok_or_else(|| ContextError::MissingFile {
        path: fd.pre_path().to_string(),
        side: "pre",
    })?;
    let post_file = post.get(&fd.path).ok_or_else(|| ContextError::MissingFile {
        path: fd.path.clone(),
        side: "post",
    })?;
    let parse_err = |path: &str| {
        let path = path.to_string();
        move |diagnostic| ContextError::Parse { path, diagnostic }
    };
    pyast::parse(pre_file).map_err(parse_err(fd.pre_path()))?;
    pyast::parse(post_file).map_err(parse_err(&fd.path))?;

    let locator = locate_modified_function(pre_file, post_file, fd)?;
    let pre_function = function_text(pre_file, &locator.name).expect("locator names a unit of the pre file");
    let post_function = function_text(post_file, &locator.name).expect("locator names a unit of the post file");
    let internal_deps = extract_internal_deps(pre_file, &locator)
        .map_err(parse_err(fd.pre_path()))?
        .into_iter()
        .map(|(name, source)| InternalDep { name, source })
        .collect();
    let external_deps = resolve_external_deps(pre_file, fd.pre_path(), layout)?;
    let enclosing_class = extract_enclosing_class(pre_file, &locator).map_err(parse_err(fd.pre_path()))?;

    let ctx = CodeContext {
        qualname: locator.name.clone(),
        pre_function,
        post_function,
        internal_deps,
        external_deps,
        enclosing_class,
    };
    Ok((locator, ctx))
}

/// Dedented text of the function unit named `qualname`.
pub(crate) fn function_text(file: &str, qualname: &str) -> Option<String> {
    let tree = pyast::parse_lenient(file);
    pyast::function_units(&tree, file)
        .into_iter()
        .find(|d| d.qualname == qualname)
        .map(|d| {
            let mut text = pyast::dedent(d.text(file));
            text.push('\n');
            text
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingestion::parse_unified_diff;

    const PRE: &str = "\
from . import exceptions
import re

PATTERN = re.compile(r\"^\\w+$\")


def helper(v):
    return v.strip()


class Url:
    scheme = \"http\"

    @staticmethod
    def check(value):
        if not PATTERN.match(value):
            raise exceptions.ValidationError(value)
        return value
";

    #[test]
    fn full_extraction_for_a_method() {
        let post = PRE.replace("return value\n", "return value.lower()\n");
        let diff = similar::TextDiff::from_lines(PRE, &post)
            .unified_diff()
            .header("a/pkg/fields.py", "b/pkg/fields.py")
            .to_string();
        let fd = &parse_unified_diff(&diff).unwrap()[0];
        let pre = Snapshot::from_files([("pkg/__init__.py", ""), ("pkg/fields.py", PRE)]);
        let post_snap = Snapshot::from_files([("pkg/__init__.py", ""), ("pkg/fields.py", post.as_str())]);
        let layout = PackageMap::from_snapshot(&pre);
        let (loc, ctx) = extract_context(&pre, &post_snap, fd, &layout).unwrap();
        assert_eq!(loc.name, "Url.check");
        assert_eq!(loc.enclosing_class.as_deref(), Some("Url"));
        assert!(ctx.pre_function.starts_with("@staticmethod\ndef check(value):"));
        assert!(ctx.post_function.contains("value.lower()"));
        let names: Vec<_> = ctx.internal_deps.iter().map(|d| d.name.as_str()).collect();
        assert_eq!(names, ["PATTERN", "helper"]);
        assert_eq!(ctx.external_deps, ["from pkg import exceptions", "import re"]);
        assert!(ctx.enclosing_class.as_deref().unwrap().starts_with("class Url:"));
        assert!(pyast::parses(&ctx.pre_function));
        assert_eq!(ctx.class_path(), ["Url"]);
    }

    #[test]
    fn extraction_is_deterministic() {
        let post = PRE.replace("v.strip()", "v.strip().lower()");
        let diff = similar::TextDiff::from_lines(PRE, &post)
            .unified_diff()
            .header("a/pkg/fields.py", "b/pkg/fields.py")
            .to_string();
        let fd = &parse_unified_diff(&diff).unwrap()[0];
        let pre = Snapshot::from_files([("pkg/__init__.py", ""), ("pkg/fields.py", PRE)]);
        let post_snap = Snapshot::from_files([("pkg/__init__.py", ""), ("pkg/fields.py", post.as_str())]);
        let layout = PackageMap::from_snapshot(&pre);
        let a = extract_context(&pre, &post_snap, fd, &layout).unwrap();
        let b = extract_context(&pre, &post_snap, fd, &layout).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.1.enclosing_class, None);
        assert_eq!(serde_json::to_string(&a.1).unwrap(), serde_json::to_string(&b.1).unwrap());
    }
}
