use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ingestion::Snapshot;

/// Maps source directories to importable package names.
///
/// Built from `__init__.py` markers; explicit overrides take precedence and
/// cover namespace packages or unusual source roots.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackageMap {
    package_dirs: BTreeSet<String>,
    #[serde(default)]
    overrides: BTreeMap<String, String>,
}

impl PackageMap {
    pub fn from_snapshot(snapshot: &Snapshot) -> Self {
        let package_dirs = snapshot
            .paths()
            .filter_map(|p| {
                if p == "__init__.py" {
                    Some(String::new())
                } else {
                    p.strip_suffix("/__init__.py").map(str::to_string)
                }
            })
            .collect();
        Self {
            package_dirs,
            overrides: BTreeMap::new(),
        }
    }

    /// Declares that `dir` (repo-relative, `/`-separated) imports as
    /// `dotted`, e.g. `src/marshmallow` → `marshmallow`.
    pub fn with_override(mut self, dir: impl Into<String>, dotted: impl Into<String>) -> Self {
        let dir: String = dir.into();
        self.overrides
            .insert(dir.trim_end_matches('/').to_string(), dotted.into());
        self
    }

    /// Package components containing the module at `file_path`.
    pub fn package_of(&self, file_path: &str) -> Vec<String> {
        let dir = match file_path.rsplit_once('/') {
            Some((d, _)) => d,
            None => "",
        };
        // longest override that is a prefix of dir
        let best = self
            .overrides
            .iter()
            .filter(|(k, _)| dir == k.as_str() || dir.starts_with(&format!("{k}/")) || k.is_empty())
            .max_by_key(|(k, _)| k.len());
        if let Some((prefix, dotted)) = best {
            let mut parts: Vec<String> = dotted.split('.').filter(|s| !s.is_empty()).map(str::to_string).collect();
            let rest = dir[prefix.len()..].trim_start_matches('/');
            parts.extend(rest.split('/').filter(|s| !s.is_empty()).map(str::to_string));
            return parts;
        }
        let mut parts = Vec::new();
        let mut cur = dir;
        while !cur.is_empty() && self.package_dirs.contains(cur) {
            let (parent, name) = match cur.rsplit_once('/') {
                Some((p, n)) => (p, n),
                None => ("", cur),
            };
            parts.push(name.to_string());
            cur = parent;
        }
        parts.reverse();
        parts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markers_define_packages() {
        let snap = Snapshot::from_files([
            ("src/marshmallow/__init__.py", ""),
            ("src/marshmallow/fields.py", ""),
            ("src/marshmallow/sub/__init__.py", ""),
            ("src/marshmallow/sub/x.py", ""),
            ("scripts/tool.py", ""),
        ]);
        let map = PackageMap::from_snapshot(&snap);
        assert_eq!(map.package_of("src/marshmallow/fields.py"), ["marshmallow"]);
        assert_eq!(map.package_of("src/marshmallow/sub/x.py"), ["marshmallow", "sub"]);
        assert!(map.package_of("scripts/tool.py").is_empty());
    }

    #[test]
    fn overrides_win() {
        let map = PackageMap::default().with_override("lib/ns", "company.ns");
        assert_eq!(map.package_of("lib/ns/deep/m.py"), ["company", "ns", "deep"]);
        assert!(map.package_of("other/m.py").is_empty());
    }
}
