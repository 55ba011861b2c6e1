//! Source snapshots of a repository at one revision.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use thiserror::Error;

use super::RepoId;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("`git {args}` failed: {stderr}")]
    Git { args: String, stderr: String },
    #[error("commit id {0:?} is not a hex object name")]
    BadCommit(String),
}

/// Immutable view of the text files of a source tree, keyed by
/// repo-relative path with `/` separators.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Snapshot {
    root: Option<PathBuf>,
    files: BTreeMap<String, String>,
}

impl Snapshot {
    pub fn from_files<I, P, S>(files: I) -> Self
    where
        I: IntoIterator<Item = (P, S)>,
        P: Into<String>,
        S: Into<String>,
    {
        Self {
            root: None,
            files: files.into_iter().map(|(p, s)| (p.into(), s.into())).collect(),
        }
    }

    /// Loads every UTF-8 file under `root`, skipping `.git` and other
    /// hidden directories. Non-UTF-8 files are left out.
    pub fn from_dir(root: &Path) -> Result<Self, SnapshotError> {
        let mut files = BTreeMap::new();
        let walker = walkdir::WalkDir::new(root)
            .sort_by_file_name()
            .into_iter()
            .filter_entry(|e| e.depth() == 0 || !e.file_name().to_string_lossy().starts_with('.'));
        for entry in walker {
            let entry = entry.map_err(|e| SnapshotError::Io {
                path: root.to_path_buf(),
                source: e.into(),
            })?;
            if !entry.file_type().is_file() {
                continue;
            }
            let rel = entry
                .path()
                .strip_prefix(root)
                .expect("walkdir yields children of root");
            let key = rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            let bytes = fs::read(entry.path()).map_err(|source| SnapshotError::Io {
                path: entry.path().to_path_buf(),
                source,
            })?;
            if let Ok(text) = String::from_utf8(bytes) {
                files.insert(key, text);
            }
        }
        Ok(Self {
            root: Some(root.to_path_buf()),
            files,
        })
    }

    /// Directory the snapshot was loaded from, when it came from disk.
    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    pub fn get(&self, path: &str) -> Option<&str> {
        self.files.get(path).map(String::as_str)
    }

    pub fn contains(&self, path: &str) -> bool {
        self.files.contains_key(path)
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }
}

/// On-disk cache of shallow checkouts laid out as
/// `<root>/<owner>/<name>/<commit>/`.
#[derive(Debug, Clone)]
pub struct SnapshotCache {
    root: PathBuf,
}

impl SnapshotCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn path_for(&self, repo: &RepoId, commit: &str) -> PathBuf {
        self.root.join(repo.owner()).join(repo.name()).join(commit)
    }

    /// Returns the checkout of `commit`, fetching it from `remote` with a
    /// depth-1 fetch when it is not cached yet.
    pub fn ensure(&self, repo: &RepoId, commit: &str, remote: &str) -> Result<PathBuf, SnapshotError> {
        if commit.len() < 7 || !commit.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(SnapshotError::BadCommit(commit.to_string()));
        }
        let dest = self.path_for(repo, commit);
        if dest.join(".git").is_dir() {
            return Ok(dest);
        }
        let parent = dest.parent().expect("cache paths have parents");
        fs::create_dir_all(parent).map_err(|source| SnapshotError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
        // build in a sibling directory so a failed fetch never leaves a
        // half-populated cache entry
        let staging = tempfile::Builder::new()
            .prefix(".staging-")
            .tempdir_in(parent)
            .map_err(|source| SnapshotError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        let work = staging.path();
        git(work, &["init", "--quiet"])?;
        git(work, &["remote", "add", "origin", remote])?;
        git(work, &["fetch", "--quiet", "--depth", "1", "origin", commit])?;
        git(work, &["checkout", "--quiet", "FETCH_HEAD"])?;
        let staged = staging.keep();
        fs::rename(&staged, &dest).map_err(|source| SnapshotError::Io {
            path: dest.clone(),
            source,
        })?;
        Ok(dest)
    }

    pub fn load(&self, repo: &RepoId, commit: &str, remote: &str) -> Result<Snapshot, SnapshotError> {
        let dir = self.ensure(repo, commit, remote)?;
        Snapshot::from_dir(&dir)
    }
}

fn git(dir: &Path, args: &[&str]) -> Result<(), SnapshotError> {
    let out = Command::new("git")
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|source| SnapshotError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    if out.status.success() {
        Ok(())
    } else {
        Err(SnapshotError::Git {
            args: args.join(" "),
            stderr: String::from_utf8_lossy(&out.stderr).trim().to_string(),
        })
    }
}
