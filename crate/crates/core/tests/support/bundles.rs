//! Golden bundles and their replayed run directories.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use patchsentry_core::bundle::GoldenBundle;
use patchsentry_core::llm::{Mode, PromptTemplates};
use patchsentry_core::orchestrator::{write_run_dir, RunMetadata, METADATA_FILE};

use super::bundles_root;

pub fn bundle_dirs() -> Vec<PathBuf> {
    let mut dirs: Vec<_> = std::fs::read_dir(bundles_root())
        .unwrap()
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.join("bundle.toml").is_file())
        .collect();
    dirs.sort();
    assert!(dirs.len() >= 4, "golden bundles missing");
    dirs
}

pub fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    walkdir::WalkDir::new(dir)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e.path().strip_prefix(dir).unwrap().to_string_lossy().into_owned();
            (rel, std::fs::read(e.path()).unwrap())
        })
        .collect()
}

/// Replays `bundle` and writes its run directory under `out`; returns the
/// tree without the metadata file.
pub fn replayed_tree(bundle: &GoldenBundle, out: &Path, note: &str) -> BTreeMap<String, Vec<u8>> {
    let templates = PromptTemplates::embedded();
    let replay = bundle.replay(&templates, bundle.manifest.budgets).unwrap();
    let mut meta = RunMetadata::now(templates.version(), None, &replay.sandbox_id, Mode::Replay);
    meta.notes.push(note.to_string());
    write_run_dir(out, &replay.record, &replay.transcript, &meta).unwrap();
    let mut files = tree(out);
    assert!(files.remove(METADATA_FILE).is_some());
    files
}
