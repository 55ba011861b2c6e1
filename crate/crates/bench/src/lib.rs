//! Inputs shared by the benchmarks.

use std::path::{Path, PathBuf};

use patchsentry_core::bundle::GoldenBundle;

pub fn bundles_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../bundles")
}

/// Every bundle in the repository, keyed by directory name.
pub fn load_bundles() -> Vec<(String, GoldenBundle)> {
    let mut out: Vec<(String, GoldenBundle)> = std::fs::read_dir(bundles_root())
        .expect("bundles directory")
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.join(patchsentry_core::bundle::MANIFEST_FILE).is_file())
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            let b = GoldenBundle::load(&p).unwrap_or_else(|e| panic!("{name}: {e}"));
            (name, b)
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// The function source used for mutant generation benchmarks.
pub fn corpus_function() -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/adequacy/corpus_function.py");
    std::fs::read_to_string(p).expect("corpus function fixture")
}
