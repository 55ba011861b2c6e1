//! Each fixture is a small package before and after a patch. The comparison
//! program built from the extracted context must make `pre_<f>` and
//! `post_<f>` behave exactly like `f` imported from the real pre and post
//! packages.

mod support;

use support::builder::{category_counts, run_corpus};

#[test]
fn built_programs_are_observationally_equivalent() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run_corpus(tmp.path());
    assert!(r.cases >= 20, "only {} fixtures", r.cases);
    assert!(r.thin.is_empty(), "fewer than 10 inputs: {:?}", r.thin);
    assert_eq!(r.parse_failures, 0);
    assert!(r.problems.is_empty(), "{}", r.problems.join("\n\n"));
}

#[test]
fn fixture_categories_are_covered() {
    for (prefix, n) in category_counts() {
        assert!(n >= 3, "{prefix}: {n}");
    }
}
