//! Issue-reference extraction from pull-request text.
//!
//! Recognized forms: `#N`, `GH-N`, and closing keywords such as
//! `Fixes #N` / `closes gh-N` (case-insensitive). Cross-repository
//! references like `owner/repo#N` are ignored.

use std::sync::LazyLock;

use regex::Regex;

static ISSUE_REF: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)(?:^|[^\w/&#-])(?:#|gh-)(\d+)\b").expect("static regex")
});

/// Issue numbers in order of first appearance, without duplicates.
pub fn issue_references<'a>(texts: impl IntoIterator<Item = &'a str>) -> Vec<u64> {
    let mut seen = Vec::new();
    for text in texts {
        for cap in ISSUE_REF.captures_iter(text) {
            if let Ok(n) = cap[1].parse::<u64>() {
                if n > 0 && !seen.contains(&n) {
                    seen.push(n);
                }
            }
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closing_keywords_and_bare_refs() {
        let refs = issue_references([
            "Fix: add file handling to URL fields",
            "Requires a modicum of special handling.\nFixes #2249.",
            "See also GH-12 and closes #7; resolves #2249 again",
        ]);
        assert_eq!(refs, vec![2249, 12, 7]);
    }

    #[test]
    fn cross_repo_and_noise_are_ignored() {
        let refs = issue_references([
            "upstream/other#55 and https://x.test/issues/3#issuecomment-9",
            "&#123; entity, color #fff, heading\n# Title",
            "#0 is not an issue",
        ]);
        assert!(refs.is_empty(), "{refs:?}");
    }

    #[test]
    fn no_text_no_refs() {
        assert!(issue_references(["", "plain description"]).is_empty());
    }

    #[test]
    fn reference_at_line_start() {
        assert_eq!(issue_references(["#42 is the bug"]), vec![42]);
    }
}
