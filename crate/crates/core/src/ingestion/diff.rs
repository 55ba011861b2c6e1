//! Unified diff parsing and hunk replay.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pyast::LineSpan;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("malformed diff at byte {offset}: {reason}")]
pub struct MalformedDiff {
    pub offset: usize,
    pub reason: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ApplyError {
    #[error("hunk {hunk} expects pre-file line {line} to be {expected:?}, found {found:?}")]
    ContextMismatch {
        hunk: usize,
        line: usize,
        expected: String,
        found: Option<String>,
    },
    #[error("hunk {hunk} starts at line {line}, before the end of the previous hunk")]
    Overlap { hunk: usize, line: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineKind {
    Context,
    Removed,
    Added,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HunkLine {
    pub kind: LineKind,
    /// Line content without its terminating `\n`.
    pub text: String,
    /// Set when the diff marks this line with `\ No newline at end of file`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub no_newline: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub old_start: usize,
    pub old_len: usize,
    pub new_start: usize,
    pub new_len: usize,
    /// Text after the closing `@@`, usually the enclosing function header.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub section: String,
    pub lines: Vec<HunkLine>,
}

impl Hunk {
    /// Pre-file lines covered by the hunk header, if any.
    pub fn old_span(&self) -> Option<LineSpan> {
        (self.old_len > 0).then(|| LineSpan::new(self.old_start, self.old_start + self.old_len - 1))
    }

    pub fn new_span(&self) -> Option<LineSpan> {
        (self.new_len > 0).then(|| LineSpan::new(self.new_start, self.new_start + self.new_len - 1))
    }

    /// Pre-file line numbers of removed lines.
    pub fn removed_lines(&self) -> Vec<usize> {
        self.numbered(LineKind::Removed)
    }

    /// Post-file line numbers of added lines.
    pub fn added_lines(&self) -> Vec<usize> {
        self.numbered(LineKind::Added)
    }

    fn numbered(&self, want: LineKind) -> Vec<usize> {
        let mut old = self.old_start;
        let mut new = self.new_start;
        let mut out = Vec::new();
        for line in &self.lines {
            match line.kind {
                LineKind::Context => {
                    old += 1;
                    new += 1;
                }
                LineKind::Removed => {
                    if want == LineKind::Removed {
                        out.push(old);
                    }
                    old += 1;
                }
                LineKind::Added => {
                    if want == LineKind::Added {
                        out.push(new);
                    }
                    new += 1;
                }
            }
        }
        out
    }

    /// For a hunk that only inserts (resp. only deletes), the pre-file
    /// (resp. post-file) line adjacent to the change. Used to anchor pure
    /// insertions inside the enclosing definition.
    pub fn anchor_lines(&self) -> (Option<usize>, Option<usize>) {
        let mut old = self.old_start;
        let mut new = self.new_start;
        let mut old_anchor = None;
        let mut new_anchor = None;
        let mut prev_old = None;
        let mut prev_new = None;
        for line in &self.lines {
            match line.kind {
                LineKind::Context => {
                    prev_old = Some(old);
                    prev_new = Some(new);
                    old += 1;
                    new += 1;
                }
                LineKind::Removed => {
                    if new_anchor.is_none() {
                        new_anchor = prev_new.or(Some(new));
                    }
                    old += 1;
                }
                LineKind::Added => {
                    if old_anchor.is_none() {
                        old_anchor = prev_old.or(Some(old));
                    }
                    new += 1;
                }
            }
        }
        (old_anchor, new_anchor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileStatus {
    Modified,
    Added,
    Deleted,
    Renamed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDiff {
    /// Repo-relative path in the post-patch tree (pre-patch path for deletions).
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub old_path: Option<String>,
    pub status: FileStatus,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub binary: bool,
    pub hunks: Vec<Hunk>,
    /// Union of the hunk spans in the pre-file.
    pub deleted_range: Option<LineSpan>,
    /// Union of the hunk spans in the post-file.
    pub added_range: Option<LineSpan>,
}

impl FileDiff {
    fn new(path: String, old_path: Option<String>, status: FileStatus) -> Self {
        Self {
            path,
            old_path,
            status,
            binary: false,
            hunks: Vec::new(),
            deleted_range: None,
            added_range: None,
        }
    }

    fn finish(&mut self) {
        self.deleted_range = span_union(self.hunks.iter().filter_map(Hunk::old_span));
        self.added_range = span_union(self.hunks.iter().filter_map(Hunk::new_span));
    }

    pub fn removed_lines(&self) -> Vec<usize> {
        self.hunks.iter().flat_map(Hunk::removed_lines).collect()
    }

    pub fn added_lines(&self) -> Vec<usize> {
        self.hunks.iter().flat_map(Hunk::added_lines).collect()
    }

    /// Path the pre-file had.
    pub fn pre_path(&self) -> &str {
        self.old_path.as_deref().unwrap_or(&self.path)
    }

    /// Renders this file back to unified diff text.
    pub fn to_unified(&self) -> String {
        let mut out = String::new();
        let old = self.pre_path();
        let _ = writeln!(out, "diff --git a/{old} b/{}", self.path);
        let (from, to) = match self.status {
            FileStatus::Added => ("/dev/null".to_string(), format!("b/{}", self.path)),
            FileStatus::Deleted => (format!("a/{old}"), "/dev/null".to_string()),
            _ => (format!("a/{old}"), format!("b/{}", self.path)),
        };
        let _ = writeln!(out, "--- {from}");
        let _ = writeln!(out, "+++ {to}");
        for h in &self.hunks {
            let _ = write!(
                out,
                "@@ -{},{} +{},{} @@",
                h.old_start, h.old_len, h.new_start, h.new_len
            );
            if !h.section.is_empty() {
                let _ = write!(out, " {}", h.section);
            }
            out.push('\n');
            for l in &h.lines {
                let marker = match l.kind {
                    LineKind::Context => ' ',
                    LineKind::Removed => '-',
                    LineKind::Added => '+',
                };
                out.push(marker);
                out.push_str(&l.text);
                out.push('\n');
                if l.no_newline {
                    out.push_str("\\ No newline at end of file\n");
                }
            }
        }
        out
    }
}

fn span_union(spans: impl Iterator<Item = LineSpan>) -> Option<LineSpan> {
    spans.reduce(|a, b| a.union(&b))
}

/// Renders a whole patch.
pub fn render_unified(files: &[FileDiff]) -> String {
    files.iter().map(FileDiff::to_unified).collect()
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    /// Next line without its `\n`, plus the byte offset it starts at.
    fn next_line(&mut self) -> Option<(usize, &'a str)> {
        if self.pos >= self.text.len() {
            return None;
        }
        let start = self.pos;
        let rest = &self.text[start..];
        let (line, advance) = match rest.find('\n') {
            Some(i) => (&rest[..i], i + 1),
            None => (rest, rest.len()),
        };
        self.pos += advance;
        Some((start, line))
    }

    fn peek_line(&self) -> Option<&'a str> {
        let rest = self.text.get(self.pos..)?;
        if rest.is_empty() {
            return None;
        }
        Some(rest.split('\n').next().unwrap_or(rest))
    }
}

fn malformed(offset: usize, reason: impl Into<String>) -> MalformedDiff {
    MalformedDiff {
        offset,
        reason: reason.into(),
    }
}

fn strip_prefix_path(raw: &str) -> Option<String> {
    let raw = raw.split('\t').next().unwrap_or(raw).trim_end();
    if raw == "/dev/null" {
        return None;
    }
    let unquoted = raw.trim_matches('"');
    let path = unquoted
        .strip_prefix("a/")
        .or_else(|| unquoted.strip_prefix("b/"))
        .unwrap_or(unquoted);
    Some(path.to_string())
}

fn parse_range(s: &str) -> Option<(usize, usize)> {
    match s.split_once(',') {
        Some((a, b)) => Some((a.parse().ok()?, b.parse().ok()?)),
        None => Some((s.parse().ok()?, 1)),
    }
}

fn parse_hunk_header(line: &str) -> Option<(usize, usize, usize, usize, String)> {
    let rest = line.strip_prefix("@@ -")?;
    let (old, rest) = rest.split_once(" +")?;
    let (new, rest) = rest.split_once(" @@")?;
    let (os, ol) = parse_range(old)?;
    let (ns, nl) = parse_range(new)?;
    Some((os, ol, ns, nl, rest.trim_start().to_string()))
}

/// Parses `git diff`/`diff -u` output into one [`FileDiff`] per file.
pub fn parse_unified_diff(text: &str) -> Result<Vec<FileDiff>, MalformedDiff> {
    let mut cur = Cursor { text, pos: 0 };
    let mut files: Vec<FileDiff> = Vec::new();
    let mut current: Option<FileDiff> = None;
    // `diff --git` seen but `---`/`+++` not yet
    let mut git_paths: Option<(String, String)> = None;
    let mut pending_status: Option<FileStatus> = None;

    let flush = |files: &mut Vec<FileDiff>, fd: Option<FileDiff>| {
        if let Some(mut fd) = fd {
            fd.finish();
            files.push(fd);
        }
    };

    while let Some((offset, line)) = cur.next_line() {
        if let Some(rest) = line.strip_prefix("diff --git ") {
            flush(&mut files, current.take());
            if let Some((a, b)) = git_paths.take() {
                // previous entry had no content headers (mode change, empty file)
                let status = pending_status.unwrap_or(FileStatus::Modified);
                let old_path = (a != b).then_some(a);
                flush(&mut files, Some(FileDiff::new(b, old_path, status)));
            }
            let (a, b) = split_git_paths(rest).ok_or_else(|| malformed(offset, "unreadable `diff --git` paths"))?;
            git_paths = Some((a, b));
            pending_status = None;
            continue;
        }
        if line.starts_with("new file mode") {
            pending_status = Some(FileStatus::Added);
            continue;
        }
        if line.starts_with("deleted file mode") {
            pending_status = Some(FileStatus::Deleted);
            continue;
        }
        if line.starts_with("rename from ") || line.starts_with("rename to ") {
            pending_status = Some(FileStatus::Renamed);
            continue;
        }
        if line.starts_with("Binary files ") || line == "GIT binary patch" {
            let (a, b) = git_paths
                .take()
                .ok_or_else(|| malformed(offset, "binary marker outside a file header"))?;
            let mut fd = FileDiff::new(b.clone(), (a != b).then_some(a), pending_status.take().unwrap_or(FileStatus::Modified));
            fd.binary = true;
            flush(&mut files, current.take());
            current = Some(fd);
            // skip the binary payload
            while let Some(next) = cur.peek_line() {
                if next.starts_with("diff --git ") {
                    break;
                }
                cur.next_line();
            }
            continue;
        }
        if let Some(from) = line.strip_prefix("--- ") {
            let Some((plus_off, plus)) = cur.next_line() else {
                return Err(malformed(cur.pos, "`---` header without `+++`"));
            };
            let Some(to) = plus.strip_prefix("+++ ") else {
                return Err(malformed(plus_off, "expected `+++` after `---`"));
            };
            flush(&mut files, current.take());
            let old = strip_prefix_path(from);
            let new = strip_prefix_path(to);
            let (status, path, old_path) = match (old, new) {
                (None, Some(n)) => (FileStatus::Added, n, None),
                (Some(o), None) => (FileStatus::Deleted, o, None),
                (Some(o), Some(n)) if o != n => (FileStatus::Renamed, n, Some(o)),
                (Some(_), Some(n)) => (pending_status.unwrap_or(FileStatus::Modified), n, None),
                (None, None) => return Err(malformed(offset, "both sides are /dev/null")),
            };
            current = Some(FileDiff::new(path, old_path, status));
            git_paths = None;
            pending_status = None;
            continue;
        }
        if line.starts_with("@@") {
            let Some(fd) = current.as_mut() else {
                return Err(malformed(offset, "hunk before any file header"));
            };
            let (os, ol, ns, nl, section) =
                parse_hunk_header(line).ok_or_else(|| malformed(offset, format!("bad hunk header {line:?}")))?;
            let mut hunk = Hunk {
                old_start: os,
                old_len: ol,
                new_start: ns,
                new_len: nl,
                section,
                lines: Vec::new(),
            };
            let (mut old_left, mut new_left) = (ol, nl);
            while old_left > 0 || new_left > 0 {
                let Some((loff, body)) = cur.next_line() else {
                    return Err(malformed(text.len(), "diff ends inside a hunk"));
                };
                let (kind, content) = match body.as_bytes().first() {
                    Some(b' ') => (LineKind::Context, &body[1..]),
                    Some(b'-') => (LineKind::Removed, &body[1..]),
                    Some(b'+') => (LineKind::Added, &body[1..]),
                    // some tools strip the single space from empty context lines
                    None => (LineKind::Context, ""),
                    Some(b'\\') => {
                        mark_no_newline(&mut hunk, loff)?;
                        continue;
                    }
                    _ => return Err(malformed(loff, "hunk shorter than its header declares")),
                };
                match kind {
                    LineKind::Context if old_left > 0 && new_left > 0 => {
                        old_left -= 1;
                        new_left -= 1;
                    }
                    LineKind::Removed if old_left > 0 => old_left -= 1,
                    LineKind::Added if new_left > 0 => new_left -= 1,
                    _ => return Err(malformed(loff, "hunk line exceeds the counts in its header")),
                }
                hunk.lines.push(HunkLine {
                    kind,
                    text: content.to_string(),
                    no_newline: false,
                });
            }
            if let Some(next) = cur.peek_line() {
                if next.starts_with('\\') {
                    let (loff, _) = cur.next_line().expect("peeked");
                    mark_no_newline(&mut hunk, loff)?;
                }
            }
            fd.hunks.push(hunk);
            continue;
        }
        if git_paths.is_none() && current.is_none() && files.is_empty() {
            // preamble before the first file, e.g. a commit message
            continue;
        }
        if (line.starts_with('+') || line.starts_with('-') || line.starts_with(' '))
            && current.as_ref().is_some_and(|f| !f.hunks.is_empty())
        {
            return Err(malformed(offset, "hunk longer than its header declares"));
        }
        // other extended headers (`index`, modes, similarity) carry nothing we need
    }

    flush(&mut files, current.take());
    if let Some((a, b)) = git_paths.take() {
        let status = pending_status.unwrap_or(FileStatus::Modified);
        let old_path = (a != b).then_some(a);
        flush(&mut files, Some(FileDiff::new(b, old_path, status)));
    }
    Ok(files)
}

fn mark_no_newline(hunk: &mut Hunk, offset: usize) -> Result<(), MalformedDiff> {
    match hunk.lines.last_mut() {
        Some(last) => {
            last.no_newline = true;
            Ok(())
        }
        None => Err(malformed(offset, "`\\ No newline` marker before any hunk line")),
    }
}

fn split_git_paths(rest: &str) -> Option<(String, String)> {
    // `a/<path> b/<path>`; paths with spaces are ambiguous, so split on " b/"
    let rest = rest.trim_end();
    let idx = rest.find(" b/")?;
    let a = rest[..idx].strip_prefix("a/")?;
    let b = &rest[idx + 3..];
    Some((a.to_string(), b.to_string()))
}

/// Replays the hunks of `fd` over `pre`, producing the post-file.
pub fn apply(pre: &str, fd: &FileDiff) -> Result<String, ApplyError> {
    let pre_lines: Vec<&str> = split_keep_newlines(pre);
    let mut out = String::with_capacity(pre.len());
    // index into pre_lines of the next line to copy
    let mut next = 0usize;
    for (hi, hunk) in fd.hunks.iter().enumerate() {
        // zero-length ranges name the line after which the change happens
        let first = if hunk.old_len == 0 { hunk.old_start } else { hunk.old_start.saturating_sub(1) };
        if first < next {
            return Err(ApplyError::Overlap {
                hunk: hi,
                line: hunk.old_start,
            });
        }
        for line in &pre_lines[next..first.min(pre_lines.len())] {
            out.push_str(line);
        }
        next = first;
        for hl in &hunk.lines {
            match hl.kind {
                LineKind::Context | LineKind::Removed => {
                    let found = pre_lines.get(next).copied();
                    let expected_nl = !hl.no_newline;
                    let ok = found.is_some_and(|f| {
                        let (body, has_nl) = match f.strip_suffix('\n') {
                            Some(b) => (b, true),
                            None => (f, false),
                        };
                        body == hl.text && has_nl == expected_nl
                    });
                    if !ok {
                        return Err(ApplyError::ContextMismatch {
                            hunk: hi,
                            line: next + 1,
                            expected: hl.text.clone(),
                            found: found.map(str::to_string),
                        });
                    }
                    if hl.kind == LineKind::Context {
                        out.push_str(found.expect("checked"));
                    }
                    next += 1;
                }
                LineKind::Added => {
                    out.push_str(&hl.text);
                    if !hl.no_newline {
                        out.push('\n');
                    }
                }
            }
        }
    }
    for line in pre_lines.iter().skip(next) {
        out.push_str(line);
    }
    Ok(out)
}

fn split_keep_newlines(s: &str) -> Vec<&str> {
    s.split_inclusive('\n').collect()
}
