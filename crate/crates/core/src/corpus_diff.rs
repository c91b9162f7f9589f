//! Document evolution between two collection snapshots, keyed by URL.
//!
//! A document present in both snapshots counts as changed when its content
//! length differs. Edits that keep the length identical are not detected.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::run_io::content_lines;
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSnapshot {
    pub label: String,
    /// URL → content length in characters.
    pub docs: BTreeMap<String, u64>,
}

impl CorpusSnapshot {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            docs: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, url: impl Into<String>, length: u64) -> Result<()> {
        let url = url.into();
        if self.docs.contains_key(&url) {
            return Err(Error::data(format!(
                "duplicate url {url} in snapshot {}",
                self.label
            )));
        }
        self.docs.insert(url, length);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Parses a manifest of `url<TAB>length` lines.
    pub fn parse_manifest(label: impl Into<String>, text: &str) -> Result<Self> {
        let mut snap = CorpusSnapshot::new(label);
        for (line_no, line) in content_lines(text) {
            let Some((url, length)) = line.split_once('\t') else {
                return Err(Error::parse(line_no, "expected url<TAB>length"));
            };
            let url = url.trim();
            if url.is_empty() {
                return Err(Error::parse(line_no, "empty url"));
            }
            let length = length.trim().parse::<u64>().map_err(|_| {
                Error::parse(
                    line_no,
                    format!(
                        "length must be a non-negative integer, got {:?}",
                        length.trim()
                    ),
                )
            })?;
            snap.insert(url, length).map_err(|e| match e {
                Error::Data(msg) => Error::data(format!("line {line_no}: {msg}")),
                other => other,
            })?;
        }
        Ok(snap)
    }

    pub fn read_manifest(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_manifest(path.display().to_string(), &text)
    }

    /// Builds a snapshot from every file under `dir`. The key is the path
    /// relative to `dir` with `/` separators; the length counts characters.
    pub fn from_directory(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut snap = CorpusSnapshot::new(dir.display().to_string());
        for entry in WalkDir::new(dir).sort_by_file_name() {
            let entry = entry.map_err(|e| {
                let path = e.path().unwrap_or(dir).to_path_buf();
                Error::io(path, e.into())
            })?;
            if !entry.file_type().is_file() {
                continue;
            }
            let rel = entry.path().strip_prefix(dir).unwrap_or(entry.path());
            let key = rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            let text =
                std::fs::read_to_string(entry.path()).map_err(|e| Error::io(entry.path(), e))?;
            snap.insert(key, text.chars().count() as u64)?;
        }
        Ok(snap)
    }

    pub fn to_manifest(&self) -> String {
        self.docs
            .iter()
            .map(|(u, l)| format!("{u}\t{l}\n"))
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffSummary {
    pub added: usize,
    pub removed: usize,
    pub changed: usize,
    pub unchanged: usize,
    /// Per-class URLs in sorted order.
    pub urls: DiffUrls,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffUrls {
    pub added: Vec<String>,
    pub removed: Vec<String>,
    pub changed: Vec<String>,
    pub unchanged: Vec<String>,
}

impl DiffSummary {
    /// `class<TAB>count` lines; with `verbose`, followed by `class<TAB>url`
    /// lines for every document.
    pub fn to_text(&self, verbose: bool) -> String {
        let mut out = format!(
            "added\t{}\nremoved\t{}\nchanged\t{}\nunchanged\t{}\n",
            self.added, self.removed, self.changed, self.unchanged
        );
        if verbose {
            for (class, urls) in [
                ("added", &self.urls.added),
                ("removed", &self.urls.removed),
                ("changed", &self.urls.changed),
                ("unchanged", &self.urls.unchanged),
            ] {
                for url in urls {
                    out.push_str(&format!("{class}\t{url}\n"));
                }
            }
        }
        out
    }
}

/// Classifies every URL of `a ∪ b` as added (only in `b`), removed (only in
/// `a`), changed, or unchanged.
pub fn diff_collections(a: &CorpusSnapshot, b: &CorpusSnapshot) -> DiffSummary {
    let mut urls = DiffUrls::default();
    let mut old = a.docs.iter().peekable();
    let mut new = b.docs.iter().peekable();
    // merge walk over two sorted maps
    loop {
        match (old.peek(), new.peek()) {
            (Some((ua, la)), Some((ub, lb))) => match ua.cmp(ub) {
                std::cmp::Ordering::Less => {
                    urls.removed.push((*ua).clone());
                    old.next();
                }
                std::cmp::Ordering::Greater => {
                    urls.added.push((*ub).clone());
                    new.next();
                }
                std::cmp::Ordering::Equal => {
                    if la == lb {
                        urls.unchanged.push((*ua).clone());
                    } else {
                        urls.changed.push((*ua).clone());
                    }
                    old.next();
                    new.next();
                }
            },
            (Some((ua, _)), None) => {
                urls.removed.push((*ua).clone());
                old.next();
            }
            (None, Some((ub, _))) => {
                urls.added.push((*ub).clone());
                new.next();
            }
            (None, None) => break,
        }
    }
    DiffSummary {
        added: urls.added.len(),
        removed: urls.removed.len(),
        changed: urls.changed.len(),
        unchanged: urls.unchanged.len(),
        urls,
    }
}
