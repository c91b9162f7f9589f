//! TREC-format runs, qrels and topic lists.
//!
//! Runs are 6-column lines (`topic iter doc rank score tag`), qrels are
//! 4-column lines (`topic iter doc grade`), topic lists hold one id per line.
//! Both `\n` and `\r\n` line endings are accepted.

mod qrels;
mod run;
mod topics;

use std::path::Path;

pub use qrels::{parse_qrels, Grade, Qrels, TopicJudgments};
pub use run::{parse_run, RankingsBuilder, Run, RunRecord, ScoredDoc, MAX_DEPTH};
pub use topics::{core_topics, parse_topic_list, TopicSet};

use crate::{Diagnostics, Error, Result};

/// Iterates `(1-based line number, line)` over non-blank lines, with any
/// trailing `\r` removed.
pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split('\n').enumerate().filter_map(|(i, line)| {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            None
        } else {
            Some((i + 1, line))
        }
    })
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn read_run(
    path: impl AsRef<Path>,
    expected_tag: Option<&str>,
    diag: &mut Diagnostics,
) -> Result<Run> {
    parse_run(&read_to_string(path.as_ref())?, expected_tag, diag)
}

pub fn read_qrels(path: impl AsRef<Path>, diag: &mut Diagnostics) -> Result<Qrels> {
    parse_qrels(&read_to_string(path.as_ref())?, diag)
}

pub fn read_topic_list(path: impl AsRef<Path>) -> Result<TopicSet> {
    parse_topic_list(&read_to_string(path.as_ref())?)
}
