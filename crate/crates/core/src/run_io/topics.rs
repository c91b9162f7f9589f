use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::content_lines;
use crate::{Diagnostics, Error, Result, Warning};

/// A set of topic ids, iterated in id order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TopicSet(BTreeSet<String>);

impl TopicSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, topic: impl Into<String>) -> bool {
        self.0.insert(topic.into())
    }

    pub fn contains(&self, topic: &str) -> bool {
        self.0.contains(topic)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn intersection(&self, other: &TopicSet) -> TopicSet {
        TopicSet(self.0.intersection(&other.0).cloned().collect())
    }

    pub fn union(&self, other: &TopicSet) -> TopicSet {
        TopicSet(self.0.union(&other.0).cloned().collect())
    }

    /// Elements in exactly one of the two sets.
    pub fn symmetric_difference(&self, other: &TopicSet) -> TopicSet {
        TopicSet(self.0.symmetric_difference(&other.0).cloned().collect())
    }
}

impl<S: Into<String>> FromIterator<S> for TopicSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TopicSet(iter.into_iter().map(Into::into).collect())
    }
}

impl<'a> IntoIterator for &'a TopicSet {
    type Item = &'a String;
    type IntoIter = std::collections::btree_set::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// One topic id per line; blank lines and `#` comments are skipped.
pub fn parse_topic_list(text: &str) -> Result<TopicSet> {
    let mut set = TopicSet::new();
    for (line_no, line) in content_lines(text) {
        let line = line.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.split_whitespace().nth(1).is_some() {
            return Err(Error::parse(
                line_no,
                "topic id must not contain whitespace",
            ));
        }
        set.insert(line);
    }
    Ok(set)
}

/// Topics present in every set. An empty result is legal but raises
/// [`Warning::EmptyCoreTopics`].
pub fn core_topics(sets: &[TopicSet], diag: &mut Diagnostics) -> Result<TopicSet> {
    let (first, rest) = sets
        .split_first()
        .ok_or_else(|| Error::data("core topics need at least one topic set"))?;
    let core = rest
        .iter()
        .fold(first.clone(), |acc, s| acc.intersection(s));
    if core.is_empty() {
        diag.warn(Warning::EmptyCoreTopics);
    }
    Ok(core)
}
