use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use super::{content_lines, TopicSet};
use crate::{Diagnostics, Error, Result, Warning};

/// Three-level relevance grade: 0 not relevant, 1 relevant, 2 highly relevant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Grade(u8);

impl Grade {
    pub const NOT_RELEVANT: Grade = Grade(0);
    pub const RELEVANT: Grade = Grade(1);
    pub const HIGHLY_RELEVANT: Grade = Grade(2);

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn is_relevant(self) -> bool {
        self.0 >= 1
    }
}

impl TryFrom<u8> for Grade {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        if v <= 2 {
            Ok(Grade(v))
        } else {
            Err(Error::data(format!("grade {v} outside {{0, 1, 2}}")))
        }
    }
}

impl From<Grade> for u8 {
    fn from(g: Grade) -> u8 {
        g.0
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Judgments for one topic, keyed by doc id.
pub type TopicJudgments = BTreeMap<String, Grade>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, TopicJudgments>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a judgment. Re-adding the same grade is a no-op that returns
    /// `Ok(false)`; a different grade is a data error.
    pub fn insert(
        &mut self,
        topic: impl Into<String>,
        doc: impl Into<String>,
        grade: Grade,
    ) -> Result<bool> {
        let topic = topic.into();
        let doc = doc.into();
        let docs = self.judgments.entry(topic.clone()).or_default();
        match docs.entry(doc) {
            Entry::Vacant(e) => {
                e.insert(grade);
                Ok(true)
            }
            Entry::Occupied(e) if *e.get() == grade => Ok(false),
            Entry::Occupied(e) => Err(Error::data(format!(
                "conflicting grades {} and {grade} for ({topic}, {})",
                e.get(),
                e.key()
            ))),
        }
    }

    pub fn topic(&self, topic: &str) -> Option<&TopicJudgments> {
        self.judgments.get(topic)
    }

    pub fn grade(&self, topic: &str, doc: &str) -> Option<Grade> {
        self.judgments.get(topic)?.get(doc).copied()
    }

    pub fn topics(&self) -> TopicSet {
        self.judgments.keys().cloned().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, Grade)> {
        self.judgments
            .iter()
            .flat_map(|(t, docs)| docs.iter().map(move |(d, g)| (t.as_str(), d.as_str(), *g)))
    }

    /// Total number of judgments.
    pub fn len(&self) -> usize {
        self.judgments.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }

    pub fn restrict(&self, topics: &TopicSet) -> Qrels {
        Qrels {
            judgments: self
                .judgments
                .iter()
                .filter(|(t, _)| topics.contains(t))
                .map(|(t, d)| (t.clone(), d.clone()))
                .collect(),
        }
    }

    pub fn to_trec(&self) -> String {
        let mut out = String::new();
        for (topic, doc, grade) in self.iter() {
            let _ = writeln!(out, "{topic} 0 {doc} {grade}");
        }
        out
    }
}

/// Parses a 4-column qrels file. Grades must be exactly 0, 1 or 2.
pub fn parse_qrels(text: &str, diag: &mut Diagnostics) -> Result<Qrels> {
    let mut qrels = Qrels::new();
    for (line_no, line) in content_lines(text) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [topic, _iteration, doc, grade] = fields[..] else {
            return Err(Error::parse(
                line_no,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        };
        let grade = grade
            .parse::<u8>()
            .ok()
            .and_then(|g| Grade::try_from(g).ok())
            .ok_or_else(|| {
                Error::data(format!(
                    "line {line_no}: grade {grade:?} is not one of 0, 1, 2"
                ))
            })?;
        let inserted = qrels.insert(topic, doc, grade).map_err(|e| match e {
            Error::Data(msg) => Error::data(format!("line {line_no}: {msg}")),
            other => other,
        })?;
        if !inserted {
            diag.warn(Warning::DuplicateJudgment {
                line: line_no,
                topic: topic.to_string(),
                doc: doc.to_string(),
            });
        }
    }
    Ok(qrels)
}
