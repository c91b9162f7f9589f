use std::cmp::Ordering;
use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{content_lines, TopicSet};
use crate::{Diagnostics, Error, Result, Warning};

/// Maximum number of documents evaluated per topic (trec_eval default).
pub const MAX_DEPTH: usize = 1000;

/// One line of a run file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub topic_id: String,
    pub iteration: String,
    pub doc_id: String,
    pub rank: u64,
    pub score: f64,
    pub run_tag: String,
}

impl RunRecord {
    fn parse(line_no: usize, line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [topic, iteration, doc, rank, score, tag] = fields[..] else {
            return Err(Error::parse(
                line_no,
                format!("expected 6 fields, found {}", fields.len()),
            ));
        };
        let rank = match rank.parse::<u64>() {
            Ok(r) if r >= 1 => r,
            _ => {
                return Err(Error::parse(
                    line_no,
                    format!("rank must be a positive integer, got {rank:?}"),
                ))
            }
        };
        let score = match score.parse::<f64>() {
            Ok(s) if s.is_finite() => s,
            _ => {
                return Err(Error::parse(
                    line_no,
                    format!("score must be a finite number, got {score:?}"),
                ))
            }
        };
        Ok(RunRecord {
            topic_id: topic.to_string(),
            iteration: iteration.to_string(),
            doc_id: doc.to_string(),
            rank,
            score,
            run_tag: tag.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

impl ScoredDoc {
    pub fn new(doc_id: impl Into<String>, score: f64) -> Self {
        Self {
            doc_id: doc_id.into(),
            score,
        }
    }
}

/// Score descending, then doc id descending.
fn canonical_order(a: &ScoredDoc, b: &ScoredDoc) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| b.doc_id.cmp(&a.doc_id))
}

/// A system's ranked output, one canonically ordered list per topic.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    tag: String,
    rankings: BTreeMap<String, Vec<ScoredDoc>>,
}

impl Run {
    /// Validates and canonicalizes per-topic rankings. Rankings deeper than
    /// [`MAX_DEPTH`] are truncated after sorting.
    pub fn new(tag: impl Into<String>, rankings: BTreeMap<String, Vec<ScoredDoc>>) -> Result<Self> {
        Self::with_diagnostics(tag, rankings, &mut Diagnostics::new())
    }

    pub fn with_diagnostics(
        tag: impl Into<String>,
        mut rankings: BTreeMap<String, Vec<ScoredDoc>>,
        diag: &mut Diagnostics,
    ) -> Result<Self> {
        let tag = tag.into();
        check_token(&tag, "run tag")?;
        for (topic, docs) in rankings.iter_mut() {
            check_token(topic, "topic id")?;
            if docs.is_empty() {
                return Err(Error::data(format!("topic {topic} has an empty ranking")));
            }
            let mut seen = HashSet::with_capacity(docs.len());
            for doc in docs.iter() {
                check_token(&doc.doc_id, "doc id")?;
                if !doc.score.is_finite() {
                    return Err(Error::data(format!(
                        "non-finite score for ({topic}, {})",
                        doc.doc_id
                    )));
                }
                if !seen.insert(doc.doc_id.as_str()) {
                    return Err(Error::data(format!(
                        "duplicate document {} for topic {topic}",
                        doc.doc_id
                    )));
                }
            }
            docs.sort_by(canonical_order);
            if docs.len() > MAX_DEPTH {
                diag.warn(Warning::TruncatedRanking {
                    topic: topic.clone(),
                    retrieved: docs.len(),
                    depth: MAX_DEPTH,
                });
                docs.truncate(MAX_DEPTH);
            }
        }
        Ok(Run { tag, rankings })
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn ranking(&self, topic: &str) -> Option<&[ScoredDoc]> {
        self.rankings.get(topic).map(Vec::as_slice)
    }

    pub fn rankings(&self) -> &BTreeMap<String, Vec<ScoredDoc>> {
        &self.rankings
    }

    pub fn topics(&self) -> TopicSet {
        self.rankings.keys().cloned().collect()
    }

    pub fn num_topics(&self) -> usize {
        self.rankings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rankings.is_empty()
    }

    /// Keeps only the topics contained in `topics`.
    pub fn restrict(&self, topics: &TopicSet) -> Run {
        Run {
            tag: self.tag.clone(),
            rankings: self
                .rankings
                .iter()
                .filter(|(t, _)| topics.contains(t))
                .map(|(t, d)| (t.clone(), d.clone()))
                .collect(),
        }
    }

    /// Serializes in run-file format: topics in id order, ranks renumbered
    /// from the canonical order.
    pub fn to_trec(&self) -> String {
        let mut out = String::new();
        for (topic, docs) in &self.rankings {
            for (i, doc) in docs.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{topic} Q0 {} {} {} {}",
                    doc.doc_id,
                    i + 1,
                    doc.score,
                    self.tag
                );
            }
        }
        out
    }
}

fn check_token(value: &str, what: &str) -> Result<()> {
    if value.is_empty() || value.chars().any(char::is_whitespace) {
        Err(Error::data(format!(
            "{what} must be non-empty and whitespace-free, got {value:?}"
        )))
    } else {
        Ok(())
    }
}

/// Parses a run file. Stated ranks are ignored; each topic is re-sorted by
/// score descending with ties broken by doc id descending.
pub fn parse_run(text: &str, expected_tag: Option<&str>, diag: &mut Diagnostics) -> Result<Run> {
    let mut tag: Option<String> = None;
    let mut rankings: BTreeMap<String, Vec<ScoredDoc>> = BTreeMap::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();

    for (line_no, line) in content_lines(text) {
        let rec = RunRecord::parse(line_no, line)?;
        match &tag {
            None => {
                if let Some(expected) = expected_tag {
                    if rec.run_tag != expected {
                        return Err(Error::data(format!(
                            "line {line_no}: run tag {:?} does not match expected {expected:?}",
                            rec.run_tag
                        )));
                    }
                }
                tag = Some(rec.run_tag.clone());
            }
            Some(t) if *t != rec.run_tag => {
                return Err(Error::data(format!(
                    "line {line_no}: conflicting run tags {t:?} and {:?}",
                    rec.run_tag
                )));
            }
            Some(_) => {}
        }
        if !seen.insert((rec.topic_id.clone(), rec.doc_id.clone())) {
            return Err(Error::data(format!(
                "line {line_no}: duplicate document {} for topic {}",
                rec.doc_id, rec.topic_id
            )));
        }
        rankings
            .entry(rec.topic_id)
            .or_default()
            .push(ScoredDoc::new(rec.doc_id, rec.score));
    }

    let Some(tag) = tag else {
        return Err(Error::data("run contains no records"));
    };
    Run::with_diagnostics(tag, rankings, diag)
}

impl FromIterator<(String, ScoredDoc)> for RankingsBuilder {
    fn from_iter<I: IntoIterator<Item = (String, ScoredDoc)>>(iter: I) -> Self {
        let mut b = RankingsBuilder::default();
        for (topic, doc) in iter {
            b.push(topic, doc);
        }
        b
    }
}

/// Accumulates `(topic, doc, score)` triples for [`Run::new`].
#[derive(Debug, Default, Clone)]
pub struct RankingsBuilder {
    rankings: BTreeMap<String, Vec<ScoredDoc>>,
}

impl RankingsBuilder {
    pub fn push(&mut self, topic: impl Into<String>, doc: ScoredDoc) -> &mut Self {
        match self.rankings.entry(topic.into()) {
            Entry::Occupied(mut e) => e.get_mut().push(doc),
            Entry::Vacant(e) => {
                e.insert(vec![doc]);
            }
        }
        self
    }

    pub fn build(self, tag: impl Into<String>) -> Result<Run> {
        Run::new(tag, self.rankings)
    }
}
