//! Per-topic effectiveness measures (P@k, nDCG, bpref) and their mean over
//! topics (ARP).
//!
//! Conventions follow trec_eval. A document is relevant when its grade is at
//! least 1 and unjudged documents count as not relevant. Topics without
//! relevant judgments score 0.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::num::NonZeroUsize;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::run_io::{Qrels, Run, ScoredDoc, TopicJudgments, TopicSet};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MeasureId {
    PrecisionAt {
        k: NonZeroUsize,
    },
    /// Full-depth nDCG when `cutoff` is `None`.
    Ndcg {
        cutoff: Option<NonZeroUsize>,
    },
    Bpref,
}

impl MeasureId {
    pub const P_AT_10: MeasureId = MeasureId::PrecisionAt {
        k: match NonZeroUsize::new(10) {
            Some(k) => k,
            None => unreachable!(),
        },
    };
    pub const NDCG: MeasureId = MeasureId::Ndcg { cutoff: None };
    pub const BPREF: MeasureId = MeasureId::Bpref;

    pub fn precision_at(k: usize) -> Result<Self> {
        NonZeroUsize::new(k)
            .map(|k| MeasureId::PrecisionAt { k })
            .ok_or_else(|| Error::data("precision cutoff k must be at least 1"))
    }

    pub fn ndcg_at(cutoff: usize) -> Result<Self> {
        NonZeroUsize::new(cutoff)
            .map(|c| MeasureId::Ndcg { cutoff: Some(c) })
            .ok_or_else(|| Error::data("nDCG cutoff must be at least 1"))
    }

    /// Canonical lowercase name, also accepted by [`FromStr`]: `p@10`,
    /// `ndcg`, `ndcg@5`, `bpref`.
    pub fn name(&self) -> String {
        match self {
            MeasureId::PrecisionAt { k } => format!("p@{k}"),
            MeasureId::Ndcg { cutoff: None } => "ndcg".to_string(),
            MeasureId::Ndcg { cutoff: Some(c) } => format!("ndcg@{c}"),
            MeasureId::Bpref => "bpref".to_string(),
        }
    }

    /// Column label for rendered tables.
    pub fn label(&self) -> String {
        match self {
            MeasureId::PrecisionAt { k } => format!("P@{k}"),
            MeasureId::Ndcg { cutoff: None } => "nDCG".to_string(),
            MeasureId::Ndcg { cutoff: Some(c) } => format!("nDCG@{c}"),
            MeasureId::Bpref => "bpref".to_string(),
        }
    }

    /// Name safe for use in file names.
    pub fn file_stem(&self) -> String {
        match self {
            MeasureId::PrecisionAt { k } => format!("p_at_{k}"),
            MeasureId::Ndcg { cutoff: None } => "ndcg".to_string(),
            MeasureId::Ndcg { cutoff: Some(c) } => format!("ndcg_at_{c}"),
            MeasureId::Bpref => "bpref".to_string(),
        }
    }

    /// Scores one topic's canonically ordered ranking.
    pub fn evaluate<S: AsRef<str>>(&self, ranking: &[S], judgments: &TopicJudgments) -> f64 {
        match *self {
            MeasureId::PrecisionAt { k } => precision_at_k(ranking, judgments, k.get()),
            MeasureId::Ndcg { cutoff } => ndcg(ranking, judgments, cutoff.map(NonZeroUsize::get)),
            MeasureId::Bpref => bpref(ranking, judgments),
        }
    }
}

impl fmt::Display for MeasureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for MeasureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let parse_cut = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| Error::data(format!("bad cutoff in measure {s:?}")))
        };
        if lower == "bpref" {
            return Ok(MeasureId::Bpref);
        }
        if lower == "ndcg" {
            return Ok(MeasureId::NDCG);
        }
        if let Some(c) = lower
            .strip_prefix("ndcg@")
            .or_else(|| lower.strip_prefix("ndcg_cut_"))
        {
            return MeasureId::ndcg_at(parse_cut(c)?);
        }
        if let Some(k) = lower
            .strip_prefix("p@")
            .or_else(|| lower.strip_prefix("p_"))
            .or_else(|| lower.strip_prefix("precision@"))
        {
            return MeasureId::precision_at(parse_cut(k)?);
        }
        Err(Error::data(format!("unknown measure {s:?}")))
    }
}

impl TryFrom<String> for MeasureId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MeasureId> for String {
    fn from(m: MeasureId) -> String {
        m.name()
    }
}

impl AsRef<str> for ScoredDoc {
    fn as_ref(&self) -> &str {
        &self.doc_id
    }
}

fn grade_of(judgments: &TopicJudgments, doc: &str) -> u8 {
    judgments.get(doc).map_or(0, |g| g.value())
}

/// Fraction of the first `k` positions holding a relevant document. The
/// denominator stays `k` when fewer documents were retrieved.
pub fn precision_at_k<S: AsRef<str>>(ranking: &[S], judgments: &TopicJudgments, k: usize) -> f64 {
    debug_assert!(k >= 1);
    let hits = ranking
        .iter()
        .take(k)
        .filter(|d| grade_of(judgments, d.as_ref()) >= 1)
        .count();
    hits as f64 / k as f64
}

fn discount(position: usize) -> f64 {
    // position is 0-based; rank r = position + 1 is discounted by log2(r + 1)
    ((position + 2) as f64).log2()
}

/// nDCG with linear gain (gain = grade) and a `1/log2(rank + 1)` discount.
/// The ideal ranking orders all judged documents by grade.
pub fn ndcg<S: AsRef<str>>(
    ranking: &[S],
    judgments: &TopicJudgments,
    cutoff: Option<usize>,
) -> f64 {
    let depth = cutoff.unwrap_or(usize::MAX);
    let mut ideal: Vec<u8> = judgments
        .values()
        .map(|g| g.value())
        .filter(|&g| g > 0)
        .collect();
    if ideal.is_empty() {
        return 0.0;
    }
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(depth)
        .enumerate()
        .map(|(i, &g)| f64::from(g) / discount(i))
        .sum();
    let dcg: f64 = ranking
        .iter()
        .take(depth)
        .enumerate()
        .map(|(i, d)| f64::from(grade_of(judgments, d.as_ref())) / discount(i))
        .sum();
    dcg / idcg
}

/// bpref: each retrieved relevant document is penalized by the fraction of
/// judged non-relevant documents ranked above it, capped at `min(R, N)`.
/// Unjudged documents are ignored.
pub fn bpref<S: AsRef<str>>(ranking: &[S], judgments: &TopicJudgments) -> f64 {
    let num_rel = judgments.values().filter(|g| g.is_relevant()).count();
    if num_rel == 0 {
        return 0.0;
    }
    let num_nonrel = judgments.len() - num_rel;
    let cap = num_rel.min(num_nonrel);
    let mut nonrel_above = 0usize;
    let mut sum = 0.0;
    for doc in ranking {
        match judgments.get(doc.as_ref()) {
            Some(g) if g.is_relevant() => {
                sum += if cap == 0 {
                    1.0
                } else {
                    1.0 - nonrel_above.min(cap) as f64 / cap as f64
                };
            }
            Some(_) => nonrel_above += 1,
            None => {}
        }
    }
    sum / num_rel as f64
}

/// One measure's per-topic scores for one run in one evaluation environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScoreVector")]
pub struct TopicScoreVector {
    measure: MeasureId,
    run_tag: String,
    ee_label: String,
    scores: BTreeMap<String, f64>,
}

#[derive(Deserialize)]
struct RawScoreVector {
    measure: MeasureId,
    run_tag: String,
    ee_label: String,
    scores: BTreeMap<String, f64>,
}

impl TryFrom<RawScoreVector> for TopicScoreVector {
    type Error = Error;

    fn try_from(raw: RawScoreVector) -> Result<Self> {
        TopicScoreVector::new(raw.measure, raw.run_tag, raw.ee_label, raw.scores)
    }
}

impl TopicScoreVector {
    pub fn new(
        measure: MeasureId,
        run_tag: impl Into<String>,
        ee_label: impl Into<String>,
        scores: BTreeMap<String, f64>,
    ) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::data("topic score vector has no topics"));
        }
        if let Some((t, s)) = scores.iter().find(|(_, s)| !(0.0..=1.0).contains(*s)) {
            return Err(Error::data(format!(
                "score {s} for topic {t} outside [0, 1]"
            )));
        }
        Ok(Self {
            measure,
            run_tag: run_tag.into(),
            ee_label: ee_label.into(),
            scores,
        })
    }

    pub fn measure(&self) -> MeasureId {
        self.measure
    }

    pub fn run_tag(&self) -> &str {
        &self.run_tag
    }

    pub fn ee_label(&self) -> &str {
        &self.ee_label
    }

    pub fn scores(&self) -> &BTreeMap<String, f64> {
        &self.scores
    }

    pub fn get(&self, topic: &str) -> Option<f64> {
        self.scores.get(topic).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn topics(&self) -> TopicSet {
        self.scores.keys().cloned().collect()
    }

    /// Scores in topic id order.
    pub fn values(&self) -> Vec<f64> {
        self.scores.values().copied().collect()
    }

    /// `topic<TAB>measure<TAB>score` lines in topic order, 6 decimals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let name = self.measure.name();
        for (topic, score) in &self.scores {
            let _ = writeln!(out, "{topic}\t{name}\t{score:.6}");
        }
        out
    }
}

/// Average Retrieval Performance: the mean of a score vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArpValue {
    pub value: f64,
    pub n_topics: usize,
}

impl ArpValue {
    /// Wraps an externally computed mean.
    pub fn from_mean(value: f64, n_topics: usize) -> Result<Self> {
        if n_topics == 0 {
            return Err(Error::data("ARP over zero topics"));
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::data(format!("ARP {value} outside [0, 1]")));
        }
        Ok(Self { value, n_topics })
    }

    pub fn from_scores(scores: &[f64]) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::data("ARP of an empty score vector"));
        }
        let value = scores.iter().sum::<f64>() / scores.len() as f64;
        Self::from_mean(value, scores.len())
    }
}

pub fn arp(vector: &TopicScoreVector) -> ArpValue {
    ArpValue::from_scores(&vector.values()).expect("score vectors are non-empty and bounded")
}

fn empty_judgments() -> &'static TopicJudgments {
    static EMPTY: OnceLock<TopicJudgments> = OnceLock::new();
    EMPTY.get_or_init(TopicJudgments::new)
}

/// Scores `run` on every topic in `topics`. A topic the run did not retrieve
/// for scores 0.
pub fn score_run(
    run: &Run,
    qrels: &Qrels,
    measure: MeasureId,
    topics: &TopicSet,
    ee_label: &str,
) -> Result<TopicScoreVector> {
    if topics.is_empty() {
        return Err(Error::data(format!(
            "no topics to score run {} in {ee_label}",
            run.tag()
        )));
    }
    let unknown: Vec<&str> = topics
        .iter()
        .filter(|t| run.ranking(t).is_none() && qrels.topic(t).is_none())
        .collect();
    if !unknown.is_empty() {
        return Err(Error::data(format!(
            "topics absent from both run {} and qrels: {}",
            run.tag(),
            unknown.join(", ")
        )));
    }
    let scores = topics
        .iter()
        .map(|t| {
            let judgments = qrels.topic(t).unwrap_or_else(|| empty_judgments());
            let score = run
                .ranking(t)
                .map_or(0.0, |ranking| measure.evaluate(ranking, judgments));
            (t.to_string(), score)
        })
        .collect();
    TopicScoreVector::new(measure, run.tag(), ee_label, scores)
}
