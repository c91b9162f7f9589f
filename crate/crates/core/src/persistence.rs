//! Pivot-based persistence measures between two evaluation environments.
//!
//! An experimental system `S` and a pivot system `P` are scored in a base
//! environment `EE` and a target environment `EE'`. From the per-topic scores
//! this module derives:
//!
//! * Result Delta: `(M̄_EE(S) − M̄_EE'(S)) / M̄_EE(S)`; negative means `S`
//!   improved over time.
//! * Relative improvement `RI = (M̄(S) − M̄(P)) / M̄(P)` within one
//!   environment, and `ΔRI = RI − RI'`, ideally 0.
//! * Per-topic deltas `M_j(S) − M_j(P)` and the Effect Ratio, the mean target
//!   delta over the mean base delta, ideally 1.
//!
//! Zero denominators never produce infinities: the affected quantity becomes
//! [`Quantity::Undefined`] with the reason attached.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::measures::{arp, score_run, ArpValue, MeasureId, TopicScoreVector};
use crate::run_io::{Qrels, Run, TopicSet};
use crate::stats::{t_test_unpaired, TTestResult, TTestVariant};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UndefinedReason {
    /// Result Delta with a zero base-environment mean.
    ZeroBaseMean,
    /// Relative improvement over a pivot with zero mean.
    ZeroPivotMean,
    /// Effect Ratio whose mean base-environment delta is zero.
    ZeroBaseEffect,
}

impl UndefinedReason {
    pub fn as_str(self) -> &'static str {
        match self {
            UndefinedReason::ZeroBaseMean => "zero_base_mean",
            UndefinedReason::ZeroPivotMean => "zero_pivot_mean",
            UndefinedReason::ZeroBaseEffect => "zero_base_effect",
        }
    }
}

impl fmt::Display for UndefinedReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UndefinedReason {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero_base_mean" => Ok(UndefinedReason::ZeroBaseMean),
            "zero_pivot_mean" => Ok(UndefinedReason::ZeroPivotMean),
            "zero_base_effect" => Ok(UndefinedReason::ZeroBaseEffect),
            other => Err(Error::data(format!("unknown undefined reason {other:?}"))),
        }
    }
}

/// A ratio-based measure value, or the reason it could not be computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quantity {
    Defined(f64),
    Undefined(UndefinedReason),
}

impl Quantity {
    pub fn value(self) -> Option<f64> {
        match self {
            Quantity::Defined(v) => Some(v),
            Quantity::Undefined(_) => None,
        }
    }

    pub fn reason(self) -> Option<UndefinedReason> {
        match self {
            Quantity::Defined(_) => None,
            Quantity::Undefined(r) => Some(r),
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, Quantity::Defined(_))
    }

    fn ratio(numerator: f64, denominator: f64, reason: UndefinedReason) -> Quantity {
        if denominator == 0.0 {
            Quantity::Undefined(reason)
        } else {
            Quantity::Defined(numerator / denominator)
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum QuantityRepr {
    Defined(f64),
    Undefined { undefined: String },
}

/// Serialized as a bare number, or `{"undefined": "<reason>"}`.
impl Serialize for Quantity {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Quantity::Defined(v) => QuantityRepr::Defined(v),
            Quantity::Undefined(r) => QuantityRepr::Undefined {
                undefined: r.as_str().to_string(),
            },
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Quantity {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        match QuantityRepr::deserialize(deserializer)? {
            QuantityRepr::Defined(v) => Ok(Quantity::Defined(v)),
            QuantityRepr::Undefined { undefined } => undefined
                .parse()
                .map(Quantity::Undefined)
                .map_err(serde::de::Error::custom),
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::Defined(v) => write!(f, "{v}"),
            Quantity::Undefined(_) => f.write_str("undefined"),
        }
    }
}

/// Base and target evaluation environment labels, e.g. `WT:LT`. Equal labels
/// denote a self-replication check.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EePair {
    pub base: String,
    pub target: String,
}

impl EePair {
    pub fn new(base: impl Into<String>, target: impl Into<String>) -> Result<Self> {
        let (base, target) = (base.into(), target.into());
        if base.is_empty() || target.is_empty() {
            return Err(Error::data("environment labels must be non-empty"));
        }
        Ok(Self { base, target })
    }

    pub fn is_self_replication(&self) -> bool {
        self.base == self.target
    }

    /// `base_target`, for file names.
    pub fn file_stem(&self) -> String {
        format!("{}_{}", self.base, self.target)
    }
}

impl fmt::Display for EePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.base, self.target)
    }
}

impl FromStr for EePair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some((b, t)) if !t.contains(':') => EePair::new(b.trim(), t.trim()),
            _ => Err(Error::data(format!(
                "environment pair must look like BASE:TARGET, got {s:?}"
            ))),
        }
    }
}

/// Relative change of a system's mean between two environments.
pub fn result_delta(mean_base: &ArpValue, mean_target: &ArpValue) -> Quantity {
    Quantity::ratio(
        mean_base.value - mean_target.value,
        mean_base.value,
        UndefinedReason::ZeroBaseMean,
    )
}

/// Improvement of a system over the pivot within one environment.
pub fn relative_improvement(mean_system: &ArpValue, mean_pivot: &ArpValue) -> Quantity {
    Quantity::ratio(
        mean_system.value - mean_pivot.value,
        mean_pivot.value,
        UndefinedReason::ZeroPivotMean,
    )
}

/// `ri_base − ri_target`. An undefined input makes the result undefined
/// with the same reason.
pub fn delta_ri(ri_base: Quantity, ri_target: Quantity) -> Quantity {
    match (ri_base, ri_target) {
        (Quantity::Defined(a), Quantity::Defined(b)) => Quantity::Defined(a - b),
        (Quantity::Undefined(r), _) | (_, Quantity::Undefined(r)) => Quantity::Undefined(r),
    }
}

/// Per-topic `system − pivot` differences in one environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicDeltaVector {
    pub ee_label: String,
    pub measure: MeasureId,
    pub deltas: BTreeMap<String, f64>,
}

impl TopicDeltaVector {
    pub fn n(&self) -> usize {
        self.deltas.len()
    }

    pub fn mean(&self) -> f64 {
        self.deltas.values().sum::<f64>() / self.deltas.len() as f64
    }

    /// Multiplies every delta by `factor`.
    pub fn scaled(&self, factor: f64) -> TopicDeltaVector {
        TopicDeltaVector {
            deltas: self
                .deltas
                .iter()
                .map(|(t, d)| (t.clone(), d * factor))
                .collect(),
            ..self.clone()
        }
    }
}

fn ensure_same_topics(a: &TopicScoreVector, b: &TopicScoreVector) -> Result<()> {
    let (ta, tb) = (a.topics(), b.topics());
    if ta != tb {
        let diff = ta.symmetric_difference(&tb);
        let diff: Vec<&str> = diff.iter().collect();
        return Err(Error::data(format!(
            "topic sets of {} ({}) and {} ({}) differ in: {}",
            a.run_tag(),
            a.ee_label(),
            b.run_tag(),
            b.ee_label(),
            diff.join(", ")
        )));
    }
    Ok(())
}

pub fn topic_deltas(
    system: &TopicScoreVector,
    pivot: &TopicScoreVector,
) -> Result<TopicDeltaVector> {
    if system.measure() != pivot.measure() {
        return Err(Error::data(format!(
            "cannot subtract {} scores from {} scores",
            pivot.measure(),
            system.measure()
        )));
    }
    if system.ee_label() != pivot.ee_label() {
        return Err(Error::data(format!(
            "system scored in {} but pivot in {}",
            system.ee_label(),
            pivot.ee_label()
        )));
    }
    ensure_same_topics(system, pivot)?;
    let deltas = system
        .scores()
        .iter()
        .map(|(t, s)| (t.clone(), s - pivot.scores()[t]))
        .collect();
    Ok(TopicDeltaVector {
        ee_label: system.ee_label().to_string(),
        measure: system.measure(),
        deltas,
    })
}

/// Mean target-environment delta over mean base-environment delta. The two
/// means use their own topic counts.
pub fn effect_ratio(
    target_deltas: &TopicDeltaVector,
    base_deltas: &TopicDeltaVector,
) -> Result<Quantity> {
    if target_deltas.n() == 0 || base_deltas.n() == 0 {
        return Err(Error::data("effect ratio needs non-empty delta vectors"));
    }
    Ok(Quantity::ratio(
        target_deltas.mean(),
        base_deltas.mean(),
        UndefinedReason::ZeroBaseEffect,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellOptions {
    pub t_test: TTestVariant,
    /// Require identical topic sets in both environments.
    pub strict_topics: bool,
    /// Permit the pivot to be the system itself.
    pub allow_self_pivot: bool,
}

impl Default for CellOptions {
    fn default() -> Self {
        Self {
            t_test: TTestVariant::StudentPooled,
            strict_topics: true,
            allow_self_pivot: false,
        }
    }
}

/// The four per-topic score vectors one cell is computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct PairScores {
    pub system_base: TopicScoreVector,
    pub system_target: TopicScoreVector,
    pub pivot_base: TopicScoreVector,
    pub pivot_target: TopicScoreVector,
}

impl PairScores {
    /// Scores all four runs. `topics_base` and `topics_target` may differ
    /// only when strict topic mode is off.
    #[allow(clippy::too_many_arguments)]
    pub fn score(
        system: (&Run, &Run),
        pivot: (&Run, &Run),
        qrels: (&Qrels, &Qrels),
        measure: MeasureId,
        topics_base: &TopicSet,
        topics_target: &TopicSet,
        pair: &EePair,
    ) -> Result<Self> {
        Ok(Self {
            system_base: score_run(system.0, qrels.0, measure, topics_base, &pair.base)?,
            system_target: score_run(system.1, qrels.1, measure, topics_target, &pair.target)?,
            pivot_base: score_run(pivot.0, qrels.0, measure, topics_base, &pair.base)?,
            pivot_target: score_run(pivot.1, qrels.1, measure, topics_target, &pair.target)?,
        })
    }
}

/// The full persistence record for one (system, measure, environment pair).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "CellRecord", try_from = "CellRecord")]
pub struct PersistenceCell {
    pub system_tag: String,
    pub pivot_tag: String,
    pub measure: MeasureId,
    pub pair: EePair,
    pub arp_base: ArpValue,
    pub arp_target: ArpValue,
    pub pivot_arp_base: ArpValue,
    pub pivot_arp_target: ArpValue,
    pub result_delta: Quantity,
    pub ri_base: Quantity,
    pub ri_target: Quantity,
    pub delta_ri: Quantity,
    pub effect_ratio: Quantity,
    /// System's base vs. target topic score distributions.
    pub t_test: TTestResult,
    /// p-value of system vs. pivot within the base environment.
    pub pivot_p_base: f64,
    /// p-value of system vs. pivot within the target environment.
    pub pivot_p_target: f64,
}

impl PersistenceCell {
    pub fn from_scores(scores: &PairScores, pair: &EePair, options: &CellOptions) -> Result<Self> {
        let PairScores {
            system_base,
            system_target,
            pivot_base,
            pivot_target,
        } = scores;
        let measure = system_base.measure();
        if [system_target, pivot_base, pivot_target]
            .iter()
            .any(|v| v.measure() != measure)
        {
            return Err(Error::data(
                "score vectors of one cell must share a measure",
            ));
        }
        if system_base.run_tag() != system_target.run_tag()
            || pivot_base.run_tag() != pivot_target.run_tag()
        {
            return Err(Error::data(
                "base and target vectors come from different runs",
            ));
        }
        if system_base.run_tag() == pivot_base.run_tag() && !options.allow_self_pivot {
            return Err(Error::data(format!(
                "system {} is its own pivot",
                system_base.run_tag()
            )));
        }
        for (v, label) in [
            (system_base, &pair.base),
            (pivot_base, &pair.base),
            (system_target, &pair.target),
            (pivot_target, &pair.target),
        ] {
            if v.ee_label() != label {
                return Err(Error::data(format!(
                    "{} scored in {} where {label} was expected",
                    v.run_tag(),
                    v.ee_label()
                )));
            }
        }
        if options.strict_topics {
            ensure_same_topics(system_base, system_target)?;
        }

        let arp_base = arp(system_base);
        let arp_target = arp(system_target);
        let pivot_arp_base = arp(pivot_base);
        let pivot_arp_target = arp(pivot_target);
        let ri_base = relative_improvement(&arp_base, &pivot_arp_base);
        let ri_target = relative_improvement(&arp_target, &pivot_arp_target);
        let base_deltas = topic_deltas(system_base, pivot_base)?;
        let target_deltas = topic_deltas(system_target, pivot_target)?;

        Ok(PersistenceCell {
            system_tag: system_base.run_tag().to_string(),
            pivot_tag: pivot_base.run_tag().to_string(),
            measure,
            pair: pair.clone(),
            arp_base,
            arp_target,
            pivot_arp_base,
            pivot_arp_target,
            result_delta: result_delta(&arp_base, &arp_target),
            ri_base,
            ri_target,
            delta_ri: delta_ri(ri_base, ri_target),
            effect_ratio: effect_ratio(&target_deltas, &base_deltas)?,
            t_test: t_test_unpaired(
                &system_base.values(),
                &system_target.values(),
                options.t_test,
            )?,
            pivot_p_base: t_test_unpaired(
                &system_base.values(),
                &pivot_base.values(),
                options.t_test,
            )?
            .p_value,
            pivot_p_target: t_test_unpaired(
                &system_target.values(),
                &pivot_target.values(),
                options.t_test,
            )?
            .p_value,
        })
    }
}

/// Runs and qrels for one cell, already parsed.
#[derive(Debug, Clone, Copy)]
pub struct CellInputs<'a> {
    pub system_base: &'a Run,
    pub system_target: &'a Run,
    pub pivot_base: &'a Run,
    pub pivot_target: &'a Run,
    pub qrels_base: &'a Qrels,
    pub qrels_target: &'a Qrels,
}

/// Scores the inputs on `topics` in both environments and assembles the cell.
pub fn persistence_cell(
    inputs: CellInputs<'_>,
    measure: MeasureId,
    topics: &TopicSet,
    pair: &EePair,
    options: &CellOptions,
) -> Result<PersistenceCell> {
    let scores = PairScores::score(
        (inputs.system_base, inputs.system_target),
        (inputs.pivot_base, inputs.pivot_target),
        (inputs.qrels_base, inputs.qrels_target),
        measure,
        topics,
        topics,
        pair,
    )?;
    PersistenceCell::from_scores(&scores, pair, options)
}

/// Flat JSON form of a [`PersistenceCell`]. Undefined quantities are `null`
/// with a reason in `undefined_flags`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CellRecord {
    system: String,
    pivot: String,
    measure: MeasureId,
    base: String,
    target: String,
    n_topics_base: usize,
    n_topics_target: usize,
    arp_base: f64,
    arp_target: f64,
    pivot_arp_base: f64,
    pivot_arp_target: f64,
    result_delta: Option<f64>,
    ri_base: Option<f64>,
    ri_target: Option<f64>,
    delta_ri: Option<f64>,
    effect_ratio: Option<f64>,
    t_test: TTestVariant,
    t_statistic: Option<f64>,
    degrees_of_freedom: f64,
    p_value: f64,
    degenerate_variance: bool,
    pivot_p_base: f64,
    pivot_p_target: f64,
    undefined_flags: BTreeMap<String, String>,
}

const POS_INF_T: &str = "degenerate_variance:+inf";
const NEG_INF_T: &str = "degenerate_variance:-inf";

impl From<PersistenceCell> for CellRecord {
    fn from(c: PersistenceCell) -> Self {
        let mut flags = BTreeMap::new();
        let mut q = |name: &str, v: Quantity| {
            if let Some(r) = v.reason() {
                flags.insert(name.to_string(), r.as_str().to_string());
            }
            v.value()
        };
        let result_delta = q("result_delta", c.result_delta);
        let ri_base = q("ri_base", c.ri_base);
        let ri_target = q("ri_target", c.ri_target);
        let delta_ri = q("delta_ri", c.delta_ri);
        let effect_ratio = q("effect_ratio", c.effect_ratio);
        let t = c.t_test.t_statistic;
        let t_statistic = if t.is_finite() {
            Some(t)
        } else {
            flags.insert(
                "t_statistic".to_string(),
                if t > 0.0 { POS_INF_T } else { NEG_INF_T }.to_string(),
            );
            None
        };
        CellRecord {
            system: c.system_tag,
            pivot: c.pivot_tag,
            measure: c.measure,
            base: c.pair.base,
            target: c.pair.target,
            n_topics_base: c.arp_base.n_topics,
            n_topics_target: c.arp_target.n_topics,
            arp_base: c.arp_base.value,
            arp_target: c.arp_target.value,
            pivot_arp_base: c.pivot_arp_base.value,
            pivot_arp_target: c.pivot_arp_target.value,
            result_delta,
            ri_base,
            ri_target,
            delta_ri,
            effect_ratio,
            t_test: c.t_test.variant,
            t_statistic,
            degrees_of_freedom: c.t_test.degrees_of_freedom,
            p_value: c.t_test.p_value,
            degenerate_variance: c.t_test.degenerate_variance,
            pivot_p_base: c.pivot_p_base,
            pivot_p_target: c.pivot_p_target,
            undefined_flags: flags,
        }
    }
}

impl TryFrom<CellRecord> for PersistenceCell {
    type Error = Error;

    fn try_from(r: CellRecord) -> Result<Self> {
        let flags = &r.undefined_flags;
        let q = |name: &str, v: Option<f64>| -> Result<Quantity> {
            match v {
                Some(v) => Ok(Quantity::Defined(v)),
                None => {
                    let reason = flags
                        .get(name)
                        .ok_or_else(|| Error::data(format!("{name} is null without a reason")))?;
                    Ok(Quantity::Undefined(reason.parse()?))
                }
            }
        };
        let t_statistic = match r.t_statistic {
            Some(t) => t,
            None => match flags.get("t_statistic").map(String::as_str) {
                Some(POS_INF_T) => f64::INFINITY,
                Some(NEG_INF_T) => f64::NEG_INFINITY,
                _ => return Err(Error::data("t_statistic is null without a reason")),
            },
        };
        Ok(PersistenceCell {
            system_tag: r.system,
            pivot_tag: r.pivot,
            measure: r.measure,
            pair: EePair::new(r.base, r.target)?,
            arp_base: ArpValue::from_mean(r.arp_base, r.n_topics_base)?,
            arp_target: ArpValue::from_mean(r.arp_target, r.n_topics_target)?,
            pivot_arp_base: ArpValue::from_mean(r.pivot_arp_base, r.n_topics_base)?,
            pivot_arp_target: ArpValue::from_mean(r.pivot_arp_target, r.n_topics_target)?,
            result_delta: q("result_delta", r.result_delta)?,
            ri_base: q("ri_base", r.ri_base)?,
            ri_target: q("ri_target", r.ri_target)?,
            delta_ri: q("delta_ri", r.delta_ri)?,
            effect_ratio: q("effect_ratio", r.effect_ratio)?,
            t_test: TTestResult {
                t_statistic,
                degrees_of_freedom: r.degrees_of_freedom,
                p_value: r.p_value,
                variant: r.t_test,
                degenerate_variance: r.degenerate_variance,
            },
            pivot_p_base: r.pivot_p_base,
            pivot_p_target: r.pivot_p_target,
        })
    }
}
