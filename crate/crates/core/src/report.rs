//! Presentation of persistence cells. Tables and scatter data summarize
//! whole cells; delta series show how single topics moved.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::measures::{MeasureId, TopicScoreVector};
use crate::persistence::{result_delta, EePair, PersistenceCell, Quantity, TopicDeltaVector};
use crate::{Error, Result};

/// Two-sided significance level for the `*` marker.
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// Default |ER| above which scatter points are flagged as outliers.
pub const DEFAULT_ER_EXCLUSION: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    /// Base environment of an experimental system: ideal values by definition.
    Ideal,
    /// Computed from a cell's target environment.
    Measured,
    /// Pivot row: only ARP and Result Delta apply.
    Pivot,
    /// No cell covers this (system, environment, measure).
    Missing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub kind: EntryKind,
    pub arp: Option<f64>,
    pub result_delta: Option<Quantity>,
    pub delta_ri: Option<Quantity>,
    pub effect_ratio: Option<Quantity>,
    pub p_value: Option<f64>,
    /// Significantly different from the pivot within the same environment.
    pub significant: bool,
}

impl TableEntry {
    fn missing() -> Self {
        TableEntry {
            kind: EntryKind::Missing,
            arp: None,
            result_delta: None,
            delta_ri: None,
            effect_ratio: None,
            p_value: None,
            significant: false,
        }
    }

    fn ideal(arp: f64, pivot_p: f64) -> Self {
        TableEntry {
            kind: EntryKind::Ideal,
            arp: Some(arp),
            result_delta: Some(Quantity::Defined(0.0)),
            delta_ri: Some(Quantity::Defined(0.0)),
            effect_ratio: Some(Quantity::Defined(1.0)),
            p_value: Some(1.0),
            significant: pivot_p < SIGNIFICANCE_LEVEL,
        }
    }

    fn pivot(arp: f64, result_delta: Quantity) -> Self {
        TableEntry {
            kind: EntryKind::Pivot,
            arp: Some(arp),
            result_delta: Some(result_delta),
            delta_ri: None,
            effect_ratio: None,
            p_value: None,
            significant: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub system: String,
    pub ee: String,
    /// One entry per table measure, in column order.
    pub entries: Vec<TableEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceTable {
    pub pivot: String,
    pub measures: Vec<MeasureId>,
    pub environments: Vec<String>,
    pub rows: Vec<TableRow>,
}

/// Orders environment labels: first those listed in `preferred`, then the
/// rest with bases before targets, ties by label.
fn environment_order(cells: &[PersistenceCell], preferred: &[String]) -> Vec<String> {
    let mut labels: BTreeSet<&str> = BTreeSet::new();
    for c in cells {
        labels.insert(&c.pair.base);
        labels.insert(&c.pair.target);
    }
    let mut order: Vec<String> = preferred
        .iter()
        .filter(|l| labels.contains(l.as_str()))
        .cloned()
        .collect();
    let mut rest: Vec<&str> = labels
        .into_iter()
        .filter(|l| !order.iter().any(|o| o == l))
        .collect();
    let is_base = |l: &str| cells.iter().any(|c| c.pair.base == l);
    rest.sort_by_key(|l| (!is_base(l), *l));
    order.extend(rest.into_iter().map(String::from));
    order
}

type Key = (String, String, MeasureId);

fn put_consistent(map: &mut BTreeMap<Key, TableEntry>, key: Key, entry: TableEntry) -> Result<()> {
    if let Some(existing) = map.get(&key) {
        if existing.arp != entry.arp {
            return Err(Error::data(format!(
                "inconsistent ARP for {} in {} under {}",
                key.0, key.1, key.2
            )));
        }
        return Ok(());
    }
    map.insert(key, entry);
    Ok(())
}

fn merge_rows(
    base: BTreeMap<Key, TableEntry>,
    target: BTreeMap<Key, TableEntry>,
) -> Result<BTreeMap<Key, TableEntry>> {
    let mut merged = base;
    for (key, entry) in target {
        if let Some(existing) = merged.get(&key) {
            if existing.arp != entry.arp {
                return Err(Error::data(format!(
                    "inconsistent ARP for {} in {} under {}",
                    key.0, key.1, key.2
                )));
            }
        }
        merged.insert(key, entry);
    }
    Ok(merged)
}

fn is_ideal(cell: &PersistenceCell) -> bool {
    cell.result_delta == Quantity::Defined(0.0)
        && cell.delta_ri == Quantity::Defined(0.0)
        && cell.effect_ratio == Quantity::Defined(1.0)
        && cell.t_test.p_value == 1.0
}

/// Assembles cells sharing one pivot into a table. `ee_order` fixes the
/// chronological order of environment rows; unlisted labels follow.
pub fn persistence_table(
    cells: &[PersistenceCell],
    ee_order: &[String],
) -> Result<PersistenceTable> {
    let first = cells
        .first()
        .ok_or_else(|| Error::data("persistence table needs at least one cell"))?;
    let pivot = first.pivot_tag.clone();
    if let Some(c) = cells.iter().find(|c| c.pivot_tag != pivot) {
        return Err(Error::data(format!(
            "cells mix pivots {pivot} and {}",
            c.pivot_tag
        )));
    }

    let mut measured: BTreeMap<Key, TableEntry> = BTreeMap::new();
    for c in cells {
        let key = (c.system_tag.clone(), c.pair.target.clone(), c.measure);
        let kind = if c.pair.is_self_replication() && is_ideal(c) {
            EntryKind::Ideal
        } else {
            EntryKind::Measured
        };
        let entry = TableEntry {
            kind,
            arp: Some(c.arp_target.value),
            result_delta: Some(c.result_delta),
            delta_ri: Some(c.delta_ri),
            effect_ratio: Some(c.effect_ratio),
            p_value: Some(c.t_test.p_value),
            significant: c.pivot_p_target < SIGNIFICANCE_LEVEL,
        };
        if measured.insert(key, entry).is_some() {
            return Err(Error::data(format!(
                "duplicate cell for {} in {} under {}",
                c.system_tag, c.pair.target, c.measure
            )));
        }
    }

    let mut base_entries: BTreeMap<Key, TableEntry> = BTreeMap::new();
    let mut pivot_base: BTreeMap<Key, TableEntry> = BTreeMap::new();
    let mut pivot_target: BTreeMap<Key, TableEntry> = BTreeMap::new();
    for c in cells {
        put_consistent(
            &mut base_entries,
            (c.system_tag.clone(), c.pair.base.clone(), c.measure),
            TableEntry::ideal(c.arp_base.value, c.pivot_p_base),
        )?;
        put_consistent(
            &mut pivot_base,
            (pivot.clone(), c.pair.base.clone(), c.measure),
            TableEntry::pivot(c.pivot_arp_base.value, Quantity::Defined(0.0)),
        )?;
        if !c.pair.is_self_replication() {
            let rd = result_delta(&c.pivot_arp_base, &c.pivot_arp_target);
            let key = (pivot.clone(), c.pair.target.clone(), c.measure);
            let entry = TableEntry::pivot(c.pivot_arp_target.value, rd);
            match pivot_target.get(&key) {
                Some(existing) if *existing != entry => {
                    return Err(Error::data(format!(
                        "pivot {pivot} reaches {} from several base environments under {}",
                        c.pair.target, c.measure
                    )));
                }
                _ => {
                    pivot_target.insert(key, entry);
                }
            }
        }
    }
    // target-environment entries take precedence over base-environment ones
    let entries = merge_rows(base_entries, measured)?;
    let pivot_entries = merge_rows(pivot_base, pivot_target)?;

    let measures: Vec<MeasureId> = cells
        .iter()
        .map(|c| c.measure)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let environments = environment_order(cells, ee_order);
    let systems: BTreeSet<&str> = cells.iter().map(|c| c.system_tag.as_str()).collect();

    let mut rows = Vec::new();
    let emit = |system: &str, source: &BTreeMap<Key, TableEntry>, rows: &mut Vec<TableRow>| {
        for ee in &environments {
            let row_entries: Vec<TableEntry> = measures
                .iter()
                .map(|m| {
                    source
                        .get(&(system.to_string(), ee.clone(), *m))
                        .cloned()
                        .unwrap_or_else(TableEntry::missing)
                })
                .collect();
            if row_entries.iter().all(|e| e.kind == EntryKind::Missing) {
                continue;
            }
            rows.push(TableRow {
                system: system.to_string(),
                ee: ee.clone(),
                entries: row_entries,
            });
        }
    };
    emit(&pivot, &pivot_entries, &mut rows);
    for system in systems {
        emit(system, &entries, &mut rows);
    }

    Ok(PersistenceTable {
        pivot,
        measures,
        environments,
        rows,
    })
}

fn fmt3(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".to_string()
    } else {
        s
    }
}

fn fmt_quantity(q: Option<Quantity>, ideal: bool) -> String {
    match q {
        None => "-".to_string(),
        Some(Quantity::Undefined(_)) => "undef".to_string(),
        Some(Quantity::Defined(v)) if ideal => format!("{v}"),
        Some(Quantity::Defined(v)) => fmt3(v),
    }
}

impl TableEntry {
    fn text_cells(&self) -> [String; 5] {
        if self.kind == EntryKind::Missing {
            return std::array::from_fn(|_| "n/a".to_string());
        }
        let ideal = self.kind == EntryKind::Ideal;
        let mut arp = self.arp.map_or_else(|| "-".to_string(), fmt3);
        if self.significant {
            arp.push('*');
        }
        let p = match self.p_value {
            None => "-".to_string(),
            Some(p) if ideal => format!("{p}"),
            Some(p) => fmt3(p),
        };
        [
            arp,
            fmt_quantity(self.result_delta, ideal),
            fmt_quantity(self.delta_ri, ideal),
            fmt_quantity(self.effect_ratio, ideal),
            p,
        ]
    }
}

fn full(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v}"))
}

fn full_quantity(q: Option<Quantity>) -> String {
    match q {
        None => String::new(),
        Some(Quantity::Defined(v)) => format!("{v}"),
        Some(Quantity::Undefined(r)) => format!("undefined:{r}"),
    }
}

const COLUMNS: [&str; 5] = ["ARP", "RΔ", "ΔRI", "ER", "p"];

impl PersistenceTable {
    /// Aligned plain-text table with values rounded to 3 decimals. Ideal
    /// values print as `0` and `1`, `-` marks a measure that does not apply,
    /// `*` marks significance against the pivot in the same environment.
    pub fn to_text(&self) -> String {
        let mut grid: Vec<Vec<String>> = Vec::new();
        let mut group = vec![String::new(), String::new()];
        let mut header = vec!["system".to_string(), "EE".to_string()];
        for m in &self.measures {
            for (i, c) in COLUMNS.iter().enumerate() {
                group.push(if i == 0 { m.label() } else { String::new() });
                header.push(c.to_string());
            }
        }
        grid.push(group);
        grid.push(header);
        for row in &self.rows {
            let mut line = vec![row.system.clone(), row.ee.clone()];
            for e in &row.entries {
                line.extend(e.text_cells());
            }
            grid.push(line);
        }

        let ncols = grid[1].len();
        let widths: Vec<usize> = (0..ncols)
            .map(|c| grid.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (ri, line) in grid.iter().enumerate() {
            let mut text = String::new();
            for (c, cell) in line.iter().enumerate() {
                if c >= 2 && (c - 2) % COLUMNS.len() == 0 {
                    text.push_str(" | ");
                } else if c > 0 {
                    text.push(' ');
                }
                let pad = widths[c] - cell.chars().count();
                if c < 2 || ri == 0 {
                    text.push_str(cell);
                    text.push_str(&" ".repeat(pad));
                } else {
                    text.push_str(&" ".repeat(pad));
                    text.push_str(cell);
                }
            }
            let _ = writeln!(out, "{}", text.trim_end());
        }
        out
    }

    /// One row per system × environment × measure, full precision.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::data(format!("csv encoding failed: {e}"));
        w.write_record([
            "system",
            "ee",
            "measure",
            "kind",
            "arp",
            "result_delta",
            "delta_ri",
            "effect_ratio",
            "p_value",
            "significant",
        ])
        .map_err(csv_err)?;
        for row in &self.rows {
            for (m, e) in self.measures.iter().zip(&row.entries) {
                let kind = serde_json::to_value(e.kind)
                    .ok()
                    .and_then(|v| v.as_str().map(String::from))
                    .unwrap_or_default();
                w.write_record([
                    row.system.clone(),
                    row.ee.clone(),
                    m.name(),
                    kind,
                    full(e.arp),
                    full_quantity(e.result_delta),
                    full_quantity(e.delta_ri),
                    full_quantity(e.effect_ratio),
                    full(e.p_value),
                    e.significant.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::data(format!("csv encoding failed: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// One Effect Ratio (x) vs. ΔRI (y) point; (1, 0) is perfect persistence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub system: String,
    pub measure: MeasureId,
    pub pair: EePair,
    pub x: Option<f64>,
    pub y: Option<f64>,
    /// Outlier (|ER| above the threshold) or undefined coordinate.
    pub excluded: bool,
}

/// One point per cell, sorted by (system, measure, pair).
pub fn er_dri_points(cells: &[PersistenceCell], exclusion_threshold: f64) -> Vec<ScatterPoint> {
    let mut points: Vec<ScatterPoint> = cells
        .iter()
        .map(|c| {
            let (x, y) = (c.effect_ratio.value(), c.delta_ri.value());
            let excluded = match (x, y) {
                (Some(x), Some(y)) => {
                    !x.is_finite() || !y.is_finite() || x.abs() > exclusion_threshold
                }
                _ => true,
            };
            ScatterPoint {
                system: c.system_tag.clone(),
                measure: c.measure,
                pair: c.pair.clone(),
                x,
                y,
                excluded,
            }
        })
        .collect();
    points.sort_by(|a, b| (&a.system, a.measure, &a.pair).cmp(&(&b.system, b.measure, &b.pair)));
    points
}

pub fn scatter_csv(points: &[ScatterPoint]) -> String {
    let mut out = String::from("system,measure,pair,x,y,excluded\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.system,
            p.measure,
            p.pair,
            full(p.x),
            full(p.y),
            p.excluded
        );
    }
    out
}

/// Which per-topic differences a series plots.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesMode {
    /// The system's own change from the base to the target environment.
    #[default]
    CrossEe,
    /// The system's delta to the pivot in the target environment.
    PivotDelta,
}

/// Per-topic deltas sorted descending, ties by topic id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicDeltaSeries {
    pub system: String,
    pub measure: MeasureId,
    pub pair: EePair,
    pub entries: Vec<(String, f64)>,
}

impl TopicDeltaSeries {
    fn sorted(
        system: String,
        measure: MeasureId,
        pair: EePair,
        mut entries: Vec<(String, f64)>,
    ) -> Self {
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        TopicDeltaSeries {
            system,
            measure,
            pair,
            entries,
        }
    }

    /// Series of per-topic deltas to the pivot in one environment.
    pub fn from_pivot_deltas(system: &str, pair: &EePair, deltas: &TopicDeltaVector) -> Self {
        Self::sorted(
            system.to_string(),
            deltas.measure,
            pair.clone(),
            deltas.deltas.iter().map(|(t, d)| (t.clone(), *d)).collect(),
        )
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|(_, d)| d).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("system,measure,pair,topic,delta\n");
        for (topic, delta) in &self.entries {
            let _ = writeln!(
                out,
                "{},{},{},{topic},{delta}",
                self.system, self.measure, self.pair
            );
        }
        out
    }
}

/// Per-topic `target − base` change of one system between two environments.
pub fn topic_delta_series(
    base: &TopicScoreVector,
    target: &TopicScoreVector,
) -> Result<TopicDeltaSeries> {
    if base.measure() != target.measure() || base.run_tag() != target.run_tag() {
        return Err(Error::data("series vectors must share system and measure"));
    }
    let (tb, tt) = (base.topics(), target.topics());
    if tb != tt {
        let diff = tb.symmetric_difference(&tt);
        let diff: Vec<&str> = diff.iter().collect();
        return Err(Error::data(format!(
            "topic sets differ in: {}",
            diff.join(", ")
        )));
    }
    let entries = target
        .scores()
        .iter()
        .map(|(t, s)| (t.clone(), s - base.scores()[t]))
        .collect();
    Ok(TopicDeltaSeries::sorted(
        base.run_tag().to_string(),
        base.measure(),
        EePair::new(base.ee_label(), target.ee_label())?,
        entries,
    ))
}
