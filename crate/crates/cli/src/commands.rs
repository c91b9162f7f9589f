//! The four subcommands. Each returns the files it would write so callers
//! (and tests) decide where they land.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use persist_eval_core::corpus_diff::{diff_collections, CorpusSnapshot, DiffSummary};
use persist_eval_core::measures::{arp, score_run};
use persist_eval_core::persistence::{CellOptions, PairScores};
use persist_eval_core::report::{
    er_dri_points, persistence_table, scatter_csv, topic_delta_series, SeriesMode, TopicDeltaSeries,
};
use persist_eval_core::run_io::{core_topics, read_qrels, read_run, read_topic_list};
use persist_eval_core::{
    Diagnostics, EePair, Error, MeasureId, PersistenceCell, Qrels, Run, TopicSet,
};

use crate::config::Job;
use crate::{file_safe, CliResult, OutputSet};

#[derive(Debug, Clone)]
pub struct ScoreArgs {
    pub run: PathBuf,
    pub qrels: PathBuf,
    pub measures: Vec<MeasureId>,
    pub topics: Option<PathBuf>,
    pub ee: String,
}

#[derive(Debug, Serialize)]
struct ScoreSummary<'a> {
    run: &'a str,
    ee: &'a str,
    n_topics: usize,
    measures: Vec<MeasureSummary<'a>>,
}

#[derive(Debug, Serialize)]
struct MeasureSummary<'a> {
    measure: MeasureId,
    arp: f64,
    scores: &'a BTreeMap<String, f64>,
}

/// Scores one run. Without a topic list the evaluated topics are those
/// present in both the run and the qrels.
pub fn score(args: &ScoreArgs, diag: &mut Diagnostics) -> CliResult<OutputSet> {
    let run = read_run(&args.run, None, diag)?;
    let qrels = read_qrels(&args.qrels, diag)?;
    let topics = match &args.topics {
        Some(path) => read_topic_list(path)?,
        None => run.topics().intersection(&qrels.topics()),
    };
    if topics.is_empty() {
        return Err(Error::Data(format!("run {} and its qrels share no topics", run.tag())).into());
    }

    let vectors = args
        .measures
        .iter()
        .map(|&m| score_run(&run, &qrels, m, &topics, &args.ee))
        .collect::<persist_eval_core::Result<Vec<_>>>()?;

    let mut out = OutputSet::default();
    let stem = file_safe(run.tag());
    for v in &vectors {
        let mut text = v.to_text();
        let _ = writeln!(text, "all\t{}\t{:.6}", v.measure().name(), arp(v).value);
        out.add(format!("{stem}.{}.tsv", v.measure().file_stem()), text);
    }
    let summary = ScoreSummary {
        run: run.tag(),
        ee: &args.ee,
        n_topics: topics.len(),
        measures: vectors
            .iter()
            .map(|v| MeasureSummary {
                measure: v.measure(),
                arp: arp(v).value,
                scores: v.scores(),
            })
            .collect(),
    };
    out.add(format!("{stem}.scores.json"), to_json(&summary));
    Ok(out)
}

/// Structured cell file written by `persist` and read back by `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellsFile {
    pub pivot: String,
    pub environments: Vec<String>,
    pub cells: Vec<PersistenceCell>,
}

#[derive(Debug)]
pub struct PersistOutcome {
    pub cells: CellsFile,
    pub outputs: OutputSet,
}

struct LoadedEnvironment {
    qrels: Qrels,
    topics: TopicSet,
}

/// Runs a persistence job: one cell per (system other than the pivot,
/// pair, measure), followed by the report artifacts.
pub fn persist(job: &Job, diag: &mut Diagnostics) -> CliResult<PersistOutcome> {
    let mut envs: BTreeMap<&str, LoadedEnvironment> = BTreeMap::new();
    for env in &job.environments {
        let qrels = read_qrels(&env.qrels, diag)?;
        let topics = match &env.topics {
            Some(path) => read_topic_list(path)?,
            None => qrels.topics(),
        };
        envs.insert(&env.label, LoadedEnvironment { qrels, topics });
    }

    let core = if job.strict_topics {
        let sets: Vec<TopicSet> = job
            .environments
            .iter()
            .map(|e| envs[e.label.as_str()].topics.clone())
            .collect();
        let core = core_topics(&sets, diag)?;
        if core.is_empty() {
            return Err(Error::Data("the declared environments share no topics".into()).into());
        }
        log::info!(
            "{} core topics across {} environments",
            core.len(),
            sets.len()
        );
        Some(core)
    } else {
        None
    };
    let topics_of = |label: &str| -> &TopicSet { core.as_ref().unwrap_or(&envs[label].topics) };

    let mut runs: BTreeMap<(String, String), Run> = BTreeMap::new();
    for (key, path) in &job.runs {
        runs.insert(key.clone(), read_run(path, Some(&key.0), diag)?);
    }
    let run_for = |tag: &str, ee: &str| lookup_run(&runs, tag, ee);

    for pair in &job.pairs {
        run_for(&job.pivot, &pair.base)?;
        run_for(&job.pivot, &pair.target)?;
    }

    let mut systems: Vec<&str> = job
        .runs
        .keys()
        .map(|(tag, _)| tag.as_str())
        .filter(|tag| *tag != job.pivot)
        .collect();
    systems.dedup();
    if systems.is_empty() {
        return Err(Error::Data(format!("no systems besides the pivot {}", job.pivot)).into());
    }

    let options = CellOptions {
        t_test: job.t_test,
        strict_topics: job.strict_topics,
        allow_self_pivot: false,
    };
    let mut cells = Vec::new();
    let mut series = Vec::new();
    for system in &systems {
        for pair in &job.pairs {
            let system_runs = (run_for(system, &pair.base)?, run_for(system, &pair.target)?);
            let pivot_runs = (
                run_for(&job.pivot, &pair.base)?,
                run_for(&job.pivot, &pair.target)?,
            );
            let qrels = (
                &envs[pair.base.as_str()].qrels,
                &envs[pair.target.as_str()].qrels,
            );
            for &measure in &job.measures {
                let scores = PairScores::score(
                    system_runs,
                    pivot_runs,
                    qrels,
                    measure,
                    topics_of(&pair.base),
                    topics_of(&pair.target),
                    pair,
                )?;
                cells.push(PersistenceCell::from_scores(&scores, pair, &options)?);
                if let Some(s) = delta_series(&scores, pair, job.series)? {
                    series.push(s);
                }
            }
        }
    }

    let cells = CellsFile {
        pivot: job.pivot.clone(),
        environments: job.environments.iter().map(|e| e.label.clone()).collect(),
        cells,
    };
    let mut outputs = render_report(&cells, job.er_exclude)?;
    outputs.add("cells.json", to_json(&cells));
    for s in &series {
        outputs.add(series_path(s), s.to_csv());
    }
    Ok(PersistOutcome { cells, outputs })
}

fn lookup_run<'r>(
    runs: &'r BTreeMap<(String, String), Run>,
    tag: &str,
    ee: &str,
) -> CliResult<&'r Run> {
    runs.get(&(tag.to_string(), ee.to_string()))
        .ok_or_else(|| Error::Data(format!("no run for {tag} in environment {ee}")).into())
}

fn delta_series(
    scores: &PairScores,
    pair: &EePair,
    mode: SeriesMode,
) -> CliResult<Option<TopicDeltaSeries>> {
    Ok(match mode {
        SeriesMode::CrossEe => {
            // Cross-EE series need one topic set on both sides.
            if scores.system_base.topics() == scores.system_target.topics() {
                Some(topic_delta_series(
                    &scores.system_base,
                    &scores.system_target,
                )?)
            } else {
                log::warn!(
                    "skipping series for {} on {pair}: topic sets differ",
                    scores.system_base.run_tag()
                );
                None
            }
        }
        SeriesMode::PivotDelta => {
            let deltas = persist_eval_core::persistence::topic_deltas(
                &scores.system_target,
                &scores.pivot_target,
            )?;
            Some(TopicDeltaSeries::from_pivot_deltas(
                scores.system_target.run_tag(),
                pair,
                &deltas,
            ))
        }
    })
}

pub fn series_path(s: &TopicDeltaSeries) -> PathBuf {
    Path::new("series").join(format!(
        "{}__{}__{}.csv",
        file_safe(&s.system),
        s.measure.file_stem(),
        file_safe(&s.pair.file_stem())
    ))
}

/// Table renderings and scatter data for a set of cells.
pub fn render_report(cells: &CellsFile, er_exclude: f64) -> CliResult<OutputSet> {
    let table = persistence_table(&cells.cells, &cells.environments)?;
    let mut out = OutputSet::default();
    out.add("table.txt", table.to_text());
    out.add("table.csv", table.to_csv()?);
    out.add("table.json", to_json(&table));
    out.add(
        "scatter.csv",
        scatter_csv(&er_dri_points(&cells.cells, er_exclude)),
    );
    Ok(out)
}

/// Re-renders report artifacts from a `cells.json` file.
pub fn report(cells_path: &Path, er_exclude: f64) -> CliResult<OutputSet> {
    let text = std::fs::read_to_string(cells_path).map_err(|source| Error::Io {
        path: cells_path.to_path_buf(),
        source,
    })?;
    let cells: CellsFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("{}: {e}", cells_path.display()),
    })?;
    render_report(&cells, er_exclude)
}

/// Compares two corpus snapshots, given as manifests or as directories.
pub fn corpus_diff(a: &Path, b: &Path, from_dirs: bool) -> CliResult<DiffSummary> {
    let load = |p: &Path| {
        if from_dirs {
            CorpusSnapshot::from_directory(p)
        } else {
            CorpusSnapshot::read_manifest(p)
        }
    };
    Ok(diff_collections(&load(a)?, &load(b)?))
}

pub fn corpus_diff_outputs(summary: &DiffSummary, verbose: bool) -> OutputSet {
    let mut out = OutputSet::default();
    out.add("corpus_diff.tsv", summary.to_text(verbose));
    out.add("corpus_diff.json", to_json(summary));
    out
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}
