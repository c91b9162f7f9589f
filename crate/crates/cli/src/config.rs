//! Persistence job manifest (JSON) and its validated form.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use persist_eval_core::measures::MeasureId;
use persist_eval_core::persistence::EePair;
use persist_eval_core::report::{SeriesMode, DEFAULT_ER_EXCLUSION};
use persist_eval_core::stats::TTestVariant;
use persist_eval_core::Error;

use crate::{CliError, CliResult};

pub const DEFAULT_MEASURES: [&str; 3] = ["p@10", "bpref", "ndcg"];

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    pub label: String,
    pub qrels: PathBuf,
    #[serde(default)]
    pub topics: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub tag: String,
    pub ee: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobOptions {
    #[serde(default)]
    pub t_test: Option<String>,
    #[serde(default)]
    pub er_exclude: Option<f64>,
    #[serde(default)]
    pub strict_topics: Option<bool>,
    #[serde(default)]
    pub series: Option<SeriesMode>,
}

/// The manifest as written by the user. Relative paths resolve against the
/// manifest's directory.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub environments: Vec<EnvironmentSpec>,
    pub runs: Vec<RunSpec>,
    pub pivot: String,
    #[serde(default)]
    pub measures: Option<Vec<String>>,
    pub pairs: Vec<String>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub options: JobOptions,
}

/// Command-line values that take precedence over the manifest.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub measures: Option<String>,
    pub pivot: Option<String>,
    pub pairs: Option<String>,
    pub t_test: Option<String>,
    pub er_exclude: Option<f64>,
    pub strict_topics: Option<bool>,
    pub series: Option<SeriesMode>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub label: String,
    pub qrels: PathBuf,
    pub topics: Option<PathBuf>,
}

/// A validated job: every pair references declared environments and every
/// (tag, environment) has at most one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    /// In declaration order, which is also the chronological row order.
    pub environments: Vec<Environment>,
    /// (tag, environment label) → run path.
    pub runs: BTreeMap<(String, String), PathBuf>,
    pub pivot: String,
    pub measures: Vec<MeasureId>,
    pub pairs: Vec<EePair>,
    pub output: Option<PathBuf>,
    pub t_test: TTestVariant,
    pub er_exclude: f64,
    pub strict_topics: bool,
    pub series: SeriesMode,
}

impl JobConfig {
    pub fn load(path: &Path) -> CliResult<(JobConfig, PathBuf)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let config: JobConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            message: format!("{}: {e}", path.display()),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((config, base))
    }

    pub fn resolve(self, base_dir: &Path, overrides: &Overrides) -> CliResult<Job> {
        let resolve_path = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            }
        };

        let mut environments = Vec::new();
        let mut labels = BTreeSet::new();
        for env in &self.environments {
            if env.label.is_empty() || !labels.insert(env.label.clone()) {
                return Err(CliError::usage(format!(
                    "environment label {:?} is empty or declared twice",
                    env.label
                )));
            }
            environments.push(Environment {
                label: env.label.clone(),
                qrels: resolve_path(&env.qrels),
                topics: env.topics.as_deref().map(resolve_path),
            });
        }

        let mut runs = BTreeMap::new();
        for run in &self.runs {
            if !labels.contains(&run.ee) {
                return Err(CliError::usage(format!(
                    "run {} references undeclared environment {}",
                    run.tag, run.ee
                )));
            }
            if runs
                .insert((run.tag.clone(), run.ee.clone()), resolve_path(&run.path))
                .is_some()
            {
                return Err(CliError::usage(format!(
                    "run {} declared twice for environment {}",
                    run.tag, run.ee
                )));
            }
        }

        let measures = match &overrides.measures {
            Some(list) => parse_measures(list)?,
            None => match &self.measures {
                Some(list) => list
                    .iter()
                    .map(|m| {
                        m.parse::<MeasureId>()
                            .map_err(|e| CliError::usage(e.to_string()))
                    })
                    .collect::<CliResult<Vec<_>>>()?,
                None => parse_measures(&DEFAULT_MEASURES.join(","))?,
            },
        };
        if measures.is_empty() {
            return Err(CliError::usage("no measures requested"));
        }
        let mut seen = BTreeSet::new();
        if let Some(m) = measures.iter().find(|m| !seen.insert(**m)) {
            return Err(CliError::usage(format!("measure {m} listed twice")));
        }

        let pairs = match &overrides.pairs {
            Some(list) => parse_pairs(list)?,
            None => self
                .pairs
                .iter()
                .map(|p| {
                    p.parse::<EePair>()
                        .map_err(|e| CliError::usage(e.to_string()))
                })
                .collect::<CliResult<Vec<_>>>()?,
        };
        if pairs.is_empty() {
            return Err(CliError::usage("no environment pairs requested"));
        }
        for pair in &pairs {
            for label in [&pair.base, &pair.target] {
                if !labels.contains(label) {
                    return Err(CliError::usage(format!(
                        "pair {pair} references undeclared environment {label}"
                    )));
                }
            }
        }

        let t_test = match overrides.t_test.as_ref().or(self.options.t_test.as_ref()) {
            Some(v) => v
                .parse::<TTestVariant>()
                .map_err(|e| CliError::usage(e.to_string()))?,
            None => TTestVariant::default(),
        };
        let er_exclude = overrides
            .er_exclude
            .or(self.options.er_exclude)
            .unwrap_or(DEFAULT_ER_EXCLUSION);
        if !(er_exclude.is_finite() && er_exclude > 0.0) {
            return Err(CliError::usage(format!(
                "ER exclusion threshold must be a positive number, got {er_exclude}"
            )));
        }

        Ok(Job {
            environments,
            runs,
            pivot: overrides.pivot.clone().unwrap_or(self.pivot),
            measures,
            pairs,
            output: overrides
                .output
                .clone()
                .or_else(|| self.output.as_deref().map(resolve_path)),
            t_test,
            er_exclude,
            strict_topics: overrides
                .strict_topics
                .or(self.options.strict_topics)
                .unwrap_or(true),
            series: overrides.series.or(self.options.series).unwrap_or_default(),
        })
    }
}

/// Comma-separated measure names, e.g. `p@10,ndcg,bpref`.
pub fn parse_measures(list: &str) -> CliResult<Vec<MeasureId>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<MeasureId>()
                .map_err(|e| CliError::usage(e.to_string()))
        })
        .collect()
}

/// Comma-separated pairs, e.g. `WT:ST,WT:LT`.
pub fn parse_pairs(list: &str) -> CliResult<Vec<EePair>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<EePair>()
                .map_err(|e| CliError::usage(e.to_string()))
        })
        .collect()
}
