//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so every line is printed regardless of outcome.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[path = "../../core/tests/oracle/mod.rs"]
mod oracle;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use persist_eval::commands;
use persist_eval::config::{JobConfig, Overrides};
use persist_eval_core::corpus_diff::{diff_collections, CorpusSnapshot};
use persist_eval_core::measures::score_run;
use persist_eval_core::persistence::{
    delta_ri, effect_ratio, relative_improvement, result_delta, topic_deltas, CellOptions,
    PairScores,
};
use persist_eval_core::report::topic_delta_series;
use persist_eval_core::run_io::ScoredDoc;
use persist_eval_core::stats::{student_t_cdf, t_test_unpaired};
use persist_eval_core::{
    ArpValue, Diagnostics, EePair, Grade, MeasureId, PersistenceCell, Qrels, Quantity, Run,
    TTestVariant, TopicScoreVector, TopicSet,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../cli/tests/fixtures/two_ee")
}

// 1 ----------------------------------------------------------------------

fn measure_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let topics: Vec<_> = (0..50)
        .map(|_| oracle::synthetic_topic(&mut rng, 50, 20))
        .collect();

    let mut rankings = BTreeMap::new();
    let mut qrels = Qrels::new();
    for (i, t) in topics.iter().enumerate() {
        let id = format!("t{i:02}");
        rankings.insert(
            id.clone(),
            t.retrieved
                .iter()
                .map(|(d, s)| ScoredDoc::new(d.clone(), *s))
                .collect(),
        );
        for (d, g) in &t.judged {
            qrels
                .insert(id.clone(), d.clone(), Grade::try_from(*g).unwrap())
                .unwrap();
        }
    }
    let run = Run::new("synthetic", rankings).map_err(|e| e.to_string())?;
    let ids: TopicSet = (0..50).map(|i| format!("t{i:02}")).collect();

    let mut worst = 0.0f64;
    for (measure, reference) in [
        (
            MeasureId::P_AT_10,
            (|r: &[String], j: &oracle::Judged| oracle::precision_at(r, j, 10))
                as fn(&[String], &oracle::Judged) -> f64,
        ),
        (MeasureId::NDCG, oracle::ndcg),
        (MeasureId::BPREF, oracle::bpref),
    ] {
        let v = score_run(&run, &qrels, measure, &ids, "EE").map_err(|e| e.to_string())?;
        for (i, t) in topics.iter().enumerate() {
            let want = reference(&oracle::rank(&t.retrieved), &t.judged);
            let got = v.get(&format!("t{i:02}")).unwrap();
            worst = worst.max((got - want).abs());
        }
    }
    let elapsed = start.elapsed();
    ensure!(worst <= 1e-9, "max deviation {worst:e}");
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!(
        "150 topic scores, max deviation {worst:e}, {elapsed:.2?}"
    ))
}

// 2, 3 -------------------------------------------------------------------

/// A table row for one environment: (ARP, RΔ, ΔRI) for P@10, bpref, nDCG.
/// ΔRI is absent for the pivot.
type PrintedRow = [(f64, f64, Option<f64>); 3];

struct PrintedSystem {
    name: &'static str,
    wt: PrintedRow,
    st: PrintedRow,
    lt: PrintedRow,
}

const MEASURES: [&str; 3] = ["P@10", "bpref", "nDCG"];

#[rustfmt::skip]
const PRINTED: [PrintedSystem; 6] = [
    PrintedSystem {
        name: "BM25",
        wt: [(0.095, 0.0, None), (0.314, 0.0, None), (0.269, 0.0, None)],
        st: [(0.089, 0.064, None), (0.314, -0.002, None), (0.272, -0.010, None)],
        lt: [(0.110, -0.165, None), (0.324, -0.033, None), (0.306, -0.137, None)],
    },
    PrintedSystem {
        name: "colBERT",
        wt: [(0.097, 0.0, Some(0.0)), (0.324, 0.0, Some(0.0)), (0.276, 0.0, Some(0.0))],
        st: [(0.094, 0.028, Some(-0.040)), (0.317, 0.022, Some(0.024)), (0.275, 0.004, Some(0.015))],
        lt: [(0.120, -0.238, Some(-0.064)), (0.338, -0.041, Some(-0.008)), (0.297, -0.078, Some(0.053))],
    },
    PrintedSystem {
        name: "monoT5",
        wt: [(0.106, 0.0, Some(0.0)), (0.337, 0.0, Some(0.0)), (0.295, 0.0, Some(0.0))],
        st: [(0.109, -0.028, Some(-0.110)), (0.344, -0.019, Some(-0.019)), (0.302, -0.023, Some(-0.013))],
        lt: [(0.123, -0.165, Some(0.000)), (0.337, 0.000, Some(0.034)), (0.311, -0.051, Some(0.083))],
    },
    PrintedSystem {
        name: "RRF",
        wt: [(0.101, 0.0, Some(0.0)), (0.346, 0.0, Some(0.0)), (0.285, 0.0, Some(0.0))],
        st: [(0.090, 0.110, Some(0.052)), (0.328, 0.054, Some(0.032)), (0.282, 0.009, Some(0.003))],
        lt: [(0.121, -0.192, Some(-0.025)), (0.347, -0.004, Some(0.002)), (0.314, -0.105, Some(0.013))],
    },
    PrintedSystem {
        name: "d2q",
        wt: [(0.106, 0.0, Some(0.0)), (0.335, 0.0, Some(0.0)), (0.285, 0.0, Some(0.0))],
        st: [(0.104, 0.018, Some(-0.056)), (0.331, 0.013, Some(0.015)), (0.287, -0.005, Some(0.006))],
        lt: [(0.123, -0.165, Some(0.000)), (0.368, -0.098, Some(-0.067)), (0.327, -0.147, Some(-0.010))],
    },
    PrintedSystem {
        name: "E5",
        wt: [(0.096, 0.0, Some(0.0)), (0.368, 0.0, Some(0.0)), (0.290, 0.0, Some(0.0))],
        st: [(0.092, 0.038, Some(-0.029)), (0.354, 0.037, Some(0.045)), (0.300, -0.034, Some(-0.025))],
        lt: [(0.123, -0.291, Some(-0.109)), (0.371, -0.008, Some(0.028)), (0.313, -0.080, Some(0.054))],
    },
];

fn arp(v: f64) -> ArpValue {
    ArpValue::from_mean(v, 124).unwrap()
}

fn value(q: Quantity) -> f64 {
    q.value().expect("printed ARPs are nonzero")
}

fn printed_result_delta() -> Outcome {
    let mut checked = 0;
    let mut failures = Vec::new();
    for sys in &PRINTED {
        for (ee, row) in [("ST", &sys.st), ("LT", &sys.lt)] {
            for m in 0..3 {
                let got = value(result_delta(&arp(sys.wt[m].0), &arp(row[m].0)));
                checked += 1;
                if (got - row[m].1).abs() > 0.015 {
                    failures.push(format!(
                        "{} {ee} {}: {got:.4} vs {}",
                        sys.name, MEASURES[m], row[m].1
                    ));
                }
            }
        }
    }
    ensure!(
        checked == 36 && failures.is_empty(),
        "{}",
        failures.join("; ")
    );
    Ok(format!("{checked}/36 cells within ±0.015"))
}

const ANOMALY: (&str, &str, usize) = ("RRF", "LT", 1);

fn printed_delta_ri() -> Outcome {
    let pivot = &PRINTED[0];
    let mut checked = 0;
    let mut failures = Vec::new();
    let mut anomaly = None;
    for sys in &PRINTED[1..] {
        for (ee, row, piv) in [("ST", &sys.st, &pivot.st), ("LT", &sys.lt, &pivot.lt)] {
            for m in 0..3 {
                let ri_base = relative_improvement(&arp(sys.wt[m].0), &arp(pivot.wt[m].0));
                let ri_target = relative_improvement(&arp(row[m].0), &arp(piv[m].0));
                let got = value(delta_ri(ri_base, ri_target));
                let printed = row[m].2.unwrap();
                let deviation = (got - printed).abs();
                if (sys.name, ee, m) == ANOMALY {
                    anomaly = Some((got, printed, deviation));
                    continue;
                }
                checked += 1;
                if deviation > 0.02 {
                    failures.push(format!(
                        "{} {ee} {}: ARP-implied {got:.4} vs printed {printed} (off by {deviation:.4})",
                        sys.name, MEASURES[m]
                    ));
                }
            }
        }
    }
    let (got, printed, deviation) = anomaly.expect("anomaly cell present");
    let anomaly_note = format!("flagged RRF bpref LT: ARP-implied {got:.3} vs printed {printed}");
    ensure!(
        deviation > 0.02,
        "RRF bpref LT anomaly no longer deviates ({got:.4})"
    );
    ensure!(
        failures.is_empty(),
        "{}/{checked} cells outside ±0.02: {}; {anomaly_note}",
        failures.len(),
        failures.join("; ")
    );
    Ok(format!(
        "{checked}/{checked} cells within ±0.02; {anomaly_note}"
    ))
}

// 4 ----------------------------------------------------------------------

fn load_job(pairs: Option<&str>) -> persist_eval::config::Job {
    let (config, base) = JobConfig::load(&fixture().join("config.json")).unwrap();
    let overrides = Overrides {
        pairs: pairs.map(String::from),
        ..Default::default()
    };
    config.resolve(&base, &overrides).unwrap()
}

fn is_ideal(c: &PersistenceCell) -> bool {
    c.result_delta == Quantity::Defined(0.0)
        && c.delta_ri == Quantity::Defined(0.0)
        && c.effect_ratio == Quantity::Defined(1.0)
        && c.t_test.p_value == 1.0
}

fn self_replication() -> Outcome {
    let job = load_job(Some("WT:WT,ST:ST"));
    let outcome = commands::persist(&job, &mut Diagnostics::new()).map_err(|e| e.to_string())?;
    let cells = &outcome.cells.cells;
    ensure!(cells.len() == 12, "expected 12 cells, got {}", cells.len());
    if let Some(c) = cells.iter().find(|c| !is_ideal(c)) {
        return Err(format!(
            "{} {} {} not ideal: {c:?}",
            c.system_tag, c.measure, c.pair
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut synthetic = 0;
    for _ in 0..200 {
        let n = rng.gen_range(2..60);
        let sys: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let piv: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..=1.0)).collect();
        if sys.iter().zip(&piv).map(|(s, p)| s - p).sum::<f64>() == 0.0 {
            continue;
        }
        let pair = EePair::new("WT", "WT").unwrap();
        let scores = PairScores {
            system_base: vector("sys", "WT", &sys),
            system_target: vector("sys", "WT", &sys),
            pivot_base: vector("piv", "WT", &piv),
            pivot_target: vector("piv", "WT", &piv),
        };
        let c = PersistenceCell::from_scores(&scores, &pair, &CellOptions::default())
            .map_err(|e| e.to_string())?;
        ensure!(is_ideal(&c), "synthetic case not ideal: {c:?}");
        synthetic += 1;
    }
    Ok(format!(
        "12 fixture cells and {synthetic} synthetic cells exactly ideal"
    ))
}

// 5 ----------------------------------------------------------------------

fn vector(tag: &str, ee: &str, scores: &[f64]) -> TopicScoreVector {
    let map: BTreeMap<String, f64> = scores
        .iter()
        .enumerate()
        .map(|(i, s)| (format!("q{i:03}"), *s))
        .collect();
    TopicScoreVector::new(MeasureId::NDCG, tag, ee, map).unwrap()
}

fn effect_ratio_laws() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut cases = 0;
    for _ in 0..100 {
        let n = rng.gen_range(3..50);
        let piv_base: Vec<f64> = (0..n).map(|_| rng.gen_range(0.3..0.7)).collect();
        let piv_target: Vec<f64> = (0..n).map(|_| rng.gen_range(0.3..0.7)).collect();
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.05..0.15)).collect();
        let mean_d = d.iter().sum::<f64>() / n as f64;
        if mean_d.abs() < 1e-3 {
            continue;
        }
        let shifted =
            |p: &[f64], c: f64| -> Vec<f64> { p.iter().zip(&d).map(|(p, d)| p + c * d).collect() };
        let base = topic_deltas(
            &vector("s", "WT", &shifted(&piv_base, 1.0)),
            &vector("p", "WT", &piv_base),
        )
        .map_err(|e| e.to_string())?;

        // identical per-topic deltas in both environments
        let same = base.clone();
        let er = effect_ratio(&same, &base).map_err(|e| e.to_string())?;
        ensure!(er == Quantity::Defined(1.0), "identical deltas gave {er:?}");

        for c in [0.5, 2.0, -1.0] {
            let er = value(effect_ratio(&base.scaled(c), &base).map_err(|e| e.to_string())?);
            ensure!((er - c).abs() <= 1e-12, "scaled by {c}: ER {er}");

            // the same law through score vectors in a different environment
            let target = topic_deltas(
                &vector("s", "LT", &shifted(&piv_target, c)),
                &vector("p", "LT", &piv_target),
            )
            .map_err(|e| e.to_string())?;
            let er = value(effect_ratio(&target, &base).map_err(|e| e.to_string())?);
            ensure!((er - c).abs() <= 1e-12, "scores shifted by {c}·Δ: ER {er}");
        }
        cases += 1;
    }
    Ok(format!(
        "{cases} delta vectors, ER scales by c ∈ {{0.5, 2, -1}} to 1e-12"
    ))
}

// 6 ----------------------------------------------------------------------

fn t_test_reference() -> Outcome {
    let r = t_test_unpaired(
        &[1.0, 2.0, 3.0],
        &[4.0, 5.0, 6.0],
        TTestVariant::StudentPooled,
    )
    .map_err(|e| e.to_string())?;
    ensure!((r.p_value - 0.02131).abs() <= 1e-4, "p = {}", r.p_value);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x = rng.gen_range(-12.0..12.0);
        let df = rng.gen_range(1.0..250.0);
        worst = worst.max((student_t_cdf(-x, df) + student_t_cdf(x, df) - 1.0).abs());
    }
    ensure!(worst <= 1e-10, "CDF symmetry off by {worst:e}");
    Ok(format!(
        "p = {:.6}, CDF symmetry max error {worst:e}",
        r.p_value
    ))
}

// 7 ----------------------------------------------------------------------

fn read_tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn end_to_end_determinism() -> Outcome {
    let start = Instant::now();
    let job = load_job(None);
    let mut trees = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let outcome =
            commands::persist(&job, &mut Diagnostics::new()).map_err(|e| e.to_string())?;
        outcome
            .outputs
            .write_to(dir.path())
            .map_err(|e| e.to_string())?;
        trees.push(read_tree(dir.path()));
    }
    ensure!(trees[0] == trees[1], "two runs differ");
    let golden = read_tree(&fixture().join("golden"));
    let names = |t: &BTreeMap<PathBuf, Vec<u8>>| t.keys().cloned().collect::<Vec<_>>();
    ensure!(
        names(&trees[0]) == names(&golden),
        "file sets differ: {:?} vs {:?}",
        names(&trees[0]),
        names(&golden)
    );
    if let Some((path, _)) = trees[0].iter().find(|(p, bytes)| golden[*p] != **bytes) {
        return Err(format!("{} differs from golden copy", path.display()));
    }
    let cells = trees[0].get(Path::new("cells.json")).unwrap();
    let parsed: commands::CellsFile = serde_json::from_slice(cells).unwrap();
    ensure!(parsed.cells.len() == 6, "expected 6 cells");
    Ok(format!(
        "{} files byte-identical across runs and to golden, {:.2?}",
        golden.len(),
        start.elapsed()
    ))
}

// 8 ----------------------------------------------------------------------

fn corpus_diff_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (a, b) = oracle::drifted_manifests(&mut rng, 200);
    let text = |m: &BTreeMap<String, u64>| {
        m.iter()
            .map(|(u, l)| format!("{u}\t{l}\n"))
            .collect::<String>()
    };
    let sa = CorpusSnapshot::parse_manifest("a", &text(&a)).map_err(|e| e.to_string())?;
    let sb = CorpusSnapshot::parse_manifest("b", &text(&b)).map_err(|e| e.to_string())?;
    let got = diff_collections(&sa, &sb);
    let want = oracle::diff_counts(&a, &b);
    let got_counts = (got.added, got.removed, got.changed, got.unchanged);
    let want_counts = (want.added, want.removed, want.changed, want.unchanged);
    ensure!(
        got_counts == want_counts,
        "{got_counts:?} vs oracle {want_counts:?}"
    );
    let same = diff_collections(&sa, &sa);
    ensure!(
        (same.added, same.removed, same.changed, same.unchanged) == (0, 0, 0, 200),
        "diff(a, a) = {same:?}"
    );
    Ok(format!(
        "added {} removed {} changed {} unchanged {} match oracle; diff(a, a) all unchanged",
        got.added, got.removed, got.changed, got.unchanged
    ))
}

// 9 ----------------------------------------------------------------------

fn series_property() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..300 {
        let n = rng.gen_range(1..130);
        let base: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let target: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let s = topic_delta_series(&vector("s", "WT", &base), &vector("s", "ST", &target))
            .map_err(|e| e.to_string())?;
        let expect = n as f64 * (oracle::mean(&target) - oracle::mean(&base));
        worst = worst.max((s.sum() - expect).abs());
        ensure!(s.entries.len() == n, "series length {}", s.entries.len());
        ensure!(
            s.entries.windows(2).all(|w| w[0].1 >= w[1].1),
            "series not sorted"
        );
    }

    // the fixture's series against its own cell ARPs
    let outcome =
        commands::persist(&load_job(None), &mut Diagnostics::new()).map_err(|e| e.to_string())?;
    for cell in &outcome.cells.cells {
        let path = PathBuf::from("series").join(format!(
            "{}__{}__{}.csv",
            cell.system_tag,
            cell.measure.file_stem(),
            cell.pair.file_stem()
        ));
        let csv = outcome
            .outputs
            .get(&path)
            .ok_or_else(|| format!("missing {}", path.display()))?;
        let deltas: Vec<f64> = csv
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
            .collect();
        let expect = cell.arp_base.n_topics as f64 * (cell.arp_target.value - cell.arp_base.value);
        worst = worst.max((deltas.iter().sum::<f64>() - expect).abs());
        ensure!(
            deltas.windows(2).all(|w| w[0] >= w[1]),
            "{} not sorted",
            path.display()
        );
    }
    ensure!(worst <= 1e-9, "series sum off by {worst:e}");
    Ok(format!(
        "300 random + 6 fixture series non-increasing, sum error {worst:e}"
    ))
}

fn main() {
    let start = Instant::now();
    let criteria: [Criterion; 9] = [
        ("measure-oracle equivalence", measure_oracle),
        ("printed-table result delta", printed_result_delta),
        ("printed-table delta RI", printed_delta_ri),
        ("self-replication identity", self_replication),
        ("effect ratio laws", effect_ratio_laws),
        ("t-test reference", t_test_reference),
        ("end-to-end determinism", end_to_end_determinism),
        ("corpus-diff exactness", corpus_diff_exactness),
        ("sorted series property", series_property),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.2?}",
        criteria.len() - failed,
        start.elapsed()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
