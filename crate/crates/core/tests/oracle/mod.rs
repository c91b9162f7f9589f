//! Slow, literal re-implementations used as test oracles, plus random
//! fixture generators. Nothing here calls into the library's measure or
//! persistence code.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

pub type Judged = HashMap<String, u8>;

/// A random topic: unsorted (doc, score) pairs and judgments.
#[derive(Debug, Clone)]
pub struct SyntheticTopic {
    pub retrieved: Vec<(String, f64)>,
    pub judged: Judged,
}

/// Ranking of 1..=`max_len` docs, up to `max_judged` judgments with grades
/// 0..=2. Scores are coarse so ties occur.
pub fn synthetic_topic<R: Rng>(rng: &mut R, max_len: usize, max_judged: usize) -> SyntheticTopic {
    let pool: Vec<String> = (0..80).map(|i| format!("d{i:02}")).collect();
    let len = rng.gen_range(1..=max_len);
    let mut docs: Vec<&String> = Vec::new();
    while docs.len() < len {
        let d = &pool[rng.gen_range(0..pool.len())];
        if !docs.contains(&d) {
            docs.push(d);
        }
    }
    let retrieved = docs
        .into_iter()
        .map(|d| (d.clone(), f64::from(rng.gen_range(0..25)) / 4.0))
        .collect();
    let n_judged = rng.gen_range(0..=max_judged);
    let mut judged = Judged::new();
    while judged.len() < n_judged {
        let d = &pool[rng.gen_range(0..pool.len())];
        judged.insert(d.clone(), rng.gen_range(0..=2));
    }
    SyntheticTopic { retrieved, judged }
}

/// Score descending, ties by doc id descending.
pub fn rank(retrieved: &[(String, f64)]) -> Vec<String> {
    let mut v = retrieved.to_vec();
    v.sort_by(|a, b| match b.1.partial_cmp(&a.1).unwrap() {
        Ordering::Equal => b.0.cmp(&a.0),
        o => o,
    });
    v.into_iter().map(|(d, _)| d).collect()
}

fn grade(judged: &Judged, doc: &str) -> u8 {
    *judged.get(doc).unwrap_or(&0)
}

pub fn precision_at(ranking: &[String], judged: &Judged, k: usize) -> f64 {
    let mut hits = 0;
    for (i, doc) in ranking.iter().enumerate() {
        if i < k && grade(judged, doc) > 0 {
            hits += 1;
        }
    }
    hits as f64 / k as f64
}

pub fn ndcg(ranking: &[String], judged: &Judged) -> f64 {
    let dcg_of = |gains: &[u8]| -> f64 {
        gains
            .iter()
            .enumerate()
            .map(|(i, &g)| g as f64 * std::f64::consts::LN_2 / ((i + 2) as f64).ln())
            .sum()
    };
    let mut ideal: Vec<u8> = judged.values().copied().collect();
    ideal.sort();
    ideal.reverse();
    let idcg = dcg_of(&ideal);
    if idcg == 0.0 {
        return 0.0;
    }
    let gains: Vec<u8> = ranking.iter().map(|d| grade(judged, d)).collect();
    dcg_of(&gains) / idcg
}

pub fn bpref(ranking: &[String], judged: &Judged) -> f64 {
    let r = judged.values().filter(|&&g| g > 0).count();
    let n = judged.values().filter(|&&g| g == 0).count();
    if r == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for (i, doc) in ranking.iter().enumerate() {
        if grade(judged, doc) == 0 {
            continue;
        }
        // count judged non-relevant documents strictly above position i
        let above = ranking[..i]
            .iter()
            .filter(|d| judged.get(d.as_str()) == Some(&0))
            .count();
        let denom = r.min(n);
        total += if denom == 0 {
            1.0
        } else {
            1.0 - (above.min(r) as f64 / denom as f64).min(1.0)
        };
    }
    total / r as f64
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[derive(Debug, Clone, Copy)]
pub struct OracleCell {
    pub result_delta: f64,
    pub ri_base: f64,
    pub ri_target: f64,
    pub delta_ri: f64,
    pub effect_ratio: f64,
}

/// Persistence quantities straight from their definitions.
pub fn cell(
    sys_base: &[f64],
    sys_target: &[f64],
    piv_base: &[f64],
    piv_target: &[f64],
) -> OracleCell {
    let (sb, st, pb, pt) = (
        mean(sys_base),
        mean(sys_target),
        mean(piv_base),
        mean(piv_target),
    );
    let ri_base = (sb - pb) / pb;
    let ri_target = (st - pt) / pt;
    let d_base: Vec<f64> = sys_base.iter().zip(piv_base).map(|(s, p)| s - p).collect();
    let d_target: Vec<f64> = sys_target
        .iter()
        .zip(piv_target)
        .map(|(s, p)| s - p)
        .collect();
    OracleCell {
        result_delta: (sb - st) / sb,
        ri_base,
        ri_target,
        delta_ri: ri_base - ri_target,
        effect_ratio: mean(&d_target) / mean(&d_base),
    }
}

/// Two-sided pooled-variance t-test: (t, df, p).
pub fn pooled_t_test(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let ss = |xs: &[f64], m: f64| xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    let df = na + nb - 2.0;
    let sp2 = (ss(a, ma) + ss(b, mb)) / df;
    let t = (ma - mb) / (sp2 * (1.0 / na + 1.0 / nb)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).unwrap();
    (t, df, 2.0 * dist.cdf(-t.abs()))
}

/// Welch's t-test: (t, df, p).
pub fn welch_t_test(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let var = |xs: &[f64], m: f64| {
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
    };
    let (va, vb) = (var(a, ma) / na, var(b, mb) / nb);
    let t = (ma - mb) / (va + vb).sqrt();
    let df = (va + vb).powi(2) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).unwrap();
    (t, df, 2.0 * dist.cdf(-t.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiffCounts {
    pub added: usize,
    pub removed: usize,
    pub changed: usize,
    pub unchanged: usize,
}

/// Corpus diff by set algebra on the URL key sets.
pub fn diff_counts(a: &BTreeMap<String, u64>, b: &BTreeMap<String, u64>) -> DiffCounts {
    let ka: BTreeSet<&String> = a.keys().collect();
    let kb: BTreeSet<&String> = b.keys().collect();
    let both: Vec<&&String> = ka.intersection(&kb).collect();
    DiffCounts {
        added: kb.difference(&ka).count(),
        removed: ka.difference(&kb).count(),
        changed: both.iter().filter(|u| a[***u] != b[***u]).count(),
        unchanged: both.iter().filter(|u| a[***u] == b[***u]).count(),
    }
}

/// A corpus manifest of `n` docs and a drifted copy: some removed, some
/// length-changed, some new.
pub fn drifted_manifests<R: Rng>(
    rng: &mut R,
    n: usize,
) -> (BTreeMap<String, u64>, BTreeMap<String, u64>) {
    let a: BTreeMap<String, u64> = (0..n)
        .map(|i| {
            (
                format!("https://example.org/{i:04}"),
                rng.gen_range(100..5000),
            )
        })
        .collect();
    let mut b = BTreeMap::new();
    for (url, &len) in &a {
        match rng.gen_range(0..10) {
            0 | 1 => {}
            2 | 3 => {
                b.insert(url.clone(), len + rng.gen_range(1..50));
            }
            _ => {
                b.insert(url.clone(), len);
            }
        }
    }
    for i in 0..rng.gen_range(0..n / 4 + 1) {
        b.insert(
            format!("https://example.org/new/{i:04}"),
            rng.gen_range(100..5000),
        );
    }
    (a, b)
}
