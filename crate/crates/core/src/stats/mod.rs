//! Descriptive statistics and the unpaired two-sample t-test used to compare
//! topic score distributions.

mod special;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use special::{ln_gamma, regularized_incomplete_beta, student_t_cdf, student_t_two_sided_p};

use crate::{Error, Result};

/// Running mean and sum of squared deviations (Welford). Constant samples
/// yield their value as mean and exactly zero variance.
fn welford(sample: &[f64]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in sample.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    (mean, m2)
}

pub fn mean(sample: &[f64]) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::data("mean of an empty sample"));
    }
    Ok(welford(sample).0)
}

/// Unbiased (n − 1) sample variance.
pub fn variance(sample: &[f64]) -> Result<f64> {
    if sample.len() < 2 {
        return Err(Error::data(format!(
            "variance needs at least 2 values, got {}",
            sample.len()
        )));
    }
    Ok(welford(sample).1 / (sample.len() - 1) as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TTestVariant {
    /// Pooled variance, df = n_a + n_b − 2.
    #[default]
    StudentPooled,
    /// Separate variances, Welch–Satterthwaite df.
    Welch,
}

impl fmt::Display for TTestVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TTestVariant::StudentPooled => "student",
            TTestVariant::Welch => "welch",
        })
    }
}

impl FromStr for TTestVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "student" | "student_pooled" | "pooled" => Ok(TTestVariant::StudentPooled),
            "welch" => Ok(TTestVariant::Welch),
            other => Err(Error::data(format!("unknown t-test variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    /// ±∞ when both samples are constant with different values.
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    /// Two-sided.
    pub p_value: f64,
    pub variant: TTestVariant,
    /// Both samples have zero variance.
    pub degenerate_variance: bool,
}

/// Two-sided unpaired t-test of `a` against `b`.
///
/// When both samples have zero variance the statistic is undefined: equal
/// means give t = 0, p = 1, different means give t = ±∞, p = 0. Both cases
/// set `degenerate_variance`.
pub fn t_test_unpaired(a: &[f64], b: &[f64], variant: TTestVariant) -> Result<TTestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::data(format!(
            "t-test needs at least 2 values per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mean_a, m2_a) = welford(a);
    let (mean_b, m2_b) = welford(b);
    let (var_a, var_b) = (m2_a / (na - 1.0), m2_b / (nb - 1.0));
    let diff = mean_a - mean_b;

    let (se2, df) = match variant {
        TTestVariant::StudentPooled => {
            let df = na + nb - 2.0;
            let pooled = (m2_a + m2_b) / df;
            (pooled * (1.0 / na + 1.0 / nb), df)
        }
        TTestVariant::Welch => {
            let (sa, sb) = (var_a / na, var_b / nb);
            let se2 = sa + sb;
            let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
            (se2, df)
        }
    };

    if se2 == 0.0 {
        let (t, p) = if diff == 0.0 {
            (0.0, 1.0)
        } else {
            (diff.signum() * f64::INFINITY, 0.0)
        };
        return Ok(TTestResult {
            t_statistic: t,
            degrees_of_freedom: na + nb - 2.0,
            p_value: p,
            variant,
            degenerate_variance: true,
        });
    }

    let t = diff / se2.sqrt();
    Ok(TTestResult {
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: student_t_two_sided_p(t, df),
        variant,
        degenerate_variance: false,
    })
}
