//! Aggregation of result rows.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::results::ResultRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Mean,
    Median,
    /// Standard error of the mean (sample std over `sqrt(n)`); NaN for one value.
    Stderr,
}

impl Statistic {
    pub fn apply(self, xs: &[f64]) -> f64 {
        let n = xs.len();
        if n == 0 {
            return f64::NAN;
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        match self {
            Statistic::Mean => mean,
            Statistic::Median => {
                let mut v = xs.to_vec();
                v.sort_by(f64::total_cmp);
                if n % 2 == 1 {
                    v[n / 2]
                } else {
                    0.5 * (v[n / 2 - 1] + v[n / 2])
                }
            }
            Statistic::Stderr => {
                if n < 2 {
                    return f64::NAN;
                }
                let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            }
        }
    }
}

impl FromStr for Statistic {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Statistic::Mean),
            "median" => Ok(Statistic::Median),
            "stderr" => Ok(Statistic::Stderr),
            _ => Err(HarnessError::Config(format!("unknown statistic {s:?} (mean|median|stderr)"))),
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Statistic::Mean => "mean",
            Statistic::Median => "median",
            Statistic::Stderr => "stderr",
        })
    }
}

/// Grouping key besides method and noise setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GroupBy {
    /// One group per cue length, pooling test points and replicates.
    #[default]
    NTest,
    /// One group per test point and cue length, pooling replicates.
    Point,
}

impl FromStr for GroupBy {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n_test" => Ok(GroupBy::NTest),
            "point" => Ok(GroupBy::Point),
            _ => Err(HarnessError::Config(format!("unknown grouping {s:?} (n_test|point)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub method: String,
    pub n_test: usize,
    pub noise_train: f64,
    pub noise_test: f64,
    pub family: Option<String>,
    pub test_index: Option<usize>,
    pub param0: Option<f64>,
    pub param1: Option<f64>,
    pub statistic: String,
    pub count: usize,
    /// Rows whose valid time hit the horizon; they enter at the horizon value.
    pub censored: usize,
    pub t_valid: f64,
    pub epsilon: Option<f64>,
    pub escaped_fraction: Option<f64>,
    pub ks_distance: Option<f64>,
}

/// Aggregates rows per method, noise setting and `by` key, in order of first appearance.
pub fn summarize(rows: &[ResultRow], stat: Statistic, by: GroupBy) -> Result<Vec<SummaryRow>> {
    let Some(first) = rows.first() else {
        return Err(HarnessError::Results("no result rows".into()));
    };
    if let Some(other) = rows.iter().find(|r| r.experiment != first.experiment) {
        return Err(HarnessError::Results(format!(
            "results mix experiments {:?} and {:?}",
            first.experiment, other.experiment
        )));
    }
    let same_group = |a: &ResultRow, b: &ResultRow| {
        a.method == b.method
            && a.n_test == b.n_test
            && a.noise_train.to_bits() == b.noise_train.to_bits()
            && a.noise_test.to_bits() == b.noise_test.to_bits()
            && (by == GroupBy::NTest || (a.family == b.family && a.test_index == b.test_index))
    };
    let mut groups: Vec<Vec<&ResultRow>> = Vec::new();
    for r in rows {
        match groups.iter_mut().find(|g| same_group(g[0], r)) {
            Some(g) => g.push(r),
            None => groups.push(vec![r]),
        }
    }
    let optional = |xs: Vec<Option<f64>>| -> Option<f64> {
        let v: Vec<f64> = xs.into_iter().flatten().collect();
        (!v.is_empty()).then(|| stat.apply(&v))
    };
    Ok(groups
        .into_iter()
        .map(|g| {
            let head = g[0];
            let point = by == GroupBy::Point;
            let escaped: Vec<f64> = g.iter().filter_map(|r| r.escaped).map(|e| if e { 1.0 } else { 0.0 }).collect();
            SummaryRow {
                experiment: head.experiment.clone(),
                method: head.method.clone(),
                n_test: head.n_test,
                noise_train: head.noise_train,
                noise_test: head.noise_test,
                family: point.then(|| head.family.clone()),
                test_index: point.then_some(head.test_index),
                param0: point.then_some(head.param0),
                param1: if point { head.param1 } else { None },
                statistic: stat.to_string(),
                count: g.len(),
                censored: g.iter().filter(|r| r.censored).count(),
                t_valid: stat.apply(&g.iter().map(|r| r.t_valid).collect::<Vec<_>>()),
                epsilon: optional(g.iter().map(|r| r.epsilon).collect()),
                escaped_fraction: (!escaped.is_empty()).then(|| escaped.iter().sum::<f64>() / escaped.len() as f64),
                ks_distance: optional(g.iter().map(|r| r.ks_distance).collect()),
            }
        })
        .collect())
}

pub fn write_summary<W: std::io::Write>(w: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statistics_by_hand() {
        let xs = [1.0, 2.0, 6.0];
        assert_eq!(Statistic::Mean.apply(&xs), 3.0);
        assert_eq!(Statistic::Median.apply(&xs), 2.0);
        assert_eq!(Statistic::Median.apply(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        // sample variance (4 + 1 + 9) / 2 = 7
        assert!((Statistic::Stderr.apply(&xs) - (7.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(Statistic::Stderr.apply(&[5.0]).is_nan());
    }
}
