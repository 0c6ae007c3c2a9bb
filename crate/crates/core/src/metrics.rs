//! Forecast quality measures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::Series;
use crate::systems::TrueDynamics;

/// Valid prediction time of one forecast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidTime {
    /// Forecast-relative time of the first threshold crossing.
    pub t_valid: f64,
    /// Index of the first crossing, or the horizon length.
    pub steps: usize,
    /// True when the error never crossed the threshold within the horizon.
    pub censored: bool,
}

/// First forecast step at which the component-normalized error exceeds one.
///
/// `predicted` row 0 and `truth` row 0 are the same instant (the first
/// forecast time). Normalization uses the population std of `truth` over the
/// compared window.
pub fn valid_time(predicted: &Series, truth: &Series) -> Result<ValidTime> {
    let n = predicted.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty forecast".into()));
    }
    if truth.len() < n {
        return Err(Error::TooShort(format!("truth has {} rows, forecast {n}", truth.len())));
    }
    if truth.n_sys() != predicted.n_sys() {
        return Err(Error::Dimension("forecast and truth differ in components".into()));
    }
    let window = truth.window(0, n);
    let std = window.component_std();
    for k in 0..n {
        if normalized_error(predicted.row(k), window.row(k), &std) > 1.0 {
            return Ok(ValidTime { t_valid: k as f64 * predicted.dt(), steps: k, censored: false });
        }
    }
    Ok(ValidTime { t_valid: n as f64 * predicted.dt(), steps: n, censored: true })
}

fn normalized_error(p: &[f64], u: &[f64], std: &[f64]) -> f64 {
    let mut sq = 0.0;
    for ((p, u), s) in p.iter().zip(u).zip(std) {
        let d = p - u;
        if !d.is_finite() {
            return f64::INFINITY;
        }
        let e = if *s > 0.0 {
            d / s
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        sq += e * e;
    }
    sq.sqrt()
}

/// Autonomous one-step error and whether the forecast blew up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneStepError {
    pub epsilon: f64,
    pub diverged: bool,
}

/// Mean over `t = n_discard..len-1` of `|û(t+1) - G(û(t))|`.
///
/// A non-finite forecast is flagged diverged with `epsilon = +inf`.
pub fn autonomous_one_step_error(
    predicted: &Series,
    dynamics: &TrueDynamics,
    n_discard: usize,
) -> Result<OneStepError> {
    if predicted.n_sys() != dynamics.state_dim() {
        return Err(Error::InvalidArgument(format!(
            "one-step error needs the full {}-component state, forecast has {}; use valid_time for partial observations",
            dynamics.state_dim(),
            predicted.n_sys()
        )));
    }
    let n = predicted.len();
    if n < n_discard + 2 {
        return Err(Error::TooShort(format!(
            "forecast has {n} points, needs at least {} after discarding {n_discard}",
            n_discard + 2
        )));
    }
    if !predicted.is_finite() {
        return Ok(OneStepError { epsilon: f64::INFINITY, diverged: true });
    }
    let mut sum = 0.0;
    for t in n_discard..n - 1 {
        let g = dynamics.step(predicted.row(t));
        let next = predicted.row(t + 1);
        sum += g.iter().zip(next).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
    }
    let epsilon = sum / (n - 1 - n_discard) as f64;
    Ok(OneStepError { epsilon, diverged: false })
}

/// Fraction of samples of `component` that are `<=` each grid value.
pub fn empirical_cdf(series: &Series, component: usize, grid: &[f64]) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::InvalidArgument("empty series".into()));
    }
    if component >= series.n_sys() {
        return Err(Error::Dimension(format!("component {component} of {}", series.n_sys())));
    }
    let xs = sorted_samples(&series.column(component));
    let n = xs.len() as f64;
    Ok(grid
        .iter()
        .map(|g| xs.partition_point(|x| x <= g) as f64 / n)
        .collect())
}

fn sorted_samples(xs: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = xs.iter().map(|&x| if x.is_nan() { f64::INFINITY } else { x }).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Two-sample Kolmogorov-Smirnov distance, evaluated on the union of both
/// sample sets. NaN samples count as `+inf`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("KS distance needs samples on both sides".into()));
    }
    let a = sorted_samples(a);
    let b = sorted_samples(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Number of trailing samples that must all lie outside `[0, 1]` for a
/// forecast to count as escaped.
pub const ESCAPE_WINDOW: usize = 20;

/// Retained forecast values and the escape flag.
#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationPoints {
    pub values: Vec<f64>,
    pub escaped: bool,
}

/// Values of a scalar forecast after `n_discard` points, plus whether the
/// forecast left `[0, 1]` for good.
pub fn bifurcation_points(forecast: &Series, n_discard: usize) -> BifurcationPoints {
    let xs = forecast.column(0);
    let values = xs.get(n_discard..).map(<[f64]>::to_vec).unwrap_or_default();
    BifurcationPoints { values, escaped: escapes_unit_interval(&xs) }
}

/// True when the last `min(len, ESCAPE_WINDOW)` samples are all outside
/// `[0, 1]` or non-finite.
pub fn escapes_unit_interval(xs: &[f64]) -> bool {
    if xs.is_empty() {
        return false;
    }
    let tail = &xs[xs.len().saturating_sub(ESCAPE_WINDOW)..];
    tail.iter().all(|x| !(0.0..=1.0).contains(x))
}

/// Summary of one forecast against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastEvaluation {
    pub t_valid: f64,
    pub censored: bool,
    pub one_step_error: Option<f64>,
    pub diverged: bool,
}

impl ForecastEvaluation {
    /// Valid time always; one-step error when `dynamics` is given.
    pub fn evaluate(
        predicted: &Series,
        truth: &Series,
        dynamics: Option<&TrueDynamics>,
        n_discard: usize,
    ) -> Result<Self> {
        let vt = valid_time(predicted, truth)?;
        let diverged = !predicted.is_finite();
        let one_step_error = match dynamics {
            Some(g) => Some(autonomous_one_step_error(predicted, g, n_discard)?.epsilon),
            None => None,
        };
        Ok(Self { t_valid: vt.t_valid, censored: vt.censored, one_step_error, diverged })
    }
}
