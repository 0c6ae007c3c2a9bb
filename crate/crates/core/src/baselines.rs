//! Comparison methods. All of them share the forecaster reservoir used by
//! METAFORS and differ only in how the output layer and initial state are
//! obtained.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::library::MetaLibrary;
use crate::linalg::RidgeAccumulator;
use crate::par::{self, Exec};
use crate::reservoir::{
    accumulate_fit, check_training_length, synchronize_then_forecast, Forecast, Reservoir, ReservoirState,
    TrainedModel,
};
use crate::series::Series;

/// Synchronizes from the zero state through `cue`, then forecasts.
pub fn zero_start_forecast(forecaster: &Reservoir, model: &TrainedModel, cue: &Series, n_steps: usize) -> Result<Forecast> {
    synchronize_then_forecast(forecaster, model, &ReservoirState::zeros(forecaster.n_nodes()), cue, n_steps)
}

/// One output layer fit to the pooled pairs of every long signal, each driven
/// from the zero state with its own transient discarded.
pub fn train_multitask(forecaster: &Reservoir, long_signals: &[Series], n_trans: usize, alpha: f64) -> Result<TrainedModel> {
    train_multitask_with(Exec::default(), forecaster, long_signals, n_trans, alpha)
}

pub fn train_multitask_with(
    exec: Exec,
    forecaster: &Reservoir,
    long_signals: &[Series],
    n_trans: usize,
    alpha: f64,
) -> Result<TrainedModel> {
    let first = long_signals
        .first()
        .ok_or_else(|| Error::InvalidArgument("multi-task training needs at least one signal".into()))?;
    let d = first.n_sys();
    for s in long_signals {
        if s.n_sys() != d {
            return Err(Error::Dimension("signals differ in components".into()));
        }
        check_training_length(s, n_trans)?;
    }
    let parts = par::try_map_range(exec, long_signals.len(), |i| -> Result<RidgeAccumulator> {
        let s = &long_signals[i];
        let traj = forecaster.drive_open_loop(&ReservoirState::zeros(forecaster.n_nodes()), s)?;
        let mut acc = RidgeAccumulator::new(forecaster.n_nodes(), d);
        accumulate_fit(&mut acc, &traj, s, n_trans);
        Ok(acc)
    })?;
    let mut acc = RidgeAccumulator::new(forecaster.n_nodes(), d);
    for p in &parts {
        acc.merge(p);
    }
    let w = acc.solve(alpha)?;
    Ok(TrainedModel::new(w, forecaster, alpha, acc.count()))
}

/// Which transient schedule train-on-test uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleFamily {
    Map,
    Lorenz,
}

/// Transient length discarded when training on a cue of `n_test` points.
pub fn train_on_test_transient(family: ScheduleFamily, n_test: usize) -> Result<usize> {
    if n_test < 2 {
        return Err(Error::TooShort("training on the cue needs at least two points".into()));
    }
    Ok(match family {
        ScheduleFamily::Map if n_test == 2 => 0,
        ScheduleFamily::Map if n_test < 10 => n_test / 2,
        ScheduleFamily::Map => 5,
        ScheduleFamily::Lorenz if n_test < 100 => n_test / 10,
        ScheduleFamily::Lorenz => 10,
    })
}

/// Fits an output layer to the cue alone.
pub fn train_on_test(forecaster: &Reservoir, cue: &Series, family: ScheduleFamily, alpha: f64) -> Result<TrainedModel> {
    let n_trans = train_on_test_transient(family, cue.len())?;
    Ok(crate::reservoir::train_output_layer(forecaster, cue, n_trans, alpha)?.0)
}

/// Library models with their dynamical parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledLibrary {
    models: Vec<TrainedModel>,
    labels: Vec<Vec<f64>>,
}

impl LabeledLibrary {
    pub fn new(models: Vec<TrainedModel>, labels: Vec<Vec<f64>>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::InvalidArgument("labeled library is empty".into()));
        }
        if models.len() != labels.len() {
            return Err(Error::Dimension("one label per model required".into()));
        }
        let k = labels[0].len();
        if k == 0 || labels.iter().any(|l| l.len() != k) {
            return Err(Error::Dimension("labels must share a nonzero length".into()));
        }
        Ok(Self { models, labels })
    }

    pub fn from_library(library: &MetaLibrary, labels: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(library.models().to_vec(), labels)
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn models(&self) -> &[TrainedModel] {
        &self.models
    }

    pub fn labels(&self) -> &[Vec<f64>] {
        &self.labels
    }

    fn check_query(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.labels[0].len() {
            return Err(Error::Dimension(format!(
                "query has {} parameters, labels have {}",
                q.len(),
                self.labels[0].len()
            )));
        }
        Ok(())
    }

    /// Per-axis `(min, span)` with zero spans replaced by one.
    fn axis_scales(&self) -> Vec<(f64, f64)> {
        (0..self.labels[0].len())
            .map(|a| {
                let lo = self.labels.iter().map(|l| l[a]).fold(f64::INFINITY, f64::min);
                let hi = self.labels.iter().map(|l| l[a]).fold(f64::NEG_INFINITY, f64::max);
                let span = hi - lo;
                (lo, if span > 0.0 { span } else { 1.0 })
            })
            .collect()
    }

    fn rescaled(&self) -> (Vec<Vec<f64>>, Vec<(f64, f64)>) {
        let s = self.axis_scales();
        let pts = self.labels.iter().map(|l| rescale(l, &s)).collect();
        (pts, s)
    }

    /// Member whose rescaled label is nearest to `q`; ties go to the lowest index.
    pub fn nearest_member(&self, q: &[f64]) -> Result<usize> {
        self.check_query(q)?;
        let (pts, s) = self.rescaled();
        Ok(nearest_point(&pts, &rescale(q, &s)))
    }

    /// Weights over members for 1-D interpolation or extrapolation.
    pub fn weights_1d(&self, p: f64) -> Result<Vec<(usize, f64)>> {
        self.check_query(&[p])?;
        if self.len() < 2 {
            return Err(Error::InvalidArgument("interpolation needs at least two members".into()));
        }
        let x: Vec<f64> = self.labels.iter().map(|l| l[0]).collect();
        if let Some(k) = x.iter().position(|&v| v == p) {
            return Ok(vec![(k, 1.0)]);
        }
        let below = argbest(&x, |v| v < p, |a, b| a > b);
        let above = argbest(&x, |v| v > p, |a, b| a < b);
        if let (Some(lo), Some(hi)) = (below, above) {
            let w = (p - x[lo]) / (x[hi] - x[lo]);
            return Ok(vec![(lo, 1.0 - w), (hi, w)]);
        }
        let dist: Vec<f64> = x.iter().map(|v| (v - p).abs()).collect();
        let near = argbest(&dist, |_| true, |a, b| a < b).expect("nonempty");
        let second = (0..x.len())
            .filter(|&i| i != near && x[i] != x[near])
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if dist[b] <= dist[i] => Some(b),
                _ => Some(i),
            });
        let Some(second) = second else {
            return Ok(vec![(near, 1.0)]);
        };
        let c = (p - x[near]) / (x[near] - x[second]);
        Ok(vec![(near, 1.0 + c), (second, -c)])
    }

    /// Weights over members for 2-D barycentric interpolation; the nearest
    /// member outside the convex hull.
    pub fn weights_2d(&self, q: &[f64]) -> Result<Vec<(usize, f64)>> {
        self.check_query(q)?;
        if q.len() != 2 {
            return Err(Error::Dimension("2-D interpolation needs two parameters".into()));
        }
        if let Some(k) = self.labels.iter().position(|l| l[..] == q[..]) {
            return Ok(vec![(k, 1.0)]);
        }
        let (pts, s) = self.rescaled();
        let qs = rescale(q, &s);
        let qp = [qs[0], qs[1]];
        let n = pts.len();
        let mut best: Option<(f64, [usize; 3], [f64; 3])> = None;
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let tri = [[pts[i][0], pts[i][1]], [pts[j][0], pts[j][1]], [pts[k][0], pts[k][1]]];
                    let area = triangle_area(&tri);
                    if area <= TRIANGLE_MIN_AREA {
                        continue;
                    }
                    let Some(w) = barycentric_weights(&tri, qp) else { continue };
                    if w.iter().all(|&v| v >= -BARY_TOL) && best.as_ref().is_none_or(|b| area < b.0) {
                        best = Some((area, [i, j, k], w));
                    }
                }
            }
        }
        Ok(match best {
            Some((_, idx, w)) => idx.iter().copied().zip(w).collect(),
            None => vec![(nearest_point(&pts, &qs), 1.0)],
        })
    }

    /// `Σ w_i W_i`, accumulated in the listed order.
    pub fn combine(&self, weights: &[(usize, f64)]) -> TrainedModel {
        if let [(k, w)] = weights {
            if *w == 1.0 {
                return self.models[*k].clone();
            }
        }
        let first = &self.models[weights[0].0];
        let mut w_out = DMatrix::zeros(first.w_out.nrows(), first.w_out.ncols());
        for &(k, w) in weights {
            w_out.zip_apply(&self.models[k].w_out, |acc, m| *acc += w * m);
        }
        TrainedModel { w_out, reservoir_hash: first.reservoir_hash.clone(), alpha: first.alpha, n_fit: 0 }
    }

    pub fn nearest_model(&self, q: &[f64]) -> Result<&TrainedModel> {
        Ok(&self.models[self.nearest_member(q)?])
    }

    pub fn interpolated_model_1d(&self, p: f64) -> Result<TrainedModel> {
        Ok(self.combine(&self.weights_1d(p)?))
    }

    pub fn interpolated_model_2d(&self, q: &[f64]) -> Result<TrainedModel> {
        Ok(self.combine(&self.weights_2d(q)?))
    }
}

const BARY_TOL: f64 = 1e-12;
const TRIANGLE_MIN_AREA: f64 = 1e-12;

fn rescale(p: &[f64], scales: &[(f64, f64)]) -> Vec<f64> {
    p.iter().zip(scales).map(|(v, (lo, span))| (v - lo) / span).collect()
}

fn nearest_point(pts: &[Vec<f64>], q: &[f64]) -> usize {
    let d: Vec<f64> = pts
        .iter()
        .map(|p| p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum())
        .collect();
    argbest(&d, |_| true, |a, b| a < b).expect("nonempty")
}

/// First index whose value passes `keep` and is strictly `better` than all
/// earlier candidates.
fn argbest(x: &[f64], keep: impl Fn(f64) -> bool, better: impl Fn(f64, f64) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in x.iter().enumerate() {
        if keep(v) && best.is_none_or(|b| better(v, x[b])) {
            best = Some(i);
        }
    }
    best
}

pub fn triangle_area(t: &[[f64; 2]; 3]) -> f64 {
    0.5 * ((t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[2][0] - t[0][0]) * (t[1][1] - t[0][1])).abs()
}

/// Barycentric coordinates of `q` in triangle `t`, or `None` if degenerate.
pub fn barycentric_weights(t: &[[f64; 2]; 3], q: [f64; 2]) -> Option<[f64; 3]> {
    let det = (t[1][1] - t[2][1]) * (t[0][0] - t[2][0]) + (t[2][0] - t[1][0]) * (t[0][1] - t[2][1]);
    if det.abs() < f64::EPSILON {
        return None;
    }
    let w0 = ((t[1][1] - t[2][1]) * (q[0] - t[2][0]) + (t[2][0] - t[1][0]) * (q[1] - t[2][1])) / det;
    let w1 = ((t[2][1] - t[0][1]) * (q[0] - t[2][0]) + (t[0][0] - t[2][0]) * (q[1] - t[2][1])) / det;
    Some([w0, w1, 1.0 - w0 - w1])
}

pub fn nearest_library_forecast(
    forecaster: &Reservoir,
    lib: &LabeledLibrary,
    params: &[f64],
    cue: &Series,
    n_steps: usize,
) -> Result<Forecast> {
    zero_start_forecast(forecaster, lib.nearest_model(params)?, cue, n_steps)
}

pub fn interpolated_forecaster_1d(
    forecaster: &Reservoir,
    lib: &LabeledLibrary,
    param: f64,
    cue: &Series,
    n_steps: usize,
) -> Result<Forecast> {
    zero_start_forecast(forecaster, &lib.interpolated_model_1d(param)?, cue, n_steps)
}

pub fn interpolated_forecaster_2d(
    forecaster: &Reservoir,
    lib: &LabeledLibrary,
    params: &[f64],
    cue: &Series,
    n_steps: usize,
) -> Result<Forecast> {
    zero_start_forecast(forecaster, &lib.interpolated_model_2d(params)?, cue, n_steps)
}

/// Rows of constant padding placed before the cue.
pub const BACKWARD_PAD: usize = 200;

/// The cue with its first row repeated [`BACKWARD_PAD`] times in front.
pub fn backward_padded(cue: &Series) -> Result<Series> {
    if cue.is_empty() {
        return Err(Error::TooShort("cue is empty".into()));
    }
    let mut data = Vec::with_capacity((BACKWARD_PAD + cue.len()) * cue.n_sys());
    for _ in 0..BACKWARD_PAD {
        data.extend_from_slice(cue.row(0));
    }
    data.extend_from_slice(cue.data());
    Ok(Series::from_raw(data, cue.n_sys(), cue.dt()))
}

/// Zero start through the cue extended backwards as a constant.
pub fn backward_extrapolation_start(
    forecaster: &Reservoir,
    model: &TrainedModel,
    cue: &Series,
    n_steps: usize,
) -> Result<Forecast> {
    zero_start_forecast(forecaster, model, &backward_padded(cue)?, n_steps)
}

/// Best-matching training segment for a cue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentMatch {
    pub start: usize,
    pub rms: f64,
}

/// Slides the cue over the post-transient part of the single training signal
/// and returns the earliest segment with the lowest RMS distance.
pub fn search_training_data(library: &MetaLibrary, cue: &Series) -> Result<SegmentMatch> {
    if library.len() != 1 {
        return Err(Error::InvalidArgument("training-data search needs a single-member library".into()));
    }
    let signal = &library.long_signals()[0];
    if cue.n_sys() != signal.n_sys() {
        return Err(Error::Dimension("cue and training signal differ in components".into()));
    }
    let n = cue.len();
    let first = library.n_trans();
    if n == 0 || signal.len() < first + n {
        return Err(Error::TooShort("no training segment to search".into()));
    }
    let width = n * cue.n_sys();
    let mut best = SegmentMatch { start: first, rms: f64::INFINITY };
    for j in first..=signal.len() - n {
        let seg = &signal.data()[j * cue.n_sys()..j * cue.n_sys() + width];
        let ss: f64 = seg.iter().zip(cue.data()).map(|(a, b)| (a - b) * (a - b)).sum();
        let rms = (ss / width as f64).sqrt();
        if rms < best.rms {
            best = SegmentMatch { start: j, rms };
        }
    }
    Ok(best)
}

/// Cold start from the stored training state at the best-matching segment.
pub fn training_data_search_start(
    forecaster: &Reservoir,
    library: &MetaLibrary,
    cue: &Series,
    n_steps: usize,
) -> Result<Forecast> {
    let m = search_training_data(library, cue)?;
    let r_init = match library.cold_start_at(0, m.start) {
        Some(r) => ReservoirState::new(r.to_vec()),
        None => ReservoirState::zeros(forecaster.n_nodes()),
    };
    synchronize_then_forecast(forecaster, &library.models()[0], &r_init, cue, n_steps)
}

/// Stable identifiers of every forecasting method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Metafors,
    MetaforsZeroStart,
    ZeroStartLibrary(usize),
    Multitask,
    TrainOnTest,
    Nearest,
    Interp,
    BackwardConst,
    TrainSearch,
}

impl Method {
    pub const FIXED: [Method; 8] = [
        Method::Metafors,
        Method::MetaforsZeroStart,
        Method::Multitask,
        Method::TrainOnTest,
        Method::Nearest,
        Method::Interp,
        Method::BackwardConst,
        Method::TrainSearch,
    ];

    /// Whether the method reads dynamical-parameter labels.
    pub fn needs_labels(self) -> bool {
        matches!(self, Method::Nearest | Method::Interp)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Metafors => f.write_str("metafors"),
            Method::MetaforsZeroStart => f.write_str("metafors_zero_start"),
            Method::ZeroStartLibrary(k) => write!(f, "zero_start_library_{k}"),
            Method::Multitask => f.write_str("multitask"),
            Method::TrainOnTest => f.write_str("train_on_test"),
            Method::Nearest => f.write_str("nearest"),
            Method::Interp => f.write_str("interp"),
            Method::BackwardConst => f.write_str("backward_const"),
            Method::TrainSearch => f.write_str("train_search"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(k) = s.strip_prefix("zero_start_library_") {
            return k
                .parse()
                .map(Method::ZeroStartLibrary)
                .map_err(|_| Error::InvalidArgument(format!("bad library index in {s:?}")));
        }
        Method::FIXED
            .iter()
            .copied()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules() {
        assert!(train_on_test_transient(ScheduleFamily::Map, 1).is_err());
        assert_eq!(train_on_test_transient(ScheduleFamily::Map, 2).unwrap(), 0);
        assert_eq!(train_on_test_transient(ScheduleFamily::Map, 7).unwrap(), 3);
        assert_eq!(train_on_test_transient(ScheduleFamily::Map, 10).unwrap(), 5);
        assert_eq!(train_on_test_transient(ScheduleFamily::Lorenz, 50).unwrap(), 5);
        assert_eq!(train_on_test_transient(ScheduleFamily::Lorenz, 200).unwrap(), 10);
    }

    #[test]
    fn method_ids_round_trip() {
        for m in Method::FIXED.iter().copied().chain([Method::ZeroStartLibrary(3)]) {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("bogus".parse::<Method>().is_err());
        assert!("zero_start_library_x".parse::<Method>().is_err());
    }

    #[test]
    fn centroid_weights() {
        let t = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let w = barycentric_weights(&t, [1.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert!(w.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert!(barycentric_weights(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]], [0.5, 0.5]).is_none());
    }

    #[test]
    fn padding_length() {
        let cue = Series::scalar(vec![0.3, 0.4], 1.0).unwrap();
        let p = backward_padded(&cue).unwrap();
        assert_eq!(p.len(), BACKWARD_PAD + 2);
        assert!(p.data()[..BACKWARD_PAD].iter().all(|&v| v == 0.3));
    }
}
