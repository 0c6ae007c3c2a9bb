//! Ground-truth generators: logistic map, translated Gauss iterated map and
//! Lorenz-63 with a time-scale factor, plus the observation models applied to
//! them (partial observation, additive Gaussian noise).

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::series::Series;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Logistic,
    Gauss,
}

/// Parameters of a one-dimensional map. `mu` is only read by the logistic map,
/// `a` and `b` only by the Gauss map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapParams {
    pub kind: MapKind,
    pub mu: f64,
    pub a: f64,
    pub b: f64,
}

/// Translation used for every Gauss map in the experiments. In
/// `exp(-a (x - b)^2)` form this is the usual map `exp(-a x^2) - 0.5`
/// shifted by `+0.5`, which keeps iterates in `(0, 1)` and is chaotic over
/// most of `6 <= a <= 12`.
pub const GAUSS_B: f64 = 0.5;

impl MapParams {
    pub fn logistic(mu: f64) -> Self {
        Self { kind: MapKind::Logistic, mu, a: f64::NAN, b: f64::NAN }
    }

    pub fn gauss(a: f64, b: f64) -> Self {
        Self { kind: MapKind::Gauss, mu: f64::NAN, a, b }
    }

    /// The parameter varied in the experiments (`mu` or `a`).
    pub fn primary(&self) -> f64 {
        match self.kind {
            MapKind::Logistic => self.mu,
            MapKind::Gauss => self.a,
        }
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match self.kind {
            MapKind::Logistic => self.mu * x * (1.0 - x),
            MapKind::Gauss => (-self.a * (x - self.b).powi(2)).exp(),
        }
    }

    pub fn trajectory(&self, x0: f64, n_total: usize, n_discard: usize) -> Result<Series> {
        match self.kind {
            MapKind::Logistic => logistic_trajectory(self.mu, x0, n_total, n_discard),
            MapKind::Gauss => gauss_trajectory(self.a, self.b, x0, n_total, n_discard),
        }
    }
}

fn iterate_map(f: impl Fn(f64) -> f64, x0: f64, n_total: usize, n_discard: usize) -> Result<Series> {
    if n_discard >= n_total {
        return Err(Error::InvalidArgument(format!(
            "n_discard ({n_discard}) must be below n_total ({n_total})"
        )));
    }
    let mut out = Vec::with_capacity(n_total - n_discard);
    let mut x = x0;
    for n in 0..n_total {
        if !x.is_finite() || x.abs() > 1e150 {
            return Err(Error::DomainEscape { step: n, value: x });
        }
        if n >= n_discard {
            out.push(x);
        }
        x = f(x);
    }
    Series::scalar(out, 1.0)
}

/// `x_{n+1} = mu x_n (1 - x_n)`; the first element is `x0`.
pub fn logistic_trajectory(mu: f64, x0: f64, n_total: usize, n_discard: usize) -> Result<Series> {
    if !(x0 > 0.0 && x0 < 1.0) {
        return Err(Error::InvalidArgument(format!("x0 must lie in (0, 1), got {x0}")));
    }
    let p = MapParams::logistic(mu);
    iterate_map(|x| p.apply(x), x0, n_total, n_discard)
}

/// `x_{n+1} = exp(-a (x_n - b)^2)`.
pub fn gauss_trajectory(a: f64, b: f64, x0: f64, n_total: usize, n_discard: usize) -> Result<Series> {
    let p = MapParams::gauss(a, b);
    iterate_map(|x| p.apply(x), x0, n_total, n_discard)
}

/// Lorenz-63 with time-scale factor `omega_t` multiplying every right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorenzParams {
    pub omega_t: f64,
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
    pub dt: f64,
}

impl Default for LorenzParams {
    fn default() -> Self {
        Self { omega_t: 1.0, v1: 10.0, v2: 28.0, v3: 8.0 / 3.0, dt: 0.01 }
    }
}

impl LorenzParams {
    pub fn with(omega_t: f64, v1: f64) -> Self {
        Self { omega_t, v1, ..Self::default() }
    }

    #[inline]
    pub fn rhs(&self, x: &[f64; 3]) -> [f64; 3] {
        let w = self.omega_t;
        [
            w * (self.v1 * (x[1] - x[0])),
            w * (x[0] * (self.v2 - x[2]) - x[1]),
            w * (x[0] * x[1] - self.v3 * x[2]),
        ]
    }

    /// One classical fourth-order Runge-Kutta step of size `h`.
    #[inline]
    pub fn rk4_step(&self, x: &[f64; 3], h: f64) -> [f64; 3] {
        let add = |a: &[f64; 3], k: &[f64; 3], s: f64| [a[0] + s * k[0], a[1] + s * k[1], a[2] + s * k[2]];
        let k1 = self.rhs(x);
        let k2 = self.rhs(&add(x, &k1, h / 2.0));
        let k3 = self.rhs(&add(x, &k2, h / 2.0));
        let k4 = self.rhs(&add(x, &k3, h));
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out
    }
}

/// RK4 integration sampled every `params.dt`; the first sample is `x0`.
pub fn lorenz_trajectory(params: &LorenzParams, x0: [f64; 3], n_total: usize, n_discard: usize) -> Result<Series> {
    lorenz_trajectory_substeps(params, x0, n_total, n_discard, 1)
}

/// As [`lorenz_trajectory`] but with `substeps` RK4 steps of `dt / substeps`
/// between samples.
pub fn lorenz_trajectory_substeps(
    params: &LorenzParams,
    x0: [f64; 3],
    n_total: usize,
    n_discard: usize,
    substeps: usize,
) -> Result<Series> {
    if n_discard >= n_total {
        return Err(Error::InvalidArgument(format!(
            "n_discard ({n_discard}) must be below n_total ({n_total})"
        )));
    }
    if params.dt.is_nan() || params.dt <= 0.0 || substeps == 0 {
        return Err(Error::InvalidArgument("dt and substeps must be positive".into()));
    }
    let h = params.dt / substeps as f64;
    let mut out = Vec::with_capacity(3 * (n_total - n_discard));
    let mut x = x0;
    for n in 0..n_total {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step: n });
        }
        if n >= n_discard {
            out.extend_from_slice(&x);
        }
        for _ in 0..substeps {
            x = params.rk4_step(&x, h);
        }
    }
    Series::new(out, 3, params.dt)
}

/// Detection window used by [`is_periodic`].
pub fn periodicity_window(max_period: usize) -> usize {
    (4 * max_period).max(200)
}

/// True iff some period `p <= max_period` repeats to within `tol` across the
/// trailing detection window (`max(4 * max_period, 200)` samples).
pub fn is_periodic(series: &Series, max_period: usize, tol: f64) -> Result<bool> {
    let window = periodicity_window(max_period);
    if series.len() < window {
        return Err(Error::TooShort(format!(
            "periodicity check needs {window} samples, series has {}",
            series.len()
        )));
    }
    let start = series.len() - window;
    let d = series.n_sys();
    let data = &series.data()[start * d..];
    'period: for p in 1..=max_period.min(window - 1) {
        for n in 0..(window - p) {
            let a = &data[n * d..(n + 1) * d];
            let b = &data[(n + p) * d..(n + p + 1) * d];
            if a.iter().zip(b).any(|(x, y)| (x - y).abs() >= tol) {
                continue 'period;
            }
        }
        return Ok(true);
    }
    Ok(false)
}

/// Periodicity rule applied when sampling library parameters.
pub const PERIODIC_MAX_PERIOD: usize = 64;
pub const PERIODIC_TOL: f64 = 1e-6;
const CHECK_TOTAL: usize = 2000;
const CHECK_DISCARD: usize = 1000;
const REJECTION_CAP: usize = 10_000;

/// Draws `n` map parameters uniformly from `range`, redrawing any value whose
/// post-transient trajectory is periodic. Gauss draws vary `a` with `b = GAUSS_B`.
pub fn sample_chaotic_params(kind: MapKind, range: (f64, f64), n: usize, seed: u64) -> Result<Vec<MapParams>> {
    let (lo, hi) = range;
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(Error::InvalidArgument(format!("empty range [{lo}, {hi}]")));
    }
    if kind == MapKind::Logistic && !(lo > 0.0 && hi <= 4.0) {
        return Err(Error::InvalidArgument(format!("logistic range [{lo}, {hi}] outside (0, 4]")));
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = rng::stream(seed, "chaotic-params", i as u64);
        let mut accepted = None;
        for _ in 0..REJECTION_CAP {
            let v = if lo == hi { lo } else { rng.random_range(lo..=hi) };
            let params = match kind {
                MapKind::Logistic => MapParams::logistic(v),
                MapKind::Gauss => MapParams::gauss(v, GAUSS_B),
            };
            let x0 = rng.random_range(f64::EPSILON..1.0);
            let traj = params.trajectory(x0, CHECK_TOTAL, CHECK_DISCARD)?;
            if !is_periodic(&traj, PERIODIC_MAX_PERIOD, PERIODIC_TOL)? {
                accepted = Some(params);
                break;
            }
        }
        out.push(accepted.ok_or(Error::RejectionCap { attempts: REJECTION_CAP })?);
    }
    Ok(out)
}

/// Adds zero-mean Gaussian noise with per-component standard deviation
/// `sigma_rel * library_std[j]`.
pub fn add_observational_noise(series: &Series, sigma_rel: f64, library_std: &[f64], seed: u64) -> Result<Series> {
    if library_std.len() != series.n_sys() {
        return Err(Error::Dimension(format!(
            "library_std has {} components, series has {}",
            library_std.len(),
            series.n_sys()
        )));
    }
    if sigma_rel.is_nan() || sigma_rel < 0.0 {
        return Err(Error::InvalidArgument(format!("sigma_rel must be >= 0, got {sigma_rel}")));
    }
    if sigma_rel == 0.0 {
        return Ok(series.clone());
    }
    let mut rng = rng::stream(seed, "observational-noise", 0);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let d = series.n_sys();
    let data: Vec<f64> = series
        .data()
        .iter()
        .enumerate()
        .map(|(k, v)| v + sigma_rel * library_std[k % d] * normal.sample(&mut rng))
        .collect();
    Series::new(data, d, series.dt())
}

/// Keeps the listed components, in the listed order.
pub fn partial_observation(series: &Series, components: &[usize]) -> Result<Series> {
    if components.is_empty() {
        return Err(Error::InvalidArgument("no components selected".into()));
    }
    if let Some(&bad) = components.iter().find(|&&c| c >= series.n_sys()) {
        return Err(Error::Dimension(format!(
            "component {bad} out of range for {}-component series",
            series.n_sys()
        )));
    }
    let mut data = Vec::with_capacity(series.len() * components.len());
    for row in series.rows() {
        data.extend(components.iter().map(|&c| row[c]));
    }
    Series::new(data, components.len(), series.dt())
}

/// True one-step dynamics, used as `G` in the autonomous one-step error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrueDynamics {
    Map(MapParams),
    Lorenz(LorenzParams),
}

impl TrueDynamics {
    pub fn state_dim(&self) -> usize {
        match self {
            TrueDynamics::Map(_) => 1,
            TrueDynamics::Lorenz(_) => 3,
        }
    }

    /// Advances `x` by one sample interval.
    pub fn step(&self, x: &[f64]) -> Vec<f64> {
        match self {
            TrueDynamics::Map(p) => vec![p.apply(x[0])],
            TrueDynamics::Lorenz(p) => p.rk4_step(&[x[0], x[1], x[2]], p.dt).to_vec(),
        }
    }
}
