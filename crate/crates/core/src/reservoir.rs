//! Fixed random reservoirs, ridge-trained output layers and open/closed-loop
//! operation.
//!
//! The state update is `r ← (1-λ) r + λ tanh(A r + B u + c)`. In open loop `u`
//! is an external input; in closed loop it is the model's own previous output
//! `û = W_out r`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{spectral_radius, CsrMatrix, RidgeAccumulator};
use crate::rng;
use crate::series::Series;

/// Hyperparameters that fully determine a reservoir realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirSpec {
    pub n_nodes: usize,
    pub mean_in_degree: f64,
    pub spectral_radius: f64,
    pub input_strength: f64,
    pub bias_strength: f64,
    pub leakage: f64,
    pub n_inputs: usize,
    pub seed: u64,
}

/// Column of the hyperparameter table a reservoir is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Testbed {
    Logistic,
    DualMap,
    Lorenz,
}

pub const FORECASTER_NODES: usize = 500;
pub const SIGNAL_MAPPER_NODES: usize = 1000;
pub const FORECASTER_ALPHA: f64 = 1e-6;
pub const SIGNAL_MAPPER_ALPHA: f64 = 1e-8;

impl Testbed {
    fn input_strength(self) -> f64 {
        match self {
            Testbed::Logistic => 2.5,
            Testbed::DualMap => 4.0,
            Testbed::Lorenz => 0.1,
        }
    }
}

impl ReservoirSpec {
    /// Forecaster hyperparameters for the given testbed.
    pub fn forecaster(testbed: Testbed, n_inputs: usize, seed: u64) -> Self {
        let (rho, leak) = match testbed {
            Testbed::Logistic | Testbed::DualMap => (0.2, 0.2),
            Testbed::Lorenz => (0.9, 0.1),
        };
        Self {
            n_nodes: FORECASTER_NODES,
            mean_in_degree: 3.0,
            spectral_radius: rho,
            input_strength: testbed.input_strength(),
            bias_strength: 0.5,
            leakage: leak,
            n_inputs,
            seed,
        }
    }

    /// Signal-mapper hyperparameters for the given testbed.
    pub fn signal_mapper(testbed: Testbed, n_inputs: usize, seed: u64) -> Self {
        Self {
            n_nodes: SIGNAL_MAPPER_NODES,
            mean_in_degree: 3.0,
            spectral_radius: 0.9,
            input_strength: testbed.input_strength(),
            bias_strength: 0.5,
            leakage: 0.1,
            n_inputs,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_nodes == 0 {
            return bad("reservoir needs at least one node".into());
        }
        if self.n_inputs == 0 {
            return bad("reservoir needs at least one input".into());
        }
        if !(0.0..=1.0).contains(&self.leakage) {
            return bad(format!("leakage {} outside [0, 1]", self.leakage));
        }
        if !(self.spectral_radius >= 0.0 && self.spectral_radius.is_finite()) {
            return bad(format!("spectral radius {} must be >= 0", self.spectral_radius));
        }
        if !(self.mean_in_degree >= 0.0 && self.input_strength >= 0.0 && self.bias_strength >= 0.0) {
            return bad("degree, input strength and bias strength must be >= 0".into());
        }
        Ok(())
    }
}

/// An immutable reservoir realization `(A, B, c, λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reservoir {
    spec: ReservoirSpec,
    adjacency: CsrMatrix,
    /// `n_nodes × n_inputs`, row-major.
    input: Vec<f64>,
    bias: Vec<f64>,
    hash: String,
}

const MAX_ADJACENCY_ATTEMPTS: usize = 64;
const ZERO_RADIUS: f64 = 1e-12;

impl Reservoir {
    /// Samples a reservoir from its spec. Deterministic in `spec.seed`.
    pub fn build(spec: &ReservoirSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n_nodes;
        let p = (spec.mean_in_degree / n as f64).min(1.0);
        let mut adjacency = None;
        for attempt in 0..MAX_ADJACENCY_ATTEMPTS {
            let mut rng = rng::stream(spec.seed, "adjacency", attempt as u64);
            let mut triplets = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if rng.random::<f64>() < p {
                        triplets.push((i, j, rng.random_range(-1.0..1.0)));
                    }
                }
            }
            let mut a = CsrMatrix::from_triplets(n, &triplets)?;
            if spec.spectral_radius == 0.0 {
                a.scale(0.0);
                adjacency = Some(a);
                break;
            }
            match spectral_radius(&a) {
                Some(r) if r > ZERO_RADIUS => {
                    a.scale(spec.spectral_radius / r);
                    adjacency = Some(a);
                    break;
                }
                _ => continue,
            }
        }
        let adjacency = adjacency.ok_or(Error::DegenerateReservoir(MAX_ADJACENCY_ATTEMPTS))?;

        let mut rng = rng::stream(spec.seed, "input", 0);
        let sigma = spec.input_strength;
        let input = (0..n * spec.n_inputs)
            .map(|_| if sigma > 0.0 { rng.random_range(-sigma..=sigma) } else { 0.0 })
            .collect();
        let mut rng = rng::stream(spec.seed, "bias", 0);
        let psi = spec.bias_strength;
        let bias = (0..n).map(|_| if psi > 0.0 { rng.random_range(-psi..=psi) } else { 0.0 }).collect();
        Ok(Self::from_parts(spec.clone(), adjacency, input, bias))
    }

    /// Assembles a reservoir from explicit weights (no rescaling).
    pub fn from_parts(spec: ReservoirSpec, adjacency: CsrMatrix, input: Vec<f64>, bias: Vec<f64>) -> Self {
        assert_eq!(adjacency.dim(), spec.n_nodes);
        assert_eq!(input.len(), spec.n_nodes * spec.n_inputs);
        assert_eq!(bias.len(), spec.n_nodes);
        let hash = Self::compute_hash(&spec, &adjacency, &input, &bias);
        Self { spec, adjacency, input, bias, hash }
    }

    fn compute_hash(spec: &ReservoirSpec, a: &CsrMatrix, input: &[f64], bias: &[f64]) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(spec).expect("spec serializes"));
        for (i, j, v) in a.triplets() {
            h.update((i as u64).to_le_bytes());
            h.update((j as u64).to_le_bytes());
            h.update(v.to_le_bytes());
        }
        input.iter().chain(bias).for_each(|v| h.update(v.to_le_bytes()));
        hex::encode(&h.finalize()[..16])
    }

    pub fn spec(&self) -> &ReservoirSpec {
        &self.spec
    }

    pub fn n_nodes(&self) -> usize {
        self.spec.n_nodes
    }

    pub fn n_inputs(&self) -> usize {
        self.spec.n_inputs
    }

    pub fn leakage(&self) -> f64 {
        self.spec.leakage
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    pub fn input_matrix(&self) -> &[f64] {
        &self.input
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Identity token covering the spec and every weight.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// One update: `out = (1-λ) r + λ tanh(A r + B u + c)`.
    #[inline]
    pub fn step(&self, r: &[f64], u: &[f64], out: &mut [f64]) {
        let lam = self.spec.leakage;
        let m = self.spec.n_inputs;
        for i in 0..self.spec.n_nodes {
            let b = &self.input[i * m..(i + 1) * m];
            let mut act = self.adjacency.row_dot(i, r) + self.bias[i];
            for (bij, uj) in b.iter().zip(u) {
                act += bij * uj;
            }
            out[i] = (1.0 - lam) * r[i] + lam * act.tanh();
        }
    }

    fn check_inputs(&self, inputs: &Series) -> Result<()> {
        if inputs.n_sys() != self.n_inputs() {
            return Err(Error::Dimension(format!(
                "reservoir takes {} inputs, series has {} components",
                self.n_inputs(),
                inputs.n_sys()
            )));
        }
        Ok(())
    }

    fn check_state(&self, r: &ReservoirState) -> Result<()> {
        if r.r.len() != self.n_nodes() {
            return Err(Error::Dimension(format!(
                "state has {} entries, reservoir has {} nodes",
                r.r.len(),
                self.n_nodes()
            )));
        }
        Ok(())
    }

    /// Drives the reservoir with `inputs`; row `k` of the result is the state
    /// after consuming input rows `0..=k`.
    pub fn drive_open_loop(&self, r0: &ReservoirState, inputs: &Series) -> Result<StateTrajectory> {
        self.check_inputs(inputs)?;
        self.check_state(r0)?;
        let n = self.n_nodes();
        let mut states = Vec::with_capacity(inputs.len() * n);
        let mut r = r0.r.clone();
        let mut next = vec![0.0; n];
        for u in inputs.rows() {
            self.step(&r, u, &mut next);
            states.extend_from_slice(&next);
            std::mem::swap(&mut r, &mut next);
        }
        Ok(StateTrajectory { states, n_nodes: n, start_time: r0.t + inputs.dt() })
    }

    /// Final state after consuming every row of `inputs` (no trajectory kept).
    pub fn final_state(&self, r0: &ReservoirState, inputs: &Series) -> Result<ReservoirState> {
        self.check_inputs(inputs)?;
        self.check_state(r0)?;
        let mut r = r0.r.clone();
        let mut next = vec![0.0; self.n_nodes()];
        for u in inputs.rows() {
            self.step(&r, u, &mut next);
            std::mem::swap(&mut r, &mut next);
        }
        Ok(ReservoirState { r, t: r0.t + inputs.len() as f64 * inputs.dt() })
    }
}

/// Reservoir node activations at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirState {
    pub r: Vec<f64>,
    pub t: f64,
}

impl ReservoirState {
    pub fn zeros(n: usize) -> Self {
        Self { r: vec![0.0; n], t: 0.0 }
    }

    pub fn new(r: Vec<f64>) -> Self {
        Self { r, t: 0.0 }
    }
}

/// Row-major `len × n_nodes` record of driven states.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    states: Vec<f64>,
    n_nodes: usize,
    start_time: f64,
}

impl StateTrajectory {
    pub fn from_raw(states: Vec<f64>, n_nodes: usize, start_time: f64) -> Self {
        assert!(n_nodes > 0 && states.len().is_multiple_of(n_nodes));
        Self { states, n_nodes, start_time }
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.n_nodes
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.states[k * self.n_nodes..(k + 1) * self.n_nodes]
    }

    pub fn last(&self) -> Option<&[f64]> {
        (!self.is_empty()).then(|| self.row(self.len() - 1))
    }

    pub fn data(&self) -> &[f64] {
        &self.states
    }
}

/// A trained output layer `W_out` (`n_out × n_nodes`) bound to one reservoir.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub w_out: DMatrix<f64>,
    pub reservoir_hash: String,
    pub alpha: f64,
    pub n_fit: usize,
}

impl TrainedModel {
    pub fn new(w_out: DMatrix<f64>, reservoir: &Reservoir, alpha: f64, n_fit: usize) -> Self {
        Self { w_out, reservoir_hash: reservoir.hash().to_string(), alpha, n_fit }
    }

    pub fn n_out(&self) -> usize {
        self.w_out.nrows()
    }

    /// `out = W_out r`, summing over nodes in ascending order.
    #[inline]
    pub fn output(&self, r: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (k, rk) in r.iter().enumerate() {
            let col = self.w_out.column(k);
            for (o, w) in out.iter_mut().zip(col.iter()) {
                *o += w * rk;
            }
        }
    }

    fn check(&self, res: &Reservoir) -> Result<()> {
        if self.reservoir_hash != res.hash() {
            return Err(Error::ReservoirMismatch {
                expected: res.hash().to_string(),
                found: self.reservoir_hash.clone(),
            });
        }
        if self.w_out.ncols() != res.n_nodes() {
            return Err(Error::Dimension(format!(
                "output layer has {} columns for {} nodes",
                self.w_out.ncols(),
                res.n_nodes()
            )));
        }
        Ok(())
    }
}

/// Adds the fitting pairs of one driven training series to `acc`.
///
/// Trajectory row `k` is the state at time `(k+1)Δt` and is paired with input
/// row `k+1`, for `k` in `n_trans..len-1`.
pub(crate) fn accumulate_fit(acc: &mut RidgeAccumulator, traj: &StateTrajectory, training: &Series, n_trans: usize) {
    const BLOCK: usize = 1024;
    let n = traj.n_nodes();
    let d = training.n_sys();
    let last = training.len() - 1;
    let mut k = n_trans;
    while k < last {
        let m = BLOCK.min(last - k);
        let feats = DMatrix::from_column_slice(n, m, &traj.data()[k * n..(k + m) * n]);
        let targets = DMatrix::from_column_slice(d, m, &training.data()[(k + 1) * d..(k + 1 + m) * d]);
        acc.add_columns(&feats, &targets);
        k += m;
    }
}

pub(crate) fn check_training_length(training: &Series, n_trans: usize) -> Result<()> {
    if training.len() <= n_trans + 1 {
        return Err(Error::TooShort(format!(
            "training series of {} points leaves no fitting pairs after a transient of {n_trans}",
            training.len()
        )));
    }
    Ok(())
}

/// Drives `res` from the zero state over `training` and fits `W_out` by ridge
/// regression on the post-transient pairs. Returns the model and the full
/// state trajectory.
pub fn train_output_layer(
    res: &Reservoir,
    training: &Series,
    n_trans: usize,
    alpha: f64,
) -> Result<(TrainedModel, StateTrajectory)> {
    check_training_length(training, n_trans)?;
    let traj = res.drive_open_loop(&ReservoirState::zeros(res.n_nodes()), training)?;
    let mut acc = RidgeAccumulator::new(res.n_nodes(), training.n_sys());
    accumulate_fit(&mut acc, &traj, training, n_trans);
    let w = acc.solve(alpha)?;
    Ok((TrainedModel::new(w, res, alpha, acc.count()), traj))
}

/// Closed-loop model output.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub values: Series,
    /// Some prediction was non-finite.
    pub diverged: bool,
}

impl Forecast {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn closed_loop(
    res: &Reservoir,
    model: &TrainedModel,
    r_init: &ReservoirState,
    n_steps: usize,
    emit_initial: bool,
    mut states: Option<&mut Vec<f64>>,
    dt: f64,
) -> Result<Forecast> {
    model.check(res)?;
    res.check_state(r_init)?;
    if model.n_out() != res.n_inputs() {
        return Err(Error::Dimension(format!(
            "closed loop needs n_out ({}) = n_inputs ({})",
            model.n_out(),
            res.n_inputs()
        )));
    }
    let d = model.n_out();
    let mut values = Vec::with_capacity(n_steps * d);
    let mut r = r_init.r.clone();
    let mut next = vec![0.0; res.n_nodes()];
    let mut u = vec![0.0; d];
    if n_steps > 0 {
        model.output(&r, &mut u);
        let mut remaining = n_steps;
        if emit_initial {
            values.extend_from_slice(&u);
            remaining -= 1;
        }
        for _ in 0..remaining {
            res.step(&r, &u, &mut next);
            std::mem::swap(&mut r, &mut next);
            if let Some(s) = states.as_deref_mut() {
                s.extend_from_slice(&r);
            }
            model.output(&r, &mut u);
            values.extend_from_slice(&u);
        }
    }
    let diverged = values.iter().any(|v| !v.is_finite());
    Ok(Forecast { values: Series::from_raw(values, d, dt), diverged })
}

/// Runs the trained reservoir autonomously from `r_init` for `n_steps`.
///
/// The first feedback input is `W_out r_init`; the first emitted prediction is
/// `W_out` applied to the first updated state.
pub fn forecast_closed_loop(
    res: &Reservoir,
    model: &TrainedModel,
    r_init: &ReservoirState,
    n_steps: usize,
) -> Result<Forecast> {
    closed_loop(res, model, r_init, n_steps, false, None, 1.0)
}

/// [`forecast_closed_loop`] that also returns the visited reservoir states.
pub fn forecast_closed_loop_with_states(
    res: &Reservoir,
    model: &TrainedModel,
    r_init: &ReservoirState,
    n_steps: usize,
) -> Result<(Forecast, StateTrajectory)> {
    let mut states = Vec::with_capacity(n_steps * res.n_nodes());
    let f = closed_loop(res, model, r_init, n_steps, false, Some(&mut states), 1.0)?;
    Ok((f, StateTrajectory::from_raw(states, res.n_nodes(), r_init.t + 1.0)))
}

/// Synchronizes from `r_init` through every row of `sync`, then forecasts.
///
/// Prediction row 0 is `W_out` applied to the synchronized state (the first
/// output fed back); the remaining `n_steps - 1` rows are the closed-loop
/// forecast from that state.
pub fn synchronize_then_forecast(
    res: &Reservoir,
    model: &TrainedModel,
    r_init: &ReservoirState,
    sync: &Series,
    n_steps: usize,
) -> Result<Forecast> {
    if sync.is_empty() {
        return Err(Error::TooShort("sync signal is empty".into()));
    }
    let synced = res.final_state(r_init, sync)?;
    closed_loop(res, model, &synced, n_steps, true, None, sync.dt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec(seed: u64) -> ReservoirSpec {
        ReservoirSpec {
            n_nodes: 5,
            mean_in_degree: 2.0,
            spectral_radius: 0.8,
            input_strength: 0.5,
            bias_strength: 0.3,
            leakage: 0.6,
            n_inputs: 1,
            seed,
        }
    }

    #[test]
    fn build_is_deterministic() {
        let a = Reservoir::build(&tiny_spec(3)).unwrap();
        let b = Reservoir::build(&tiny_spec(3)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.hash(), Reservoir::build(&tiny_spec(4)).unwrap().hash());
    }

    #[test]
    fn zero_input_strength_gives_zero_b() {
        let mut spec = tiny_spec(1);
        spec.input_strength = 0.0;
        let r = Reservoir::build(&spec).unwrap();
        assert!(r.input_matrix().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn entries_respect_strength_bounds() {
        let r = Reservoir::build(&ReservoirSpec::forecaster(Testbed::Logistic, 1, 9)).unwrap();
        assert!(r.input_matrix().iter().all(|v| v.abs() <= 2.5));
        assert!(r.bias().iter().all(|v| v.abs() <= 0.5));
    }

    #[test]
    fn invalid_spec_rejected() {
        let mut spec = tiny_spec(1);
        spec.leakage = 1.5;
        assert!(Reservoir::build(&spec).is_err());
        spec.leakage = 0.5;
        spec.n_nodes = 0;
        assert!(Reservoir::build(&spec).is_err());
    }

    #[test]
    fn zero_leakage_freezes_state() {
        let mut spec = tiny_spec(2);
        spec.leakage = 0.0;
        let res = Reservoir::build(&spec).unwrap();
        let r0 = ReservoirState::new(vec![0.1, -0.2, 0.3, 0.0, 0.5]);
        let inputs = Series::scalar(vec![1.0, -3.0, 2.0], 1.0).unwrap();
        let traj = res.drive_open_loop(&r0, &inputs).unwrap();
        for k in 0..traj.len() {
            assert_eq!(traj.row(k), &r0.r[..]);
        }
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let res = Reservoir::build(&tiny_spec(2)).unwrap();
        let inputs = Series::new(vec![1.0, 2.0], 2, 1.0).unwrap();
        assert!(res.drive_open_loop(&ReservoirState::zeros(5), &inputs).is_err());
        let ok = Series::scalar(vec![1.0], 1.0).unwrap();
        assert!(res.drive_open_loop(&ReservoirState::zeros(4), &ok).is_err());
    }

    #[test]
    fn empty_forecasts() {
        let res = Reservoir::build(&tiny_spec(2)).unwrap();
        let model = TrainedModel::new(DMatrix::from_element(1, 5, 0.1), &res, 0.0, 0);
        let z = ReservoirState::zeros(5);
        assert!(forecast_closed_loop(&res, &model, &z, 0).unwrap().is_empty());
        let sync = Series::scalar(vec![0.3, 0.4], 1.0).unwrap();
        assert!(synchronize_then_forecast(&res, &model, &z, &sync, 0).unwrap().is_empty());
    }

    #[test]
    fn foreign_model_rejected() {
        let res = Reservoir::build(&tiny_spec(2)).unwrap();
        let other = Reservoir::build(&tiny_spec(5)).unwrap();
        let model = TrainedModel::new(DMatrix::zeros(1, 5), &other, 0.0, 0);
        assert!(matches!(
            forecast_closed_loop(&res, &model, &ReservoirState::zeros(5), 3),
            Err(Error::ReservoirMismatch { .. })
        ));
    }

    #[test]
    fn training_needs_pairs() {
        let res = Reservoir::build(&tiny_spec(2)).unwrap();
        let s = Series::scalar(vec![0.1, 0.2, 0.3], 1.0).unwrap();
        assert!(train_output_layer(&res, &s, 2, 1e-6).is_err());
        let (m, traj) = train_output_layer(&res, &s, 1, 1e-6).unwrap();
        assert_eq!(m.n_fit, 1);
        assert_eq!(traj.len(), 3);
    }
}
