//! The two-level scheme: a library of forecaster output layers trained on
//! long signals, and a signal mapper that turns a short cue into a tailored
//! (cold-start state, output layer) pair.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RidgeAccumulator;
use crate::par::{self, Exec};
use crate::reservoir::{
    synchronize_then_forecast, train_output_layer, Forecast, Reservoir, ReservoirState, StateTrajectory,
    TrainedModel,
};
use crate::series::Series;

/// Row-major flattening of `W_out`, output dimension outermost.
pub fn flatten_model(model: &TrainedModel) -> Vec<f64> {
    flatten_matrix(&model.w_out)
}

pub fn flatten_matrix(w: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(w.len());
    for o in 0..w.nrows() {
        out.extend(w.row(o).iter());
    }
    out
}

/// Inverse of [`flatten_matrix`].
pub fn unflatten_matrix(flat: &[f64], n_out: usize, n_nodes: usize) -> Result<DMatrix<f64>> {
    if flat.len() != n_out * n_nodes {
        return Err(Error::Dimension(format!(
            "{} values cannot fill a {n_out}x{n_nodes} output layer",
            flat.len()
        )));
    }
    Ok(DMatrix::from_row_slice(n_out, n_nodes, flat))
}

/// One signal-mapper training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Triplet<'a> {
    pub source: usize,
    /// Start step `j` of the short signal within its long signal.
    pub start: usize,
    pub short_signal: Series,
    /// Forecaster state at time `jΔt`.
    pub cold_start: Vec<f64>,
    pub flat_model: &'a [f64],
}

/// Trained forecaster library plus the index of its short-signal triplets.
///
/// Triplets are not materialized: short signals are windows of the long
/// signals and cold-start vectors are rows of the stored trajectories.
#[derive(Debug, Clone)]
pub struct MetaLibrary {
    long_signals: Vec<Series>,
    models: Vec<TrainedModel>,
    trajectories: Vec<StateTrajectory>,
    flat_models: Vec<Vec<f64>>,
    triplets: Vec<(usize, usize)>,
    n_test: usize,
    n_trans: usize,
    stride: usize,
    forecaster_hash: String,
    n_nodes: usize,
}

/// Metadata describing how a library's triplets are laid out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryLayout {
    pub n_test: usize,
    pub n_trans: usize,
    pub stride: usize,
}

impl MetaLibrary {
    /// Trains one output layer per long signal (from the zero state) and
    /// indexes every short window starting at `j >= n_trans`, `stride` apart.
    pub fn build(
        forecaster: &Reservoir,
        long_signals: Vec<Series>,
        n_trans: usize,
        alpha_f: f64,
        n_test: usize,
        stride: usize,
    ) -> Result<Self> {
        Self::build_with(Exec::default(), forecaster, long_signals, n_trans, alpha_f, n_test, stride)
    }

    pub fn build_with(
        exec: Exec,
        forecaster: &Reservoir,
        long_signals: Vec<Series>,
        n_trans: usize,
        alpha_f: f64,
        n_test: usize,
        stride: usize,
    ) -> Result<Self> {
        check_layout(&long_signals, n_trans, n_test, stride)?;
        let trained = par::try_map_range(exec, long_signals.len(), |i| {
            train_output_layer(forecaster, &long_signals[i], n_trans, alpha_f)
        })?;
        let (models, trajectories) = trained.into_iter().unzip();
        Self::from_parts(forecaster, long_signals, models, trajectories, LibraryLayout { n_test, n_trans, stride })
    }

    /// Assembles a library from already-trained members.
    pub fn from_parts(
        forecaster: &Reservoir,
        long_signals: Vec<Series>,
        models: Vec<TrainedModel>,
        trajectories: Vec<StateTrajectory>,
        layout: LibraryLayout,
    ) -> Result<Self> {
        if models.len() != long_signals.len() || trajectories.len() != long_signals.len() {
            return Err(Error::Dimension("library members are not aligned".into()));
        }
        check_layout(&long_signals, layout.n_trans, layout.n_test, layout.stride)?;
        for (i, (m, t)) in models.iter().zip(&trajectories).enumerate() {
            if m.reservoir_hash != forecaster.hash() {
                return Err(Error::ReservoirMismatch {
                    expected: forecaster.hash().to_string(),
                    found: m.reservoir_hash.clone(),
                });
            }
            if t.len() != long_signals[i].len() || t.n_nodes() != forecaster.n_nodes() {
                return Err(Error::Dimension(format!("trajectory {i} does not match its signal")));
            }
        }
        let flat_models = models.iter().map(flatten_model).collect();
        let mut lib = Self {
            long_signals,
            models,
            trajectories,
            flat_models,
            triplets: Vec::new(),
            n_test: layout.n_test,
            n_trans: layout.n_trans,
            stride: layout.stride,
            forecaster_hash: forecaster.hash().to_string(),
            n_nodes: forecaster.n_nodes(),
        };
        lib.reindex();
        Ok(lib)
    }

    /// Same trained members, triplets re-cut for another cue length.
    pub fn with_layout(&self, n_test: usize, stride: usize) -> Result<Self> {
        check_layout(&self.long_signals, self.n_trans, n_test, stride)?;
        let mut lib = self.clone();
        lib.n_test = n_test;
        lib.stride = stride;
        lib.reindex();
        Ok(lib)
    }

    fn reindex(&mut self) {
        self.triplets.clear();
        for (i, s) in self.long_signals.iter().enumerate() {
            let last = s.len() - self.n_test;
            self.triplets.extend((self.n_trans..=last).step_by(self.stride).map(|j| (i, j)));
        }
    }

    pub fn len(&self) -> usize {
        self.long_signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.long_signals.is_empty()
    }

    pub fn n_short(&self) -> usize {
        self.triplets.len()
    }

    pub fn n_test(&self) -> usize {
        self.n_test
    }

    pub fn n_trans(&self) -> usize {
        self.n_trans
    }

    pub fn layout(&self) -> LibraryLayout {
        LibraryLayout { n_test: self.n_test, n_trans: self.n_trans, stride: self.stride }
    }

    pub fn n_sys(&self) -> usize {
        self.long_signals[0].n_sys()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn forecaster_hash(&self) -> &str {
        &self.forecaster_hash
    }

    pub fn long_signals(&self) -> &[Series] {
        &self.long_signals
    }

    pub fn models(&self) -> &[TrainedModel] {
        &self.models
    }

    pub fn trajectories(&self) -> &[StateTrajectory] {
        &self.trajectories
    }

    pub fn flat_model(&self, source: usize) -> &[f64] {
        &self.flat_models[source]
    }

    /// `(source, start)` of every triplet, in canonical order.
    pub fn triplet_index(&self) -> &[(usize, usize)] {
        &self.triplets
    }

    /// Forecaster state at time `start·Δt` of long signal `source`; `None`
    /// stands for the zero state at `start == 0`.
    pub fn cold_start_at(&self, source: usize, start: usize) -> Option<&[f64]> {
        start.checked_sub(1).map(|k| self.trajectories[source].row(k))
    }

    fn write_cold_start(&self, source: usize, start: usize, out: &mut [f64]) {
        if start == 0 {
            out.iter_mut().for_each(|v| *v = 0.0);
        } else {
            out.copy_from_slice(self.trajectories[source].row(start - 1));
        }
    }

    pub fn short_signal(&self, source: usize, start: usize) -> Series {
        self.long_signals[source].window(start, self.n_test)
    }

    pub fn triplet(&self, k: usize) -> Triplet<'_> {
        let (source, start) = self.triplets[k];
        let mut cold_start = vec![0.0; self.n_nodes];
        self.write_cold_start(source, start, &mut cold_start);
        Triplet {
            source,
            start,
            short_signal: self.short_signal(source, start),
            cold_start,
            flat_model: &self.flat_models[source],
        }
    }
}

fn check_layout(long_signals: &[Series], n_trans: usize, n_test: usize, stride: usize) -> Result<()> {
    if long_signals.is_empty() {
        return Err(Error::InvalidArgument("library needs at least one long signal".into()));
    }
    if n_test == 0 || stride == 0 {
        return Err(Error::InvalidArgument("n_test and stride must be positive".into()));
    }
    let d = long_signals[0].n_sys();
    for (i, s) in long_signals.iter().enumerate() {
        if s.n_sys() != d {
            return Err(Error::Dimension(format!("long signal {i} has {} components, expected {d}", s.n_sys())));
        }
        if s.len() < n_trans + n_test || s.len() <= n_trans + 1 {
            return Err(Error::TooShort(format!(
                "long signal {i} has {} points; needs more than {} for n_trans={n_trans}, n_test={n_test}",
                s.len(),
                (n_trans + n_test).max(n_trans + 2) - 1
            )));
        }
    }
    Ok(())
}

/// What the signal mapper learns to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// Cold-start vector and output layer.
    Full,
    /// Output layer only; forecasts start from the zero state.
    ModelOnly,
    /// Cold-start vector only; the library's single model is reused.
    ColdStartOnly,
}

/// Reservoir plus linear readout mapping a short cue to a tailored forecaster.
#[derive(Debug, Clone)]
pub struct SignalMapper {
    reservoir: Reservoir,
    w_sm: DMatrix<f64>,
    n_test: usize,
    alpha_sm: f64,
    targets: TargetMode,
    n_f: usize,
    n_sys: usize,
    n_short: usize,
    forecaster_hash: String,
    fixed_model: Option<TrainedModel>,
}

/// The signal mapper's output for one cue.
#[derive(Debug, Clone, PartialEq)]
pub struct TailoredForecaster {
    pub cold_start: ReservoirState,
    pub model: TrainedModel,
}

/// Triplets per ridge block; blocks are accumulated in a fixed order.
const SM_CHUNK: usize = 256;

impl SignalMapper {
    pub fn train(sm_reservoir: &Reservoir, library: &MetaLibrary, alpha_sm: f64, targets: TargetMode) -> Result<Self> {
        Self::train_with(Exec::default(), sm_reservoir, library, alpha_sm, targets)
    }

    /// Drives the mapper over every triplet from the zero state and solves one
    /// multi-output ridge regression from final states to targets.
    pub fn train_with(
        exec: Exec,
        sm_reservoir: &Reservoir,
        library: &MetaLibrary,
        alpha_sm: f64,
        targets: TargetMode,
    ) -> Result<Self> {
        let n_sys = library.n_sys();
        if sm_reservoir.n_inputs() != n_sys {
            return Err(Error::Dimension(format!(
                "signal mapper takes {} inputs, library signals have {n_sys} components",
                sm_reservoir.n_inputs()
            )));
        }
        let n_short = library.n_short();
        if n_short == 0 {
            return Err(Error::InvalidArgument("library has no short signals".into()));
        }
        let fixed_model = match targets {
            TargetMode::ColdStartOnly if library.len() != 1 => {
                return Err(Error::InvalidArgument(
                    "cold-start-only mapping needs a single-member library".into(),
                ))
            }
            TargetMode::ColdStartOnly => Some(library.models()[0].clone()),
            _ => None,
        };
        let n_f = library.n_nodes();
        let target_dim = target_dim(targets, n_f, n_sys);
        let n_sm = sm_reservoir.n_nodes();

        let n_chunks = n_short.div_ceil(SM_CHUNK);
        let group = group_size(exec);
        let mut acc = RidgeAccumulator::new(n_sm, target_dim);
        let mut first = 0;
        while first < n_chunks {
            let last = (first + group).min(n_chunks);
            let partials = par::try_map_range(exec, last - first, |g| {
                chunk_accumulator(sm_reservoir, library, targets, (first + g) * SM_CHUNK, target_dim)
            })?;
            for p in &partials {
                acc.merge(p);
            }
            first = last;
        }
        let w_sm = acc.solve(alpha_sm)?;
        Ok(Self {
            reservoir: sm_reservoir.clone(),
            w_sm,
            n_test: library.n_test(),
            alpha_sm,
            targets,
            n_f,
            n_sys,
            n_short,
            forecaster_hash: library.forecaster_hash().to_string(),
            fixed_model,
        })
    }

    /// Reassembles a trained mapper (used when loading from disk).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        reservoir: Reservoir,
        w_sm: DMatrix<f64>,
        n_test: usize,
        alpha_sm: f64,
        targets: TargetMode,
        n_f: usize,
        n_sys: usize,
        n_short: usize,
        forecaster_hash: String,
        fixed_model: Option<TrainedModel>,
    ) -> Result<Self> {
        if w_sm.nrows() != target_dim(targets, n_f, n_sys) || w_sm.ncols() != reservoir.n_nodes() {
            return Err(Error::Dimension("readout shape does not match the mapper layout".into()));
        }
        if (targets == TargetMode::ColdStartOnly) != fixed_model.is_some() {
            return Err(Error::InvalidArgument("fixed model present iff cold-start-only".into()));
        }
        Ok(Self { reservoir, w_sm, n_test, alpha_sm, targets, n_f, n_sys, n_short, forecaster_hash, fixed_model })
    }

    pub fn reservoir(&self) -> &Reservoir {
        &self.reservoir
    }

    pub fn readout(&self) -> &DMatrix<f64> {
        &self.w_sm
    }

    pub fn n_test(&self) -> usize {
        self.n_test
    }

    pub fn alpha(&self) -> f64 {
        self.alpha_sm
    }

    pub fn targets(&self) -> TargetMode {
        self.targets
    }

    pub fn n_forecaster_nodes(&self) -> usize {
        self.n_f
    }

    pub fn n_sys(&self) -> usize {
        self.n_sys
    }

    pub fn n_short(&self) -> usize {
        self.n_short
    }

    pub fn forecaster_hash(&self) -> &str {
        &self.forecaster_hash
    }

    pub fn fixed_model(&self) -> Option<&TrainedModel> {
        self.fixed_model.as_ref()
    }

    pub fn output_dim(&self) -> usize {
        self.w_sm.nrows()
    }

    /// Raw readout `W_SM r_final` for a cue.
    pub fn map_cue(&self, cue: &Series) -> Result<Vec<f64>> {
        if cue.len() != self.n_test {
            return Err(Error::Dimension(format!(
                "signal mapper was trained for cues of {} points, got {}",
                self.n_test,
                cue.len()
            )));
        }
        if cue.n_sys() != self.n_sys {
            return Err(Error::Dimension(format!(
                "cue has {} components, expected {}",
                cue.n_sys(),
                self.n_sys
            )));
        }
        let r = self.reservoir.final_state(&ReservoirState::zeros(self.reservoir.n_nodes()), cue)?;
        Ok((&self.w_sm * DVector::from_column_slice(&r.r)).as_slice().to_vec())
    }

    /// Infers a cold-start state and output layer for `cue`.
    pub fn infer(&self, cue: &Series) -> Result<TailoredForecaster> {
        let p = self.map_cue(cue)?;
        let n_f = self.n_f;
        let model_from = |flat: &[f64]| -> Result<TrainedModel> {
            Ok(TrainedModel {
                w_out: unflatten_matrix(flat, self.n_sys, n_f)?,
                reservoir_hash: self.forecaster_hash.clone(),
                alpha: self.alpha_sm,
                n_fit: self.n_short,
            })
        };
        let (cold, model) = match self.targets {
            TargetMode::Full => (p[..n_f].to_vec(), model_from(&p[n_f..])?),
            TargetMode::ModelOnly => (vec![0.0; n_f], model_from(&p)?),
            TargetMode::ColdStartOnly => (p, self.fixed_model.clone().expect("checked at construction")),
        };
        Ok(TailoredForecaster { cold_start: ReservoirState::new(cold), model })
    }
}

fn target_dim(targets: TargetMode, n_f: usize, n_sys: usize) -> usize {
    match targets {
        TargetMode::Full => n_f + n_f * n_sys,
        TargetMode::ModelOnly => n_f * n_sys,
        TargetMode::ColdStartOnly => n_f,
    }
}

fn group_size(exec: Exec) -> usize {
    match exec {
        Exec::Sequential => 1,
        #[cfg(feature = "parallel")]
        Exec::Parallel => rayon::current_num_threads().max(1),
    }
}

fn chunk_accumulator(
    sm: &Reservoir,
    library: &MetaLibrary,
    targets: TargetMode,
    begin: usize,
    target_dim: usize,
) -> Result<RidgeAccumulator> {
    let end = (begin + SM_CHUNK).min(library.n_short());
    let m = end - begin;
    let n_sm = sm.n_nodes();
    let n_f = library.n_nodes();
    let mut feats = DMatrix::zeros(n_sm, m);
    let mut tgts = DMatrix::zeros(target_dim, m);
    let zero = ReservoirState::zeros(n_sm);
    for (c, &(source, start)) in library.triplet_index()[begin..end].iter().enumerate() {
        let cue = library.short_signal(source, start);
        let r = sm.final_state(&zero, &cue)?;
        feats.column_mut(c).copy_from_slice(&r.r);
        let mut col = tgts.column_mut(c);
        let col = col.as_mut_slice();
        match targets {
            TargetMode::Full => {
                library.write_cold_start(source, start, &mut col[..n_f]);
                col[n_f..].copy_from_slice(library.flat_model(source));
            }
            TargetMode::ModelOnly => col.copy_from_slice(library.flat_model(source)),
            TargetMode::ColdStartOnly => library.write_cold_start(source, start, col),
        }
    }
    let mut acc = RidgeAccumulator::new(n_sm, target_dim);
    acc.add_columns(&feats, &tgts);
    Ok(acc)
}

/// Builds the tailored forecaster for `cue` and forecasts `n_steps` points
/// beginning one step after the cue ends.
pub fn metafors_forecast(forecaster: &Reservoir, sm: &SignalMapper, cue: &Series, n_steps: usize) -> Result<Forecast> {
    if sm.forecaster_hash() != forecaster.hash() {
        return Err(Error::ReservoirMismatch {
            expected: forecaster.hash().to_string(),
            found: sm.forecaster_hash().to_string(),
        });
    }
    let tailored = sm.infer(cue)?;
    synchronize_then_forecast(forecaster, &tailored.model, &tailored.cold_start, cue, n_steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flatten_is_row_major() {
        let w = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(flatten_matrix(&w), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(unflatten_matrix(&flatten_matrix(&w), 2, 3).unwrap(), w);
        assert_eq!(flatten_matrix(&DMatrix::zeros(2, 2)), vec![0.0; 4]);
        assert!(unflatten_matrix(&[1.0; 5], 2, 3).is_err());
    }
}
