//! Runs one configured experiment end to end.

use std::time::Instant;

use metafors::baselines::{self, LabeledLibrary, Method, ScheduleFamily};
use metafors::io::{hash_values, library_manifest};
use metafors::library::metafors_forecast;
use metafors::metrics::{autonomous_one_step_error, escapes_unit_interval, ks_distance, valid_time};
use metafors::par::{self, Exec};
use metafors::rng::{self, stream_seed};
use metafors::series::component_std;
use metafors::systems::{
    add_observational_noise, lorenz_trajectory, partial_observation, sample_chaotic_params, LorenzParams, MapKind,
    MapParams, TrueDynamics, GAUSS_B,
};
use metafors::{Forecast, MetaLibrary, Reservoir, Series, SignalMapper, TargetMode, TrainedModel};
use rand::Rng;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{HarnessError, Result};
use crate::results::{BifurcationRow, LibraryEntry, Manifest, ReplicateManifest, ResultRow, TimingRow};

/// In-memory outputs of a run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub timings: Vec<TimingRow>,
    pub manifest: Manifest,
    /// Maps only: retained forecast values of replicate 0 at the first cue
    /// length and noise setting, plus the ground truth under method `truth`.
    pub bifurcation: Vec<BifurcationRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Logistic,
    Gauss,
    Lorenz,
}

impl Family {
    fn id(self) -> &'static str {
        match self {
            Family::Logistic => "logistic",
            Family::Gauss => "gauss",
            Family::Lorenz => "lorenz",
        }
    }
}

#[derive(Debug, Clone)]
struct Member {
    family: Family,
    label: Vec<f64>,
    dynamics: TrueDynamics,
}

impl Member {
    fn map(p: MapParams) -> Self {
        let family = match p.kind {
            MapKind::Logistic => Family::Logistic,
            MapKind::Gauss => Family::Gauss,
        };
        Self { family, label: vec![p.primary()], dynamics: TrueDynamics::Map(p) }
    }

    fn lorenz(omega: f64, v1: f64) -> Self {
        Self { family: Family::Lorenz, label: vec![omega, v1], dynamics: TrueDynamics::Lorenz(LorenzParams::with(omega, v1)) }
    }

    /// Full-state trajectory with the first `n_discard` points dropped.
    fn generate(&self, n_discard: usize, len: usize, seed: u64) -> Result<Series> {
        let mut rng = rng::stream(seed, "initial-condition", 0);
        let out = match self.dynamics {
            TrueDynamics::Map(p) => p.trajectory(rng.random_range(0.01..0.99), n_discard + len, n_discard),
            TrueDynamics::Lorenz(p) => {
                let x0 = [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(10.0..40.0)];
                lorenz_trajectory(&p, x0, n_discard + len, n_discard)
            }
        };
        out.map_err(HarnessError::GroundTruth)
    }
}

fn uniform(rng: &mut impl Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

fn map_members(kind: MapKind, range: [f64; 2], n: usize, exclude_periodic: bool, seed: u64) -> Result<Vec<Member>> {
    let params = if exclude_periodic {
        sample_chaotic_params(kind, (range[0], range[1]), n, seed)?
    } else {
        let mut rng = rng::stream(seed, "map-params", 0);
        (0..n)
            .map(|_| {
                let v = uniform(&mut rng, range);
                match kind {
                    MapKind::Logistic => MapParams::logistic(v),
                    MapKind::Gauss => MapParams::gauss(v, GAUSS_B),
                }
            })
            .collect()
    };
    Ok(params.into_iter().map(Member::map).collect())
}

fn library_members(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Member>> {
    let lib = &cfg.library;
    let n = lib.members;
    let params_seed = |k: u64| stream_seed(seed, "library-params", k);
    Ok(match cfg.experiment {
        ExperimentKind::LogisticBifurcation => {
            map_members(MapKind::Logistic, lib.mu.unwrap(), n, lib.exclude_periodic, params_seed(0))?
        }
        ExperimentKind::DualMapBifurcation => {
            let mut m = map_members(MapKind::Logistic, lib.mu.unwrap(), n, lib.exclude_periodic, params_seed(0))?;
            m.extend(map_members(MapKind::Gauss, lib.a.unwrap(), n, lib.exclude_periodic, params_seed(1))?);
            m
        }
        _ => {
            let mut rng = rng::stream(params_seed(2), "lorenz-params", 0);
            (0..n)
                .map(|_| {
                    let omega = uniform(&mut rng, lib.omega.unwrap());
                    let v1 = uniform(&mut rng, lib.v1.unwrap());
                    Member::lorenz(omega, v1)
                })
                .collect()
        }
    })
}

fn test_points(cfg: &ExperimentConfig) -> Vec<Member> {
    let t = &cfg.test;
    match cfg.experiment {
        ExperimentKind::LogisticBifurcation => {
            t.mu.as_ref().unwrap().points().into_iter().map(|m| Member::map(MapParams::logistic(m))).collect()
        }
        ExperimentKind::DualMapBifurcation => {
            let mut v: Vec<Member> =
                t.mu.as_ref().unwrap().points().into_iter().map(|m| Member::map(MapParams::logistic(m))).collect();
            v.extend(t.a.as_ref().unwrap().points().into_iter().map(|a| Member::map(MapParams::gauss(a, GAUSS_B))));
            v
        }
        _ => {
            let omegas = t.omega.as_ref().unwrap().points();
            let v1s = t.v1.as_ref().unwrap().points();
            omegas.iter().flat_map(|&o| v1s.iter().map(move |&v| Member::lorenz(o, v))).collect()
        }
    }
}

/// Per-family labeled sub-libraries for the parameter-based baselines.
fn labeled_libraries(members: &[Member], models: &[TrainedModel]) -> Result<Vec<(Family, LabeledLibrary)>> {
    let mut out: Vec<(Family, LabeledLibrary)> = Vec::new();
    for fam in [Family::Logistic, Family::Gauss, Family::Lorenz] {
        let idx: Vec<usize> = (0..members.len()).filter(|&i| members[i].family == fam).collect();
        if idx.is_empty() {
            continue;
        }
        let lib = LabeledLibrary::new(
            idx.iter().map(|&i| models[i].clone()).collect(),
            idx.iter().map(|&i| members[i].label.clone()).collect(),
        )?;
        out.push((fam, lib));
    }
    Ok(out)
}

/// Artifacts shared by every test point at one cue length.
struct Trained<'a> {
    forecaster: &'a Reservoir,
    library: &'a MetaLibrary,
    labeled: &'a [(Family, LabeledLibrary)],
    multitask: Option<&'a TrainedModel>,
    sm_full: Option<SignalMapper>,
    sm_model_only: Option<SignalMapper>,
}

impl Trained<'_> {
    fn labeled(&self, fam: Family) -> &LabeledLibrary {
        &self.labeled.iter().find(|(f, _)| *f == fam).expect("every test family has library members").1
    }

    /// `None` when the method does not apply at this cue length.
    fn forecast(&self, cfg: &ExperimentConfig, m: Method, point: &Member, cue: &Series) -> Result<Option<Forecast>> {
        let f = self.forecaster;
        let n = cfg.data.n_for;
        let zero_start = |model: &TrainedModel| baselines::zero_start_forecast(f, model, cue, n);
        let out = match m {
            Method::Metafors => metafors_forecast(f, self.sm_full.as_ref().unwrap(), cue, n)?,
            Method::MetaforsZeroStart => zero_start(&self.sm_model_only.as_ref().unwrap().infer(cue)?.model)?,
            Method::ZeroStartLibrary(k) => zero_start(&self.library.models()[k])?,
            Method::Multitask => zero_start(self.multitask.unwrap())?,
            Method::TrainOnTest => {
                if cue.len() < 2 {
                    return Ok(None);
                }
                let family = if cfg.experiment.is_map() { ScheduleFamily::Map } else { ScheduleFamily::Lorenz };
                zero_start(&baselines::train_on_test(f, cue, family, cfg.forecaster.alpha)?)?
            }
            Method::Nearest => zero_start(self.labeled(point.family).nearest_model(&point.label)?)?,
            Method::Interp => {
                let lib = self.labeled(point.family);
                let model = if point.label.len() == 1 {
                    lib.interpolated_model_1d(point.label[0])?
                } else {
                    lib.interpolated_model_2d(&point.label)?
                };
                zero_start(&model)?
            }
            Method::BackwardConst => baselines::backward_extrapolation_start(f, &self.library.models()[0], cue, n)?,
            Method::TrainSearch => baselines::training_data_search_start(f, self.library, cue, n)?,
        };
        Ok(Some(out))
    }
}

struct PointResult {
    rows: Vec<ResultRow>,
    retained: Vec<(String, Vec<f64>)>,
    seconds: Vec<f64>,
}

struct TestSignal {
    /// Observed components, cue followed by the forecast window.
    observed: Series,
    noise_seed: u64,
}

/// Runs `cfg` under the given execution strategy.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    run_experiment_with(Exec::default(), cfg)
}

pub fn run_experiment_with(exec: Exec, cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let observe = cfg.observed();
    let full_state = cfg.full_state_observed();
    let d = &cfg.data;
    let max_n_test = *cfg.test.n_test.iter().max().unwrap();
    let points = test_points(cfg);
    let pairs = cfg.noise.pairs();
    let mut train_levels: Vec<f64> = Vec::new();
    for &(tr, _) in &pairs {
        if !train_levels.contains(&tr) {
            train_levels.push(tr);
        }
    }
    let needs_full = cfg.methods.contains(&Method::Metafors);
    let needs_model_only = cfg.methods.contains(&Method::MetaforsZeroStart);
    let sm_targets = if cfg.experiment == ExperimentKind::LorenzColdStartOnly {
        TargetMode::ColdStartOnly
    } else {
        TargetMode::Full
    };

    let mut rows = Vec::new();
    let mut timings = Vec::new();
    let mut bifurcation = Vec::new();
    let mut replicates = Vec::new();

    for rep in 0..cfg.seeds.replicates {
        let seed = stream_seed(cfg.seeds.root, "replicate", rep as u64);
        let time = |stage: &str, noise_train: f64, n_test: Option<usize>, start: Instant| TimingRow {
            replicate: rep,
            noise_train,
            n_test,
            stage: stage.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        };

        let t0 = Instant::now();
        let members = library_members(cfg, seed)?;
        let clean: Vec<Series> = members
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let full = m.generate(d.n_discard, d.n_train, stream_seed(seed, "library-signal", i as u64))?;
                Ok(partial_observation(&full, &observe)?)
            })
            .collect::<Result<_>>()?;
        let lib_std = component_std(&clean);
        let tests: Vec<TestSignal> = points
            .iter()
            .enumerate()
            .map(|(p, m)| {
                let full = m.generate(d.n_discard, max_n_test + d.n_for, stream_seed(seed, "test-signal", p as u64))?;
                Ok(TestSignal {
                    observed: partial_observation(&full, &observe)?,
                    noise_seed: stream_seed(seed, "test-noise", p as u64),
                })
            })
            .collect::<Result<_>>()?;
        let mut test_values = Vec::new();
        for t in &tests {
            test_values.extend_from_slice(t.observed.data());
        }
        timings.push(time("signals", 0.0, None, t0));

        let forecaster = Reservoir::build(&cfg.forecaster.spec(observe.len(), stream_seed(seed, "forecaster", 0)))?;
        let sm_res = Reservoir::build(&cfg.signal_mapper.spec(observe.len(), stream_seed(seed, "signal-mapper", 0)))?;
        let mut lib_entries = Vec::new();

        for &noise_train in &train_levels {
            let t0 = Instant::now();
            let signals: Vec<Series> = clean
                .iter()
                .enumerate()
                .map(|(i, s)| add_observational_noise(s, noise_train, &lib_std, stream_seed(seed, "train-noise", i as u64)))
                .collect::<metafors::Result<_>>()?;
            let base = MetaLibrary::build_with(
                exec,
                &forecaster,
                signals,
                d.n_trans,
                cfg.forecaster.alpha,
                cfg.test.n_test[0],
                d.stride,
            )?;
            timings.push(time("library", noise_train, None, t0));
            lib_entries.push(LibraryEntry { noise_train, library: library_manifest(&base) });
            let labeled = labeled_libraries(&members, base.models())?;
            let multitask = if cfg.methods.contains(&Method::Multitask) {
                let t0 = Instant::now();
                let m = baselines::train_multitask_with(
                    exec,
                    &forecaster,
                    base.long_signals(),
                    d.n_trans,
                    cfg.forecaster.alpha,
                )?;
                timings.push(time("multitask", noise_train, None, t0));
                Some(m)
            } else {
                None
            };

            for (k, &n_test) in cfg.test.n_test.iter().enumerate() {
                let library = if k == 0 { None } else { Some(base.with_layout(n_test, d.stride)?) };
                let library = library.as_ref().unwrap_or(&base);
                let mut train_sm = |targets: TargetMode, stage: &str| -> Result<SignalMapper> {
                    let t0 = Instant::now();
                    let sm = SignalMapper::train_with(exec, &sm_res, library, cfg.signal_mapper.alpha, targets)?;
                    timings.push(time(stage, noise_train, Some(n_test), t0));
                    Ok(sm)
                };
                let sm_full = if needs_full { Some(train_sm(sm_targets, "signal_mapper")?) } else { None };
                let sm_model_only =
                    if needs_model_only { Some(train_sm(TargetMode::ModelOnly, "signal_mapper_model_only")?) } else { None };
                let trained = Trained {
                    forecaster: &forecaster,
                    library,
                    labeled: &labeled,
                    multitask: multitask.as_ref(),
                    sm_full,
                    sm_model_only,
                };

                for &(_, noise_test) in pairs.iter().filter(|(tr, _)| *tr == noise_train) {
                    let keep = rep == 0 && k == 0 && noise_test == pairs[0].1 && noise_train == pairs[0].0;
                    let results = par::try_map_range(exec, points.len(), |p| {
                        evaluate_point(cfg, &trained, &points[p], &tests[p], p, n_test, (noise_train, noise_test), &lib_std, (rep, seed), full_state, keep)
                    })?;
                    let mut per_method = vec![0.0; cfg.methods.len()];
                    for (p, r) in results.into_iter().enumerate() {
                        rows.extend(r.rows);
                        for (acc, s) in per_method.iter_mut().zip(&r.seconds) {
                            *acc += s;
                        }
                        if keep && cfg.experiment.is_map() {
                            let pt = &points[p];
                            for (method, values) in r.retained {
                                bifurcation.extend(values.into_iter().map(|value| BifurcationRow {
                                    method: method.clone(),
                                    family: pt.family.id().into(),
                                    param: pt.label[0],
                                    n_test,
                                    value,
                                }));
                            }
                        }
                    }
                    for (m, s) in cfg.methods.iter().zip(per_method) {
                        timings.push(TimingRow {
                            replicate: rep,
                            noise_train,
                            n_test: Some(n_test),
                            stage: format!("forecast:{m}@noise={noise_test}"),
                            seconds: s,
                        });
                    }
                }
            }
        }

        replicates.push(ReplicateManifest {
            replicate: rep,
            seed,
            forecaster_hash: forecaster.hash().to_string(),
            signal_mapper_hash: sm_res.hash().to_string(),
            library_params: members.iter().map(|m| m.label.clone()).collect(),
            libraries: lib_entries,
            test_signals_sha256: hash_values(&test_values),
        });
    }

    let manifest = Manifest {
        experiment: cfg.experiment.to_string(),
        root_seed: cfg.seeds.root,
        config: cfg.to_toml_string(),
        replicates,
        notes: vec![
            "valid time normalizes by the population std of the truth over the forecast window".into(),
            "censored valid times are recorded at the horizon with censored = true".into(),
            "cues are the first n_test points after the discard; truth follows the cue".into(),
        ],
        results_sha256: None,
    };
    Ok(RunOutput { rows, timings, manifest, bifurcation })
}

#[allow(clippy::too_many_arguments)]
fn evaluate_point(
    cfg: &ExperimentConfig,
    trained: &Trained<'_>,
    point: &Member,
    test: &TestSignal,
    test_index: usize,
    n_test: usize,
    (noise_train, noise_test): (f64, f64),
    lib_std: &[f64],
    (replicate, seed): (usize, u64),
    full_state: bool,
    keep: bool,
) -> Result<PointResult> {
    let d = &cfg.data;
    let cue = add_observational_noise(&test.observed.window(0, n_test), noise_test, lib_std, test.noise_seed)?;
    let truth = test.observed.window(n_test, d.n_for);
    let truth_tail = truth.column(0).split_off(d.n_eval_discard);
    let is_map = cfg.experiment.is_map();
    let mut out = PointResult { rows: Vec::new(), retained: Vec::new(), seconds: Vec::new() };
    if keep && is_map {
        out.retained.push(("truth".into(), truth_tail.clone()));
    }
    for &m in &cfg.methods {
        let t0 = Instant::now();
        let forecast = trained.forecast(cfg, m, point, &cue)?;
        out.seconds.push(t0.elapsed().as_secs_f64());
        let Some(forecast) = forecast else { continue };
        let pred = &forecast.values;
        let vt = valid_time(pred, &truth)?;
        let (epsilon, diverged) = if full_state {
            let e = autonomous_one_step_error(pred, &point.dynamics, d.n_eval_discard)?;
            (Some(e.epsilon), e.diverged)
        } else {
            (None, forecast.diverged)
        };
        let (escaped, ks) = if is_map {
            let xs = pred.column(0);
            let tail = &xs[d.n_eval_discard..];
            if keep {
                out.retained.push((m.to_string(), tail.to_vec()));
            }
            (Some(escapes_unit_interval(&xs)), Some(ks_distance(tail, &truth_tail)?))
        } else {
            (None, None)
        };
        out.rows.push(ResultRow {
            experiment: cfg.experiment.to_string(),
            method: m.to_string(),
            replicate,
            seed,
            family: point.family.id().into(),
            param0: point.label[0],
            param1: point.label.get(1).copied(),
            test_index,
            n_test,
            noise_test,
            noise_train,
            t_valid: vt.t_valid,
            censored: vt.censored,
            epsilon,
            diverged,
            escaped,
            ks_distance: ks,
        });
    }
    Ok(out)
}
