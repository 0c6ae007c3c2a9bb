//! Experiment configuration.
//!
//! A config file names an experiment and overrides any subset of the preset
//! it starts from; everything else comes from the preset. Unknown keys are
//! errors.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use metafors::baselines::Method;
use metafors::reservoir::{
    ReservoirSpec, Testbed, FORECASTER_ALPHA, FORECASTER_NODES, SIGNAL_MAPPER_ALPHA, SIGNAL_MAPPER_NODES,
};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    LogisticBifurcation,
    DualMapBifurcation,
    LorenzGrid,
    LorenzColdStartOnly,
    LorenzValidTimeVsNtest,
    NoiseSweep,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::LogisticBifurcation,
        ExperimentKind::DualMapBifurcation,
        ExperimentKind::LorenzGrid,
        ExperimentKind::LorenzColdStartOnly,
        ExperimentKind::LorenzValidTimeVsNtest,
        ExperimentKind::NoiseSweep,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ExperimentKind::LogisticBifurcation => "logistic_bifurcation",
            ExperimentKind::DualMapBifurcation => "dual_map_bifurcation",
            ExperimentKind::LorenzGrid => "lorenz_grid",
            ExperimentKind::LorenzColdStartOnly => "lorenz_cold_start_only",
            ExperimentKind::LorenzValidTimeVsNtest => "lorenz_valid_time_vs_ntest",
            ExperimentKind::NoiseSweep => "noise_sweep",
        }
    }

    pub fn is_map(self) -> bool {
        matches!(self, ExperimentKind::LogisticBifurcation | ExperimentKind::DualMapBifurcation)
    }

    pub fn testbed(self) -> Testbed {
        match self {
            ExperimentKind::LogisticBifurcation => Testbed::Logistic,
            ExperimentKind::DualMapBifurcation => Testbed::DualMap,
            _ => Testbed::Lorenz,
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            ExperimentKind::LogisticBifurcation => "logistic-map library, bifurcation sweep over mu",
            ExperimentKind::DualMapBifurcation => "mixed logistic/Gauss library, sweeps over mu and a",
            ExperimentKind::LorenzGrid => "fully observed Lorenz, (omega, v1) test grid",
            ExperimentKind::LorenzColdStartOnly => "single Lorenz library signal, x3 only, cold start vs cue length",
            ExperimentKind::LorenzValidTimeVsNtest => "x3-only Lorenz grid, valid time vs cue length",
            ExperimentKind::NoiseSweep => "fully observed Lorenz grid with observational noise on cues",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ExperimentKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown experiment {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Desk,
    /// Full-resolution settings; long running.
    Paper,
}

impl FromStr for Scale {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            _ => Err(HarnessError::Config(format!("unknown preset scale {s:?} (desk|paper)"))),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Desk => "desk",
            Scale::Paper => "paper",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub root: u64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Generated points dropped before every library and test signal.
    pub n_discard: usize,
    pub n_train: usize,
    pub n_trans: usize,
    /// Optional; must equal `n_train - n_trans - 1` when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_fit: Option<usize>,
    pub n_for: usize,
    /// Predicted points dropped before one-step error, CDFs and bifurcation data.
    pub n_eval_discard: usize,
    pub stride: usize,
    /// Observed state components; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observe: Option<Vec<usize>>,
}

/// Closed interval a library parameter is drawn from.
pub type Range = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LibraryConfig {
    /// Library size (per map family in the dual-map experiment).
    pub members: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Range>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Range>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Range>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v1: Option<Range>,
    /// Redraw map parameters whose attractor is periodic.
    #[serde(default = "yes")]
    pub exclude_periodic: bool,
}

fn yes() -> bool {
    true
}

/// Evenly spaced points (`count` over `[min, max]`) followed by `values`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default)]
    pub count: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
}

impl Axis {
    pub fn linspace(min: f64, max: f64, count: usize) -> Self {
        Self { min: Some(min), max: Some(max), count, values: Vec::new() }
    }

    pub fn points(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.count + self.values.len());
        if let (Some(lo), Some(hi)) = (self.min, self.max) {
            match self.count {
                0 => {}
                1 => out.push(lo),
                n => out.extend((0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)),
            }
        }
        out.extend(&self.values);
        out
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.count > 0 && (self.min.is_none() || self.max.is_none()) {
            return Err(HarnessError::Config(format!("test.{name}: count needs min and max")));
        }
        if self.points().is_empty() {
            return Err(HarnessError::Config(format!("test.{name} has no points")));
        }
        if self.points().iter().any(|v| !v.is_finite()) {
            return Err(HarnessError::Config(format!("test.{name} has a non-finite point")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestConfig {
    pub n_test: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v1: Option<Axis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Cue noise amplitudes, in multiples of the library's per-component std.
    pub levels: Vec<f64>,
    /// Also train on library signals carrying the same noise amplitude.
    pub matched_training: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { levels: vec![0.0], matched_training: false }
    }
}

impl NoiseConfig {
    /// `(train, test)` noise pairs, in evaluation order.
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for &s in &self.levels {
            out.push((0.0, s));
            if self.matched_training && s > 0.0 {
                out.push((s, s));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirConfig {
    pub n_nodes: usize,
    pub mean_in_degree: f64,
    pub spectral_radius: f64,
    pub input_strength: f64,
    pub bias_strength: f64,
    pub leakage: f64,
    pub alpha: f64,
}

impl ReservoirConfig {
    fn from_spec(spec: ReservoirSpec, alpha: f64) -> Self {
        Self {
            n_nodes: spec.n_nodes,
            mean_in_degree: spec.mean_in_degree,
            spectral_radius: spec.spectral_radius,
            input_strength: spec.input_strength,
            bias_strength: spec.bias_strength,
            leakage: spec.leakage,
            alpha,
        }
    }

    pub fn spec(&self, n_inputs: usize, seed: u64) -> ReservoirSpec {
        ReservoirSpec {
            n_nodes: self.n_nodes,
            mean_in_degree: self.mean_in_degree,
            spectral_radius: self.spectral_radius,
            input_strength: self.input_strength,
            bias_strength: self.bias_strength,
            leakage: self.leakage,
            n_inputs,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub scale: Scale,
    pub methods: Vec<Method>,
    pub seeds: Seeds,
    pub data: DataConfig,
    pub library: LibraryConfig,
    pub test: TestConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    pub forecaster: ReservoirConfig,
    pub signal_mapper: ReservoirConfig,
}

pub const DEFAULT_ROOT_SEED: u64 = 2024;

impl ExperimentConfig {
    /// Built-in settings for `kind` at `scale`.
    pub fn preset(kind: ExperimentKind, scale: Scale) -> Self {
        let desk = scale == Scale::Desk;
        let testbed = kind.testbed();
        let forecaster = ReservoirConfig::from_spec(ReservoirSpec::forecaster(testbed, 1, 0), FORECASTER_ALPHA);
        let signal_mapper =
            ReservoirConfig::from_spec(ReservoirSpec::signal_mapper(testbed, 1, 0), SIGNAL_MAPPER_ALPHA);
        debug_assert_eq!(forecaster.n_nodes, FORECASTER_NODES);
        debug_assert_eq!(signal_mapper.n_nodes, SIGNAL_MAPPER_NODES);
        let map_data = DataConfig {
            n_discard: 1000,
            n_train: 1000,
            n_trans: 50,
            n_fit: None,
            n_for: 1000,
            n_eval_discard: 500,
            stride: 1,
            observe: None,
        };
        let lorenz_data = |observe: Option<Vec<usize>>| DataConfig {
            n_discard: 1000,
            n_train: 6000,
            n_trans: 1000,
            n_fit: None,
            n_for: 3000,
            n_eval_discard: 0,
            stride: 1,
            observe,
        };
        let lorenz_library = LibraryConfig {
            members: 9,
            mu: None,
            a: None,
            omega: Some([0.75, 1.25]),
            v1: Some([7.5, 12.5]),
            exclude_periodic: true,
        };
        let grid = if desk { 9 } else { 25 };
        let lorenz_test = |n_test: Vec<usize>, side: usize| TestConfig {
            n_test,
            mu: None,
            a: None,
            omega: Some(Axis::linspace(0.7, 1.3, side)),
            v1: Some(Axis::linspace(7.0, 13.0, side)),
        };
        let sweep: Vec<usize> = vec![1, 2, 5, 10, 20, 50, 100, 200];
        let seeds = Seeds { root: DEFAULT_ROOT_SEED, replicates: if desk { 3 } else { 10 } };
        use Method::*;
        let (methods, data, library, test, noise, seeds) = match kind {
            ExperimentKind::LogisticBifurcation => (
                vec![Metafors, MetaforsZeroStart, Interp, Multitask, TrainOnTest],
                map_data,
                LibraryConfig {
                    members: 5,
                    mu: Some([3.7, 3.8]),
                    a: None,
                    omega: None,
                    v1: None,
                    exclude_periodic: true,
                },
                TestConfig {
                    n_test: if desk { vec![5] } else { (1..=20).collect() },
                    mu: Some(Axis::linspace(2.9, 4.0, if desk { 100 } else { 500 })),
                    a: None,
                    omega: None,
                    v1: None,
                },
                NoiseConfig::default(),
                seeds,
            ),
            ExperimentKind::DualMapBifurcation => (
                vec![Metafors, Multitask, TrainOnTest],
                map_data,
                LibraryConfig {
                    members: 5,
                    mu: Some([3.6, 3.9]),
                    a: Some([6.0, 12.0]),
                    omega: None,
                    v1: None,
                    exclude_periodic: true,
                },
                TestConfig {
                    n_test: if desk { vec![10] } else { (1..=40).collect() },
                    mu: Some(Axis {
                        values: vec![3.61, 3.92],
                        ..Axis::linspace(3.4, 4.0, if desk { 50 } else { 500 })
                    }),
                    a: Some(Axis {
                        values: vec![8.0, 11.0],
                        ..Axis::linspace(4.0, 14.0, if desk { 50 } else { 500 })
                    }),
                    omega: None,
                    v1: None,
                },
                NoiseConfig::default(),
                seeds,
            ),
            ExperimentKind::LorenzGrid => (
                vec![Metafors, Nearest, Interp, Multitask],
                lorenz_data(None),
                lorenz_library,
                lorenz_test(vec![200], if desk { 9 } else { 30 }),
                NoiseConfig::default(),
                Seeds { replicates: if desk { 3 } else { 1 }, ..seeds },
            ),
            ExperimentKind::LorenzValidTimeVsNtest => (
                vec![Metafors, Nearest, Interp, Multitask, TrainOnTest],
                lorenz_data(Some(vec![2])),
                lorenz_library,
                lorenz_test(if desk { vec![1, 5, 20, 100, 200] } else { sweep }, grid),
                NoiseConfig::default(),
                Seeds { replicates: if desk { 3 } else { 1 }, ..seeds },
            ),
            ExperimentKind::LorenzColdStartOnly => (
                vec![Metafors, ZeroStartLibrary(0), BackwardConst, TrainSearch],
                lorenz_data(Some(vec![2])),
                LibraryConfig { members: 1, omega: Some([1.0, 1.0]), v1: Some([10.0, 10.0]), ..lorenz_library },
                TestConfig {
                    n_test: if desk { vec![1, 5, 20, 100] } else { sweep },
                    mu: None,
                    a: None,
                    omega: Some(Axis::linspace(1.0, 1.0, grid)),
                    v1: Some(Axis::linspace(10.0, 10.0, grid)),
                },
                NoiseConfig::default(),
                Seeds { replicates: if desk { 3 } else { 1 }, ..seeds },
            ),
            ExperimentKind::NoiseSweep => (
                vec![Metafors],
                lorenz_data(None),
                lorenz_library,
                lorenz_test(if desk { vec![20] } else { sweep }, grid),
                NoiseConfig { levels: vec![0.0, 0.01, 0.1], matched_training: true },
                Seeds { replicates: if desk { 3 } else { 1 }, ..seeds },
            ),
        };
        Self {
            experiment: kind,
            scale,
            methods,
            seeds,
            data,
            library,
            test,
            noise,
            forecaster,
            signal_mapper,
        }
    }

    /// Parses a config file: the preset named by its `experiment` (and
    /// `scale`, unless `scale_override` is given) overlaid with the file.
    pub fn from_toml_str(text: &str, scale_override: Option<Scale>) -> Result<Self> {
        let user: toml::Table = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        let kind: ExperimentKind = match user.get("experiment") {
            Some(toml::Value::String(s)) => s.parse()?,
            Some(_) => return Err(HarnessError::Config("experiment must be a string".into())),
            None => return Err(HarnessError::Config("missing key `experiment`".into())),
        };
        let scale = match (scale_override, user.get("scale")) {
            (Some(s), _) => s,
            (None, Some(toml::Value::String(s))) => s.parse()?,
            (None, Some(_)) => return Err(HarnessError::Config("scale must be a string".into())),
            (None, None) => Scale::Desk,
        };
        let mut base = Self::preset(kind, scale).to_table();
        merge(&mut base, user);
        base.insert("scale".into(), toml::Value::String(scale.to_string()));
        let cfg: Self = toml::Value::Table(base)
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn to_table(&self) -> toml::Table {
        match toml::Value::try_from(self).expect("config serializes") {
            toml::Value::Table(t) => t,
            _ => unreachable!(),
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Observed component indices.
    pub fn observed(&self) -> Vec<usize> {
        match &self.data.observe {
            Some(c) => c.clone(),
            None if self.experiment.is_map() => vec![0],
            None => vec![0, 1, 2],
        }
    }

    pub fn full_state_observed(&self) -> bool {
        self.experiment.is_map() || self.observed() == [0, 1, 2]
    }

    /// Total library members.
    pub fn library_size(&self) -> usize {
        match self.experiment {
            ExperimentKind::DualMapBifurcation => 2 * self.library.members,
            _ => self.library.members,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        let kind = self.experiment;
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        let distinct: BTreeSet<_> = self.methods.iter().collect();
        if distinct.len() != self.methods.len() {
            return bad("duplicate method".into());
        }
        if self.seeds.replicates == 0 {
            return bad("seeds.replicates must be positive".into());
        }
        if self.seeds.root > i64::MAX as u64 {
            return bad("seeds.root must fit in a signed 64-bit integer".into());
        }
        let d = &self.data;
        if let Some(n_fit) = d.n_fit {
            if d.n_train < d.n_trans + 1 || n_fit != d.n_train - d.n_trans - 1 {
                return bad(format!(
                    "data.n_fit = {n_fit} is inconsistent with n_train - n_trans - 1 = {}",
                    d.n_train as i64 - d.n_trans as i64 - 1
                ));
            }
        }
        if d.stride == 0 {
            return bad("data.stride must be positive".into());
        }
        if self.test.n_test.is_empty() || self.test.n_test.contains(&0) {
            return bad("test.n_test must list positive cue lengths".into());
        }
        let max_n_test = *self.test.n_test.iter().max().unwrap();
        if d.n_train < d.n_trans + max_n_test || d.n_train < d.n_trans + 2 {
            return bad(format!(
                "data.n_train = {} leaves no short signals for n_trans = {} and n_test = {max_n_test}",
                d.n_train, d.n_trans
            ));
        }
        if d.n_for < d.n_eval_discard + 2 {
            return bad("data.n_for must exceed n_eval_discard + 1".into());
        }
        let observed = self.observed();
        let n_state = if kind.is_map() { 1 } else { 3 };
        if observed.is_empty() || observed.iter().any(|&c| c >= n_state) {
            return bad(format!("data.observe must pick components below {n_state}"));
        }
        if observed.iter().collect::<BTreeSet<_>>().len() != observed.len() {
            return bad("data.observe repeats a component".into());
        }
        let lib = &self.library;
        if lib.members == 0 {
            return bad("library.members must be positive".into());
        }
        let need = |present: bool, key: &str| -> Result<()> {
            if present {
                Ok(())
            } else {
                Err(HarnessError::Config(format!("{kind} needs {key}")))
            }
        };
        let forbid = |present: bool, key: &str| -> Result<()> {
            if present {
                Err(HarnessError::Config(format!("{kind} does not use {key}")))
            } else {
                Ok(())
            }
        };
        match kind {
            ExperimentKind::LogisticBifurcation => {
                need(lib.mu.is_some(), "library.mu")?;
                need(self.test.mu.is_some(), "test.mu")?;
                forbid(lib.a.is_some() || self.test.a.is_some(), "a")?;
                forbid(lib.omega.is_some() || lib.v1.is_some(), "library.omega/v1")?;
                forbid(self.test.omega.is_some() || self.test.v1.is_some(), "test.omega/v1")?;
            }
            ExperimentKind::DualMapBifurcation => {
                need(lib.mu.is_some() && lib.a.is_some(), "library.mu and library.a")?;
                need(self.test.mu.is_some() && self.test.a.is_some(), "test.mu and test.a")?;
                forbid(lib.omega.is_some() || lib.v1.is_some(), "library.omega/v1")?;
                forbid(self.test.omega.is_some() || self.test.v1.is_some(), "test.omega/v1")?;
            }
            _ => {
                need(lib.omega.is_some() && lib.v1.is_some(), "library.omega and library.v1")?;
                need(self.test.omega.is_some() && self.test.v1.is_some(), "test.omega and test.v1")?;
                forbid(lib.mu.is_some() || lib.a.is_some(), "library.mu/a")?;
                forbid(self.test.mu.is_some() || self.test.a.is_some(), "test.mu/a")?;
            }
        }
        for (name, r) in [("mu", lib.mu), ("a", lib.a), ("omega", lib.omega), ("v1", lib.v1)] {
            if let Some([lo, hi]) = r {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return bad(format!("library.{name} must be an ordered finite range"));
                }
            }
        }
        for (name, ax) in [
            ("mu", &self.test.mu),
            ("a", &self.test.a),
            ("omega", &self.test.omega),
            ("v1", &self.test.v1),
        ] {
            if let Some(ax) = ax {
                ax.validate(name)?;
            }
        }
        if kind == ExperimentKind::LorenzColdStartOnly && lib.members != 1 {
            return bad("lorenz_cold_start_only needs library.members = 1".into());
        }
        let n_lib = self.library_size();
        for m in &self.methods {
            match m {
                Method::ZeroStartLibrary(k) if *k >= n_lib => {
                    return bad(format!("{m}: library has {n_lib} members"));
                }
                Method::BackwardConst | Method::TrainSearch if n_lib != 1 => {
                    return bad(format!("{m} needs a single-member library"));
                }
                Method::Interp if kind.is_map() && lib.members < 2 => {
                    return bad("interp needs at least two members per map".into());
                }
                Method::Interp | Method::Nearest if kind == ExperimentKind::LorenzColdStartOnly => {
                    return bad(format!("{m} needs labeled library members with distinct parameters"));
                }
                _ => {}
            }
        }
        if self.noise.levels.is_empty() || self.noise.levels.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return bad("noise.levels must be finite and nonnegative".into());
        }
        for (name, r) in [("forecaster", &self.forecaster), ("signal_mapper", &self.signal_mapper)] {
            r.spec(observed.len(), 0)
                .validate()
                .map_err(|e| HarnessError::Config(format!("{name}: {e}")))?;
            if !(r.alpha.is_finite() && r.alpha >= 0.0) {
                return bad(format!("{name}.alpha must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}

/// Recursively overlays `over` on `base`; tables merge, everything else is replaced.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates_and_round_trips() {
        for kind in ExperimentKind::ALL {
            for scale in [Scale::Desk, Scale::Paper] {
                let cfg = ExperimentConfig::preset(kind, scale);
                cfg.validate().unwrap();
                let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string(), None).unwrap();
                assert_eq!(back, cfg, "{kind} {scale}");
            }
        }
    }

    #[test]
    fn overrides_merge_into_preset() {
        let cfg = ExperimentConfig::from_toml_str(
            "experiment = \"logistic_bifurcation\"\n[test]\nn_test = [2, 5]\n[seeds]\nreplicates = 1\n",
            None,
        )
        .unwrap();
        assert_eq!(cfg.test.n_test, vec![2, 5]);
        assert_eq!(cfg.seeds.replicates, 1);
        assert_eq!(cfg.seeds.root, DEFAULT_ROOT_SEED);
        assert_eq!(cfg.test.mu.unwrap().count, 100);
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = ExperimentConfig::from_toml_str("experiment = \"noise_sweep\"\n[data]\nn_trian = 5\n", None);
        assert!(matches!(e, Err(HarnessError::Config(_))));
        assert!(ExperimentConfig::from_toml_str("experiment = \"nope\"", None).is_err());
        assert!(ExperimentConfig::from_toml_str("methods = []", None).is_err());
    }

    #[test]
    fn n_fit_consistency() {
        let ok = "experiment = \"logistic_bifurcation\"\n[data]\nn_fit = 949\n";
        assert!(ExperimentConfig::from_toml_str(ok, None).is_ok());
        let bad = "experiment = \"logistic_bifurcation\"\n[data]\nn_fit = 950\n";
        assert!(ExperimentConfig::from_toml_str(bad, None).is_err());
    }

    #[test]
    fn method_constraints() {
        let bad = "experiment = \"lorenz_grid\"\nmethods = [\"train_search\"]\n";
        assert!(ExperimentConfig::from_toml_str(bad, None).is_err());
        let bad = "experiment = \"lorenz_grid\"\nmethods = [\"zero_start_library_9\"]\n";
        assert!(ExperimentConfig::from_toml_str(bad, None).is_err());
        let ok = "experiment = \"lorenz_grid\"\nmethods = [\"zero_start_library_8\"]\n";
        assert!(ExperimentConfig::from_toml_str(ok, None).is_ok());
    }

    #[test]
    fn axis_points() {
        assert_eq!(Axis::linspace(0.0, 1.0, 3).points(), vec![0.0, 0.5, 1.0]);
        let ax = Axis { values: vec![7.0], ..Axis::linspace(2.0, 2.0, 1) };
        assert_eq!(ax.points(), vec![2.0, 7.0]);
    }

    #[test]
    fn noise_pairs() {
        let n = NoiseConfig { levels: vec![0.0, 0.1], matched_training: true };
        assert_eq!(n.pairs(), vec![(0.0, 0.0), (0.0, 0.1), (0.1, 0.1)]);
    }
}
