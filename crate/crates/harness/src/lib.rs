//! Config-driven experiment runner for the `metafors` library.
//!
//! [`config`] parses and validates experiment files and ships the built-in
//! presets, [`experiment`] runs them, [`results`] reads and writes the output
//! files and [`summarize`] aggregates result rows.

pub mod config;
pub mod error;
pub mod experiment;
pub mod results;
pub mod summarize;

use std::fs;
use std::path::Path;

pub use config::{ExperimentConfig, ExperimentKind, Scale};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, RunOutput};

/// Resolves `source` to a config: a manifest (`.json`) from an earlier run,
/// a TOML file, or a preset name.
pub fn load_config(source: &str, scale: Option<Scale>, seed: Option<u64>) -> Result<ExperimentConfig> {
    let path = Path::new(source);
    let mut cfg = if path.extension().is_some_and(|e| e == "json") {
        let manifest = results::read_manifest(path)?;
        ExperimentConfig::from_toml_str(&manifest.config, scale)?
    } else if path.is_file() {
        ExperimentConfig::from_toml_str(&fs::read_to_string(path)?, scale)?
    } else if let Ok(kind) = source.parse::<ExperimentKind>() {
        ExperimentConfig::preset(kind, scale.unwrap_or_default())
    } else {
        return Err(HarnessError::Config(format!("{source:?} is neither a config file nor a preset name")));
    };
    if let Some(seed) = seed {
        cfg.seeds.root = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs `f` on a pool of `threads` workers (the global pool when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(0) => Err(HarnessError::Config("--threads must be positive".into())),
        #[cfg(feature = "parallel")]
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
        _ => Ok(f()),
    }
}

/// Runs `cfg` and writes `results.csv`, `timings.csv`, `manifest.json`,
/// `config.toml` and, for map experiments, `bifurcation.csv` into `out_dir`.
pub fn run_to_dir(cfg: &ExperimentConfig, out_dir: &Path, threads: Option<usize>) -> Result<RunOutput> {
    fs::create_dir_all(out_dir)?;
    let mut out = with_threads(threads, || run_experiment(cfg))??;
    let results_path = out_dir.join("results.csv");
    results::write_results(&results_path, &out.rows)?;
    out.manifest.results_sha256 = Some(results::sha256_file(&results_path)?);
    results::write_timings(&out_dir.join("timings.csv"), &out.timings)?;
    results::write_manifest(&out_dir.join("manifest.json"), &out.manifest)?;
    fs::write(out_dir.join("config.toml"), cfg.to_toml_string())?;
    if cfg.experiment.is_map() {
        results::write_bifurcation(&out_dir.join("bifurcation.csv"), &out.bifurcation)?;
    }
    Ok(out)
}
