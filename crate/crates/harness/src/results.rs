//! Result files: per-forecast rows, stage timings, bifurcation data and the
//! run manifest.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const SCHEMA_LINE: &str = "# schema=1";

/// One forecast of one method on one test signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub method: String,
    pub replicate: usize,
    pub seed: u64,
    pub family: String,
    pub param0: f64,
    pub param1: Option<f64>,
    pub test_index: usize,
    pub n_test: usize,
    pub noise_test: f64,
    pub noise_train: f64,
    pub t_valid: f64,
    pub censored: bool,
    pub epsilon: Option<f64>,
    pub diverged: bool,
    pub escaped: Option<bool>,
    pub ks_distance: Option<f64>,
}

/// Wall time of one stage. Kept out of the results file, which must not
/// depend on the machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub replicate: usize,
    pub noise_train: f64,
    pub n_test: Option<usize>,
    pub stage: String,
    pub seconds: f64,
}

/// One retained forecast value for a bifurcation diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationRow {
    pub method: String,
    pub family: String,
    pub param: f64,
    pub n_test: usize,
    pub value: f64,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], schema: bool) -> Result<()> {
    let mut out = Vec::new();
    if schema {
        writeln!(out, "{SCHEMA_LINE}")?;
    }
    {
        let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(&mut out);
        for r in rows {
            w.serialize(r)?;
        }
        if rows.is_empty() {
            w.flush()?;
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    write_csv(path, rows, true)
}

pub fn write_timings(path: &Path, rows: &[TimingRow]) -> Result<()> {
    write_csv(path, rows, false)
}

pub fn write_bifurcation(path: &Path, rows: &[BifurcationRow]) -> Result<()> {
    write_csv(path, rows, false)
}

/// Parses a results file, checking the schema line.
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let text = fs::read_to_string(path)?;
    parse_results(&text)
}

pub fn parse_results(text: &str) -> Result<Vec<ResultRow>> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    if first.trim_end() != SCHEMA_LINE {
        return Err(HarnessError::Results(format!(
            "expected `{SCHEMA_LINE}` on the first line, found {first:?}"
        )));
    }
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(rest.as_bytes());
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec.map_err(|e| HarnessError::Results(e.to_string()))?);
    }
    Ok(rows)
}

/// Everything needed to identify and rerun a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub root_seed: u64,
    /// The full effective config; feeding it back to `run` reproduces the results.
    pub config: String,
    pub replicates: Vec<ReplicateManifest>,
    pub notes: Vec<String>,
    /// SHA-256 of the results file, filled in when written.
    #[serde(default)]
    pub results_sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateManifest {
    pub replicate: usize,
    pub seed: u64,
    pub forecaster_hash: String,
    pub signal_mapper_hash: String,
    /// Library member parameters, one label vector per member.
    pub library_params: Vec<Vec<f64>>,
    pub libraries: Vec<LibraryEntry>,
    /// Hash over every test signal (observed components, full length).
    pub test_signals_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryEntry {
    pub noise_train: f64,
    pub library: metafors::io::LibraryMeta,
}

/// Hex SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(manifest)? + "\n")?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: &str, t_valid: f64) -> ResultRow {
        ResultRow {
            experiment: "lorenz_grid".into(),
            method: method.into(),
            replicate: 0,
            seed: 7,
            family: "lorenz".into(),
            param0: 1.0,
            param1: Some(10.0),
            test_index: 0,
            n_test: 20,
            noise_test: 0.0,
            noise_train: 0.0,
            t_valid,
            censored: false,
            epsilon: Some(f64::INFINITY),
            diverged: true,
            escaped: None,
            ks_distance: None,
        }
    }

    #[test]
    fn results_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let rows = vec![row("metafors", 1.37), row("multitask", 0.1 + 0.2)];
        write_results(&p, &rows).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("# schema=1\nexperiment,method,"));
        assert_eq!(read_results(&p).unwrap(), rows);
    }

    #[test]
    fn missing_schema_rejected() {
        assert!(parse_results("experiment,method\n").is_err());
    }
}
