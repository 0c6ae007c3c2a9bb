//! Persistence: a binary container of named `f64` arrays plus a JSON sidecar
//! holding everything else.
//!
//! Container layout (little endian):
//!
//! ```text
//! magic "MTFRSBIN" | version u32 | n_arrays u32
//! per array: name_len u32 | name utf8 | rows u64 | cols u64 | rows*cols f64
//! ```
//!
//! Arrays are row-major. Round trips are bitwise exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::library::{LibraryLayout, MetaLibrary, SignalMapper, TargetMode};
use crate::linalg::CsrMatrix;
use crate::reservoir::{Reservoir, ReservoirSpec, StateTrajectory, TrainedModel};
use crate::series::Series;

const MAGIC: &[u8; 8] = b"MTFRSBIN";
const VERSION: u32 = 1;

/// One named row-major array.
#[derive(Debug, Clone, PartialEq)]
pub struct Array {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Container {
    arrays: Vec<Array>,
}

impl Container {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, rows: usize, cols: usize, data: Vec<f64>) {
        assert_eq!(rows * cols, data.len(), "array shape does not match its data");
        self.arrays.push(Array { name: name.into(), rows, cols, data });
    }

    pub fn push_matrix(&mut self, name: impl Into<String>, m: &DMatrix<f64>) {
        self.push(name, m.nrows(), m.ncols(), m.transpose().as_slice().to_vec());
    }

    pub fn arrays(&self) -> &[Array] {
        &self.arrays
    }

    pub fn get(&self, name: &str) -> Result<&Array> {
        self.arrays
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| Error::Format(format!("missing array {name:?}")))
    }

    pub fn matrix(&self, name: &str) -> Result<DMatrix<f64>> {
        let a = self.get(name)?;
        Ok(DMatrix::from_row_slice(a.rows, a.cols, &a.data))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.arrays.len() as u32).to_le_bytes())?;
        for a in &self.arrays {
            w.write_all(&(a.name.len() as u32).to_le_bytes())?;
            w.write_all(a.name.as_bytes())?;
            w.write_all(&(a.rows as u64).to_le_bytes())?;
            w.write_all(&(a.cols as u64).to_le_bytes())?;
            for v in &a.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a container file".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported container version {version}")));
        }
        let n = read_u32(&mut r)?;
        let mut arrays = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let len = read_u32(&mut r)? as usize;
            let mut name = vec![0u8; len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|e| Error::Format(e.to_string()))?;
            let rows = read_u64(&mut r)? as usize;
            let cols = read_u64(&mut r)? as usize;
            let count = rows
                .checked_mul(cols)
                .ok_or_else(|| Error::Format(format!("array {name:?} shape overflows")))?;
            let mut bytes = vec![0u8; count * 8];
            r.read_exact(&mut bytes)?;
            let data = bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
            arrays.push(Array { name, rows, cols, data });
        }
        Ok(Self { arrays })
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Sidecar path for a container path (`x.bin` → `x.json`).
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes `container` to `path` and `meta` to its sidecar.
pub fn save<T: Serialize>(path: &Path, container: &Container, meta: &T) -> Result<()> {
    container.write_to(BufWriter::new(File::create(path)?))?;
    let json = serde_json::to_string_pretty(meta)?;
    std::fs::write(sidecar_path(path), json + "\n")?;
    Ok(())
}

pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<(Container, T)> {
    let c = Container::read_from(BufReader::new(File::open(path)?))?;
    let meta = serde_json::from_slice(&std::fs::read(sidecar_path(path))?)?;
    Ok((c, meta))
}

/// Full SHA-256 hex digest of a sequence of `f64` values.
pub fn hash_values(values: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirMeta {
    pub spec: ReservoirSpec,
    pub hash: String,
}

fn push_reservoir(c: &mut Container, prefix: &str, res: &Reservoir) -> ReservoirMeta {
    let trip = res.adjacency().triplets();
    let data = trip.iter().flat_map(|&(i, j, v)| [i as f64, j as f64, v]).collect();
    c.push(format!("{prefix}adjacency"), trip.len(), 3, data);
    c.push(format!("{prefix}input"), res.n_nodes(), res.n_inputs(), res.input_matrix().to_vec());
    c.push(format!("{prefix}bias"), res.n_nodes(), 1, res.bias().to_vec());
    ReservoirMeta { spec: res.spec().clone(), hash: res.hash().to_string() }
}

fn take_reservoir(c: &Container, prefix: &str, meta: &ReservoirMeta) -> Result<Reservoir> {
    let n = meta.spec.n_nodes;
    let adj = c.get(&format!("{prefix}adjacency"))?;
    if adj.cols != 3 {
        return Err(Error::Format("adjacency must be an nnz x 3 array".into()));
    }
    let trip: Vec<(usize, usize, f64)> =
        adj.data.chunks_exact(3).map(|t| (t[0] as usize, t[1] as usize, t[2])).collect();
    let a = CsrMatrix::from_triplets(n, &trip)?;
    let input = c.get(&format!("{prefix}input"))?;
    let bias = c.get(&format!("{prefix}bias"))?;
    if input.data.len() != n * meta.spec.n_inputs || bias.data.len() != n {
        return Err(Error::Format("reservoir weights do not match the spec".into()));
    }
    let res = Reservoir::from_parts(meta.spec.clone(), a, input.data.clone(), bias.data.clone());
    if res.hash() != meta.hash {
        return Err(Error::ReservoirMismatch { expected: meta.hash.clone(), found: res.hash().to_string() });
    }
    Ok(res)
}

pub fn save_reservoir(path: &Path, res: &Reservoir) -> Result<()> {
    let mut c = Container::new();
    let meta = push_reservoir(&mut c, "", res);
    save(path, &c, &meta)
}

pub fn load_reservoir(path: &Path) -> Result<Reservoir> {
    let (c, meta): (Container, ReservoirMeta) = load(path)?;
    take_reservoir(&c, "", &meta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub reservoir_hash: String,
    pub alpha: f64,
    pub n_fit: usize,
    pub w_out_sha256: String,
}

fn push_model(c: &mut Container, name: &str, m: &TrainedModel) -> ModelMeta {
    c.push_matrix(name, &m.w_out);
    ModelMeta {
        reservoir_hash: m.reservoir_hash.clone(),
        alpha: m.alpha,
        n_fit: m.n_fit,
        w_out_sha256: hash_values(&c.get(name).expect("just pushed").data),
    }
}

fn take_model(c: &Container, name: &str, meta: &ModelMeta) -> Result<TrainedModel> {
    let a = c.get(name)?;
    if hash_values(&a.data) != meta.w_out_sha256 {
        return Err(Error::Format(format!("array {name:?} does not match its recorded hash")));
    }
    Ok(TrainedModel {
        w_out: c.matrix(name)?,
        reservoir_hash: meta.reservoir_hash.clone(),
        alpha: meta.alpha,
        n_fit: meta.n_fit,
    })
}

pub fn save_model(path: &Path, model: &TrainedModel) -> Result<()> {
    let mut c = Container::new();
    let meta = push_model(&mut c, "w_out", model);
    save(path, &c, &meta)
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let (c, meta): (Container, ModelMeta) = load(path)?;
    take_model(&c, "w_out", &meta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberMeta {
    pub dt: f64,
    pub signal_sha256: String,
    pub trajectory_start_time: f64,
    pub model: ModelMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryMeta {
    pub forecaster_hash: String,
    pub layout: LibraryLayout,
    pub n_short: usize,
    pub members: Vec<MemberMeta>,
}

/// Member hashes and layout of a library, as recorded in its sidecar.
pub fn library_manifest(lib: &MetaLibrary) -> LibraryMeta {
    let mut c = Container::new();
    library_container(lib, &mut c)
}

fn library_container(lib: &MetaLibrary, c: &mut Container) -> LibraryMeta {
    let mut members = Vec::with_capacity(lib.len());
    for (i, ((s, m), t)) in lib.long_signals().iter().zip(lib.models()).zip(lib.trajectories()).enumerate() {
        c.push(format!("signal.{i}"), s.len(), s.n_sys(), s.data().to_vec());
        c.push(format!("trajectory.{i}"), t.len(), t.n_nodes(), t.data().to_vec());
        let model = push_model(c, &format!("w_out.{i}"), m);
        members.push(MemberMeta {
            dt: s.dt(),
            signal_sha256: hash_values(s.data()),
            trajectory_start_time: t.start_time(),
            model,
        });
    }
    LibraryMeta {
        forecaster_hash: lib.forecaster_hash().to_string(),
        layout: lib.layout(),
        n_short: lib.n_short(),
        members,
    }
}

pub fn save_library(path: &Path, lib: &MetaLibrary) -> Result<()> {
    let mut c = Container::new();
    let meta = library_container(lib, &mut c);
    save(path, &c, &meta)
}

/// Loads a library; `forecaster` must be the reservoir it was trained with.
pub fn load_library(path: &Path, forecaster: &Reservoir) -> Result<MetaLibrary> {
    let (c, meta): (Container, LibraryMeta) = load(path)?;
    if meta.forecaster_hash != forecaster.hash() {
        return Err(Error::ReservoirMismatch {
            expected: forecaster.hash().to_string(),
            found: meta.forecaster_hash,
        });
    }
    let mut signals = Vec::new();
    let mut models = Vec::new();
    let mut trajectories = Vec::new();
    for (i, m) in meta.members.iter().enumerate() {
        let s = c.get(&format!("signal.{i}"))?;
        if hash_values(&s.data) != m.signal_sha256 {
            return Err(Error::Format(format!("signal {i} does not match its recorded hash")));
        }
        signals.push(Series::new(s.data.clone(), s.cols, m.dt)?);
        let t = c.get(&format!("trajectory.{i}"))?;
        trajectories.push(StateTrajectory::from_raw(t.data.clone(), t.cols, m.trajectory_start_time));
        models.push(take_model(&c, &format!("w_out.{i}"), &m.model)?);
    }
    let lib = MetaLibrary::from_parts(forecaster, signals, models, trajectories, meta.layout)?;
    if lib.n_short() != meta.n_short {
        return Err(Error::Format("triplet count differs from the recorded one".into()));
    }
    Ok(lib)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalMapperMeta {
    pub reservoir: ReservoirMeta,
    pub n_test: usize,
    pub alpha: f64,
    pub targets: TargetMode,
    pub n_forecaster_nodes: usize,
    pub n_sys: usize,
    pub n_short: usize,
    pub forecaster_hash: String,
    pub readout_sha256: String,
    pub fixed_model: Option<ModelMeta>,
}

pub fn save_signal_mapper(path: &Path, sm: &SignalMapper) -> Result<()> {
    let mut c = Container::new();
    let reservoir = push_reservoir(&mut c, "reservoir.", sm.reservoir());
    c.push_matrix("w_sm", sm.readout());
    let readout_sha256 = hash_values(&c.get("w_sm")?.data);
    let fixed_model = sm.fixed_model().map(|m| push_model(&mut c, "fixed_w_out", m));
    let meta = SignalMapperMeta {
        reservoir,
        n_test: sm.n_test(),
        alpha: sm.alpha(),
        targets: sm.targets(),
        n_forecaster_nodes: sm.n_forecaster_nodes(),
        n_sys: sm.n_sys(),
        n_short: sm.n_short(),
        forecaster_hash: sm.forecaster_hash().to_string(),
        readout_sha256,
        fixed_model,
    };
    save(path, &c, &meta)
}

pub fn load_signal_mapper(path: &Path) -> Result<SignalMapper> {
    let (c, meta): (Container, SignalMapperMeta) = load(path)?;
    let res = take_reservoir(&c, "reservoir.", &meta.reservoir)?;
    if hash_values(&c.get("w_sm")?.data) != meta.readout_sha256 {
        return Err(Error::Format("readout does not match its recorded hash".into()));
    }
    let fixed = meta.fixed_model.as_ref().map(|m| take_model(&c, "fixed_w_out", m)).transpose()?;
    SignalMapper::from_parts(
        res,
        c.matrix("w_sm")?,
        meta.n_test,
        meta.alpha,
        meta.targets,
        meta.n_forecaster_nodes,
        meta.n_sys,
        meta.n_short,
        meta.forecaster_hash,
        fixed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn container_round_trip_is_bitwise() {
        let mut c = Container::new();
        c.push("a", 2, 2, vec![1.0, -0.0, f64::MIN_POSITIVE, 1.0 / 3.0]);
        c.push("empty", 0, 4, vec![]);
        let mut buf = Vec::new();
        c.write_to(&mut buf).unwrap();
        let back = Container::read_from(&buf[..]).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.get("a").unwrap().data[1].to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn rejects_garbage() {
        assert!(Container::read_from(&b"NOTMAGIC\x01\0\0\0\0\0\0\0"[..]).is_err());
        let mut buf = Vec::new();
        let mut c = Container::new();
        c.push("a", 1, 2, vec![1.0, 2.0]);
        c.write_to(&mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(Container::read_from(&buf[..]).is_err());
    }

    #[test]
    fn matrix_is_row_major() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let mut c = Container::new();
        c.push_matrix("m", &m);
        assert_eq!(c.get("m").unwrap().data, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(c.matrix("m").unwrap(), m);
    }
}
