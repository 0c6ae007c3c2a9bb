use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniformly sampled vector time series stored row-major
/// (`len` rows of `n_sys` components).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    data: Vec<f64>,
    n_sys: usize,
    dt: f64,
}

impl Series {
    /// Builds a ground-truth series. Requires at least one row and finite entries.
    pub fn new(data: Vec<f64>, n_sys: usize, dt: f64) -> Result<Self> {
        if n_sys == 0 {
            return Err(Error::InvalidArgument("series needs at least one component".into()));
        }
        if data.is_empty() || !data.len().is_multiple_of(n_sys) {
            return Err(Error::Dimension(format!(
                "{} values do not form whole rows of {} components",
                data.len(),
                n_sys
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite entry at row {}",
                pos / n_sys
            )));
        }
        Ok(Self { data, n_sys, dt })
    }

    /// Unchecked constructor for model output, which may be empty or non-finite.
    pub fn from_raw(data: Vec<f64>, n_sys: usize, dt: f64) -> Self {
        assert!(n_sys > 0 && data.len().is_multiple_of(n_sys));
        Self { data, n_sys, dt }
    }

    pub fn from_rows(rows: &[Vec<f64>], dt: f64) -> Result<Self> {
        let n_sys = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_sys) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(rows.concat(), n_sys, dt)
    }

    pub fn scalar(values: Vec<f64>, dt: f64) -> Result<Self> {
        Self::new(values, 1, dt)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.n_sys
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn n_sys(&self) -> usize {
        self.n_sys
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.n_sys..(k + 1) * self.n_sys]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.n_sys)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Rows `start..start + len` as a new series.
    pub fn window(&self, start: usize, len: usize) -> Series {
        let lo = start * self.n_sys;
        Series {
            data: self.data[lo..lo + len * self.n_sys].to_vec(),
            n_sys: self.n_sys,
            dt: self.dt,
        }
    }

    /// Rows from `start` to the end.
    pub fn tail_from(&self, start: usize) -> Series {
        self.window(start, self.len() - start)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Population standard deviation of each component.
    pub fn component_std(&self) -> Vec<f64> {
        component_std(std::iter::once(self))
    }

    /// Writes `t,x0,x1,...` CSV; `t` is the step index and values carry 17
    /// significant digits so that reading back is exact.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((0..self.n_sys).map(|j| format!("x{j}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for (k, row) in self.rows().enumerate() {
            write!(w, "{k}")?;
            for v in row {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, dt: f64) -> Result<Series> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Format("empty CSV".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.first() != Some(&"t") || cols.len() < 2 {
            return Err(Error::Format(format!("bad series header {header:?}")));
        }
        let n_sys = cols.len() - 1;
        let mut data = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != n_sys + 1 {
                return Err(Error::Format(format!("bad row {line:?}")));
            }
            for f in &fields[1..] {
                data.push(f.parse::<f64>().map_err(|e| Error::Format(format!("{f:?}: {e}")))?);
            }
        }
        Series::new(data, n_sys, dt)
    }
}

/// Component-wise population std pooled over several series.
pub fn component_std<'a>(series: impl IntoIterator<Item = &'a Series>) -> Vec<f64> {
    let mut n = 0usize;
    let mut sum: Vec<f64> = Vec::new();
    let mut sq: Vec<f64> = Vec::new();
    let all: Vec<&Series> = series.into_iter().collect();
    for s in &all {
        if sum.is_empty() {
            sum = vec![0.0; s.n_sys()];
            sq = vec![0.0; s.n_sys()];
        }
        for row in s.rows() {
            for (j, v) in row.iter().enumerate() {
                sum[j] += v;
            }
            n += 1;
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    for s in &all {
        for row in s.rows() {
            for (j, v) in row.iter().enumerate() {
                sq[j] += (v - mean[j]).powi(2);
            }
        }
    }
    sq.iter().map(|s| (s / n as f64).sqrt()).collect()
}
