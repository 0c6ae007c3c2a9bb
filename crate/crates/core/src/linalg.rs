//! Sparse adjacency storage, spectral radius estimation and ridge regression.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square sparse matrix in compressed-sparse-row form. Column indices are
/// sorted within each row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, row_ptr: vec![0; n + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    /// Builds from `(row, col, value)` triplets. Duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        if let Some(&(i, j, _)) = sorted.iter().find(|&&(i, j, _)| i >= n || j >= n) {
            return Err(Error::Dimension(format!("entry ({i}, {j}) outside {n}x{n}")));
        }
        sorted.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((i, j));
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            values.push(v);
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self { n, row_ptr, col_idx, values })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out.push((i, self.col_idx[k], self.values[k]));
            }
        }
        out
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    /// Dot product of row `i` with `x`.
    #[inline]
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            acc += self.values[k] * x[self.col_idx[k]];
        }
        acc
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row_dot(i, x);
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }
}

const POWER_MAX_ITER: usize = 20_000;
const POWER_TOL: f64 = 1e-10;
const DENSE_FALLBACK_MAX_N: usize = 1000;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Magnitude of the dominant eigenvalue via power iteration.
///
/// Each iterate is tested against two hypotheses: a single real dominant
/// eigenvalue (`A x ≈ λ x`) and a complex-conjugate dominant pair
/// (`A² x ≈ a A x + b x`). Returns `None` if neither residual drops below
/// tolerance within the iteration cap.
pub fn power_iteration_radius(a: &CsrMatrix) -> Option<f64> {
    let n = a.dim();
    if n == 0 {
        return Some(0.0);
    }
    // deterministic, non-degenerate start vector
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 101) as f64 / 101.0).collect();
    let nx = norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut y1 = vec![0.0; n];
    let mut y2 = vec![0.0; n];
    let mut prev = f64::NAN;
    for _ in 0..POWER_MAX_ITER {
        a.matvec(&x, &mut y1);
        let n1 = norm(&y1);
        if n1 == 0.0 {
            return Some(0.0);
        }
        a.matvec(&y1, &mut y2);

        let lam = dot(&y1, &x);
        let res_real = y1.iter().zip(&x).map(|(p, q)| (p - lam * q).powi(2)).sum::<f64>().sqrt();
        let mut estimate = lam.abs();
        let mut residual = res_real / lam.abs().max(f64::MIN_POSITIVE);

        // least-squares fit of y2 = c1 * y1 + c0 * x
        let g11 = dot(&y1, &y1);
        let g10 = dot(&y1, &x);
        let g00 = 1.0;
        let r1 = dot(&y2, &y1);
        let r0 = dot(&y2, &x);
        let det = g11 * g00 - g10 * g10;
        if det > 1e-14 * g11 {
            let c1 = (r1 * g00 - r0 * g10) / det;
            let c0 = (g11 * r0 - g10 * r1) / det;
            let res_pair = y2
                .iter()
                .zip(&y1)
                .zip(&x)
                .map(|((p, q), s)| (p - c1 * q - c0 * s).powi(2))
                .sum::<f64>()
                .sqrt();
            let disc = c1 * c1 + 4.0 * c0;
            let pair_mag = if disc < 0.0 {
                (-c0).sqrt()
            } else {
                let s = disc.sqrt();
                ((c1 + s) / 2.0).abs().max(((c1 - s) / 2.0).abs())
            };
            let rel = res_pair / (pair_mag * pair_mag).max(f64::MIN_POSITIVE);
            if rel < residual {
                residual = rel;
                estimate = pair_mag;
            }
        }
        if residual < POWER_TOL && (estimate - prev).abs() <= POWER_TOL * estimate {
            return Some(estimate);
        }
        prev = estimate;
        for (xi, yi) in x.iter_mut().zip(&y1) {
            *xi = yi / n1;
        }
    }
    None
}

/// Dominant eigenvalue magnitude by dense Schur decomposition.
pub fn dense_spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Power iteration with a dense-eigensolver fallback for matrices up to
/// 1000×1000. Larger matrices that fail to converge return `None`.
pub fn spectral_radius(a: &CsrMatrix) -> Option<f64> {
    power_iteration_radius(a).or_else(|| {
        (a.dim() <= DENSE_FALLBACK_MAX_N).then(|| dense_spectral_radius(&a.to_dense()))
    })
}

/// Running normal equations for a multi-output ridge regression.
///
/// Features and targets arrive as column blocks (one column per sample);
/// `gram = Σ f fᵀ` and `cross = Σ t fᵀ`. Because both are sums, blocks may be
/// accumulated separately and merged.
#[derive(Debug, Clone)]
pub struct RidgeAccumulator {
    gram: DMatrix<f64>,
    cross: DMatrix<f64>,
    count: usize,
}

impl RidgeAccumulator {
    pub fn new(n_features: usize, n_targets: usize) -> Self {
        Self {
            gram: DMatrix::zeros(n_features, n_features),
            cross: DMatrix::zeros(n_targets, n_features),
            count: 0,
        }
    }

    pub fn add_columns(&mut self, features: &DMatrix<f64>, targets: &DMatrix<f64>) {
        assert_eq!(features.ncols(), targets.ncols());
        assert_eq!(features.nrows(), self.gram.nrows());
        assert_eq!(targets.nrows(), self.cross.nrows());
        if features.ncols() == 0 {
            return;
        }
        let ft = features.transpose();
        self.gram.gemm(1.0, features, &ft, 1.0);
        self.cross.gemm(1.0, targets, &ft, 1.0);
        self.count += features.ncols();
    }

    pub fn merge(&mut self, other: &RidgeAccumulator) {
        self.gram += &other.gram;
        self.cross += &other.cross;
        self.count += other.count;
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn cross(&self) -> &DMatrix<f64> {
        &self.cross
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// `W = cross · (gram + alpha·count·I)⁻¹` via Cholesky.
    pub fn solve(&self, alpha: f64) -> Result<DMatrix<f64>> {
        if self.count == 0 {
            return Err(Error::InvalidArgument("no fitting pairs".into()));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {alpha}")));
        }
        let mut m = self.gram.clone();
        let shift = alpha * self.count as f64;
        for i in 0..m.nrows() {
            m[(i, i)] += shift;
        }
        let chol = m.cholesky().ok_or(Error::SingularGram)?;
        let x = chol.solve(&self.cross.transpose());
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularGram);
        }
        Ok(x.transpose())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_matches_dense_product() {
        let a = CsrMatrix::from_triplets(3, &[(0, 1, 2.0), (2, 0, -1.0), (0, 1, 0.5), (1, 1, 3.0)]).unwrap();
        assert_eq!(a.nnz(), 3);
        let x = [1.0, 2.0, 3.0];
        let mut y = [0.0; 3];
        a.matvec(&x, &mut y);
        assert_eq!(y, [5.0, 6.0, -1.0]);
        let d = a.to_dense();
        assert_eq!(d[(0, 1)], 2.5);
        assert!(CsrMatrix::from_triplets(2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn power_iteration_real_dominant() {
        // upper triangular: eigenvalues are the diagonal
        let a = CsrMatrix::from_triplets(3, &[(0, 0, 0.5), (0, 1, 1.0), (1, 1, -2.0), (2, 2, 0.1), (1, 2, 0.3)])
            .unwrap();
        let r = power_iteration_radius(&a).unwrap();
        assert!((r - 2.0).abs() < 1e-9, "{r}");
    }

    #[test]
    fn power_iteration_complex_pair() {
        // rotation-scaling block with |λ| = 1.5 plus a smaller real mode
        let (c, s) = (1.5 * 0.3f64.cos(), 1.5 * 0.3f64.sin());
        let a = CsrMatrix::from_triplets(3, &[(0, 0, c), (0, 1, -s), (1, 0, s), (1, 1, c), (2, 2, 0.7), (2, 0, 0.2)])
            .unwrap();
        let r = power_iteration_radius(&a).unwrap();
        assert!((r - 1.5).abs() < 1e-9, "{r}");
    }

    #[test]
    fn nilpotent_matrix_has_zero_radius() {
        let a = CsrMatrix::from_triplets(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert_eq!(spectral_radius(&a), Some(0.0));
    }

    #[test]
    fn ridge_rejects_rank_deficiency_without_regularization() {
        let mut acc = RidgeAccumulator::new(2, 1);
        let f = DMatrix::from_column_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let t = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        acc.add_columns(&f, &t);
        assert!(matches!(acc.solve(0.0), Err(Error::SingularGram)));
        assert!(acc.solve(1e-6).is_ok());
    }
}
