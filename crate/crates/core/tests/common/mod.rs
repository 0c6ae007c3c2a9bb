//! Independent reference implementations used as test oracles. Nothing here
//! calls into the crate's numerics beyond reading reservoir weights.

#![allow(dead_code, clippy::needless_range_loop)]

use metafors::{Reservoir, Series};

/// Dense row-major adjacency.
pub fn dense_adjacency(res: &Reservoir) -> Vec<Vec<f64>> {
    let n = res.n_nodes();
    let mut a = vec![vec![0.0; n]; n];
    for (i, j, v) in res.adjacency().triplets() {
        a[i][j] += v;
    }
    a
}

/// States after each input row, from `r0`, via an explicit dense update.
pub fn dense_drive(res: &Reservoir, r0: &[f64], inputs: &Series) -> Vec<Vec<f64>> {
    let a = dense_adjacency(res);
    let n = res.n_nodes();
    let m = res.n_inputs();
    let b = res.input_matrix();
    let c = res.bias();
    let lam = res.leakage();
    let mut r = r0.to_vec();
    let mut out = Vec::with_capacity(inputs.len());
    for k in 0..inputs.len() {
        let u = inputs.row(k);
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let mut s = c[i];
                for j in 0..n {
                    s += a[i][j] * r[j];
                }
                for j in 0..m {
                    s += b[i * m + j] * u[j];
                }
                (1.0 - lam) * r[i] + lam * s.tanh()
            })
            .collect();
        out.push(next.clone());
        r = next;
    }
    out
}

/// Solves `A X = B` by Gauss-Jordan elimination with partial pivoting.
/// `a` is `n × n`, `b` is `n × k`; returns `X` as `n × k`.
pub fn gauss_jordan(mut a: Vec<Vec<f64>>, mut b: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let p = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, p);
        b.swap(col, p);
        let piv = a[col][col];
        assert!(piv != 0.0, "singular system");
        for j in 0..n {
            a[col][j] /= piv;
        }
        for v in b[col].iter_mut() {
            *v /= piv;
        }
        for row in 0..n {
            if row != col && a[row][col] != 0.0 {
                let f = a[row][col];
                for j in 0..n {
                    a[row][j] -= f * a[col][j];
                }
                for j in 0..b[row].len() {
                    b[row][j] -= f * b[col][j];
                }
            }
        }
    }
    b
}

/// Ridge readout from the normal equations,
/// `W = Y Rᵀ (R Rᵀ + α N I)⁻¹`, where `features[t]` and `targets[t]` are the
/// columns of `R` and `Y`. Returns `W` as `n_out` rows.
pub fn ridge_oracle(features: &[Vec<f64>], targets: &[Vec<f64>], alpha: f64) -> Vec<Vec<f64>> {
    let n = features[0].len();
    let k = targets[0].len();
    let count = features.len() as f64;
    let mut g = vec![vec![0.0; n]; n];
    let mut ry = vec![vec![0.0; k]; n];
    for (r, y) in features.iter().zip(targets) {
        for i in 0..n {
            for j in 0..n {
                g[i][j] += r[i] * r[j];
            }
            for j in 0..k {
                ry[i][j] += r[i] * y[j];
            }
        }
    }
    for (i, row) in g.iter_mut().enumerate() {
        row[i] += alpha * count;
    }
    let x = gauss_jordan(g, ry);
    (0..k).map(|o| (0..n).map(|i| x[i][o]).collect()).collect()
}

/// `‖a - b‖_F / ‖b‖_F` over matching row-major layouts.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Row-major flattening of a nested matrix.
pub fn flat(rows: &[Vec<f64>]) -> Vec<f64> {
    rows.iter().flatten().copied().collect()
}

/// Logistic-map iterates by a plain loop.
pub fn logistic_loop(mu: f64, x0: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut x = x0;
    for _ in 0..n {
        out.push(x);
        x = mu * x * (1.0 - x);
    }
    out
}

/// Gauss-map iterates `exp(-a (x - b)^2)` by a plain loop.
pub fn gauss_loop(a: f64, b: f64, x0: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut x = x0;
    for _ in 0..n {
        out.push(x);
        let d = x - b;
        x = (-a * (d * d)).exp();
    }
    out
}

/// Two-sample KS distance by brute force over every sample value.
pub fn ks_brute(a: &[f64], b: &[f64]) -> f64 {
    let cdf = |xs: &[f64], t: f64| xs.iter().filter(|&&x| x <= t).count() as f64 / xs.len() as f64;
    a.iter().chain(b).map(|&t| (cdf(a, t) - cdf(b, t)).abs()).fold(0.0, f64::max)
}
