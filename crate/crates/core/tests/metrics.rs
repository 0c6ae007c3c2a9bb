mod common;

use common::{ks_brute, logistic_loop};
use metafors::metrics::{
    autonomous_one_step_error, empirical_cdf, escapes_unit_interval, ks_distance, valid_time, ESCAPE_WINDOW,
};
use metafors::rng;
use metafors::systems::{LorenzParams, MapParams, TrueDynamics};
use metafors::Series;
use rand::Rng;

fn random_series(seed: u64, len: usize, n_sys: usize, dt: f64) -> Series {
    let mut r = rng::stream(seed, "metrics-test", 0);
    Series::new((0..len * n_sys).map(|_| r.random_range(-2.0..2.0)).collect(), n_sys, dt).unwrap()
}

fn valid_time_oracle(p: &Series, u: &Series) -> (usize, bool) {
    let n = p.len();
    let m = p.n_sys();
    let std: Vec<f64> = (0..m)
        .map(|c| {
            let xs: Vec<f64> = (0..n).map(|k| u.row(k)[c]).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt()
        })
        .collect();
    for k in 0..n {
        let e: f64 = (0..m).map(|c| ((p.row(k)[c] - u.row(k)[c]) / std[c]).powi(2)).sum();
        if e.sqrt() > 1.0 {
            return (k, false);
        }
    }
    (n, true)
}

#[test]
fn valid_time_matches_brute_scan() {
    for seed in 0..30 {
        let truth = random_series(seed, 60, 3, 0.01);
        // a forecast that drifts away linearly from the truth
        let drift = 0.02 + 0.01 * (seed % 7) as f64;
        let mut r = rng::stream(seed, "metrics-perturb", 0);
        let pred: Vec<f64> = truth
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| v + drift * (i / 3) as f64 * r.random_range(-1.0..1.0))
            .collect();
        let pred = Series::new(pred, 3, 0.01).unwrap();
        let got = valid_time(&pred, &truth).unwrap();
        let (steps, censored) = valid_time_oracle(&pred, &truth);
        assert_eq!((got.steps, got.censored), (steps, censored), "seed {seed}");
        assert!((got.t_valid - steps as f64 * 0.01).abs() < 1e-15);
    }
}

#[test]
fn ks_matches_brute_force() {
    for seed in 0..20 {
        let a = random_series(seed, 50 + seed as usize, 1, 1.0).into_data();
        let mut b = random_series(seed + 100, 80, 1, 1.0).into_data();
        // shared values exercise ties
        b[..5].copy_from_slice(&a[..5]);
        let got = ks_distance(&a, &b).unwrap();
        assert!((got - ks_brute(&a, &b)).abs() < 1e-15, "seed {seed}");
    }
    assert_eq!(ks_distance(&[0.1, 0.2], &[0.2, 0.1]).unwrap(), 0.0);
    assert_eq!(ks_distance(&[0.0], &[1.0]).unwrap(), 1.0);
    assert!(ks_distance(&[], &[1.0]).is_err());
}

#[test]
fn cdf_matches_counting() {
    let s = random_series(5, 200, 2, 1.0);
    let grid: Vec<f64> = (0..41).map(|k| -2.0 + 0.1 * k as f64).collect();
    for c in 0..2 {
        let got = empirical_cdf(&s, c, &grid).unwrap();
        for (g, v) in grid.iter().zip(&got) {
            let count = (0..s.len()).filter(|&k| s.row(k)[c] <= *g).count();
            assert_eq!(*v, count as f64 / 200.0);
        }
    }
    assert!(empirical_cdf(&s, 2, &grid).is_err());
}

#[test]
fn one_step_error_logistic_matches_loop() {
    let mu = 3.8;
    let g = TrueDynamics::Map(MapParams::logistic(mu));
    let mut xs = logistic_loop(3.7, 0.4, 120);
    xs[60] += 0.05;
    let p = Series::scalar(xs.clone(), 1.0).unwrap();
    let got = autonomous_one_step_error(&p, &g, 20).unwrap();
    let want: f64 = (20..119).map(|t| (xs[t + 1] - mu * xs[t] * (1.0 - xs[t])).abs()).sum::<f64>() / 99.0;
    assert!((got.epsilon - want).abs() < 1e-14);
    assert!(!got.diverged);
}

fn lorenz_rk4_oracle(x: [f64; 3], h: f64) -> [f64; 3] {
    let f = |s: [f64; 3]| [10.0 * (s[1] - s[0]), s[0] * (28.0 - s[2]) - s[1], s[0] * s[1] - 8.0 / 3.0 * s[2]];
    let add = |a: [f64; 3], b: [f64; 3], k: f64| [a[0] + k * b[0], a[1] + k * b[1], a[2] + k * b[2]];
    let k1 = f(x);
    let k2 = f(add(x, k1, h / 2.0));
    let k3 = f(add(x, k2, h / 2.0));
    let k4 = f(add(x, k3, h));
    [0, 1, 2].map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

#[test]
fn one_step_error_lorenz_matches_independent_rk4() {
    let g = TrueDynamics::Lorenz(LorenzParams::default());
    let p = random_series(9, 40, 3, 0.01);
    let p = Series::new(p.data().iter().map(|v| 5.0 * v + 10.0).collect(), 3, 0.01).unwrap();
    let got = autonomous_one_step_error(&p, &g, 5).unwrap();
    let mut sum = 0.0;
    for t in 5..39 {
        let r = p.row(t);
        let next = lorenz_rk4_oracle([r[0], r[1], r[2]], 0.01);
        sum += (0..3).map(|i| (p.row(t + 1)[i] - next[i]).powi(2)).sum::<f64>().sqrt();
    }
    assert!((got.epsilon - sum / 34.0).abs() < 1e-10 * got.epsilon);
    assert!(autonomous_one_step_error(&p.window(0, 6), &g, 5).is_err());
}

#[test]
fn escape_requires_the_whole_tail_outside() {
    let mut xs = vec![0.5; 100];
    assert!(!escapes_unit_interval(&xs));
    for x in xs.iter_mut().skip(100 - ESCAPE_WINDOW) {
        *x = 1.5;
    }
    assert!(escapes_unit_interval(&xs));
    xs[99] = 1.0;
    assert!(!escapes_unit_interval(&xs));
    xs[99] = f64::NAN;
    assert!(escapes_unit_interval(&xs));
}
