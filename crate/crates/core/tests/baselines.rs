mod common;

use common::{logistic_loop, relative_error};
use metafors::baselines::{
    backward_padded, barycentric_weights, search_training_data, train_on_test, train_on_test_transient,
    LabeledLibrary, ScheduleFamily, BACKWARD_PAD,
};
use metafors::reservoir::train_output_layer;
use metafors::{MetaLibrary, Reservoir, ReservoirSpec, Series, TrainedModel};
use nalgebra::DMatrix;

fn model(w: DMatrix<f64>) -> TrainedModel {
    TrainedModel { w_out: w, reservoir_hash: "test".into(), alpha: 0.0, n_fit: 0 }
}

/// Models whose entries are affine in the label: `W(p) = W0 + Σ p_a W_a`.
fn affine_library(labels: &[Vec<f64>]) -> (LabeledLibrary, impl Fn(&[f64]) -> DMatrix<f64>) {
    let w0 = DMatrix::from_fn(2, 3, |i, j| (i * 3 + j) as f64 * 0.1 - 0.2);
    let w1 = DMatrix::from_fn(2, 3, |i, j| ((i + 2 * j) % 5) as f64 - 1.5);
    let w2 = DMatrix::from_fn(2, 3, |i, j| 0.3 * (i as f64) - 0.7 * (j as f64));
    let at = move |p: &[f64]| {
        let mut w = &w0 + &w1 * p[0];
        if p.len() > 1 {
            w += &w2 * p[1];
        }
        w
    };
    let models = labels.iter().map(|l| model(at(l))).collect();
    (LabeledLibrary::new(models, labels.to_vec()).unwrap(), at)
}

#[test]
fn one_dimensional_interpolation_is_affine_exact() {
    let labels: Vec<Vec<f64>> = [3.72, 3.61, 3.88, 3.79, 3.65].iter().map(|&v| vec![v]).collect();
    let (lib, at) = affine_library(&labels);
    for p in [3.4, 3.6, 3.61, 3.7, 3.75, 3.8, 3.88, 3.95, 4.0] {
        let got = lib.interpolated_model_1d(p).unwrap();
        assert!(relative_error(got.w_out.as_slice(), at(&[p]).as_slice()) < 1e-12, "p = {p}");
    }
    // exact label returns the member itself; brackets use the nearest neighbours
    assert_eq!(lib.weights_1d(3.79).unwrap(), vec![(3, 1.0)]);
    let w = lib.weights_1d(3.75).unwrap();
    assert_eq!(w.iter().map(|x| x.0).collect::<Vec<_>>(), vec![0, 3]);
    // beyond the range: the two nearest members
    let w = lib.weights_1d(4.0).unwrap();
    assert_eq!(w.iter().map(|x| x.0).collect::<Vec<_>>(), vec![2, 3]);
}

#[test]
fn barycentric_interpolation_is_affine_exact_inside_hull() {
    let labels = vec![vec![0.8, 8.0], vec![1.2, 8.5], vec![1.0, 12.0], vec![0.9, 10.0], vec![1.1, 11.0]];
    let (lib, at) = affine_library(&labels);
    for q in [[1.0, 10.0], [0.95, 9.0], [1.05, 11.2], [1.0, 12.0]] {
        let got = lib.interpolated_model_2d(&q).unwrap();
        assert!(relative_error(got.w_out.as_slice(), at(&q).as_slice()) < 1e-10, "q = {q:?}");
    }
    // outside the hull: nearest member in rescaled coordinates
    let w = lib.weights_2d(&[1.3, 13.0]).unwrap();
    assert_eq!(w, vec![(4, 1.0)]);
    assert_eq!(lib.nearest_member(&[0.81, 8.1]).unwrap(), 0);
}

#[test]
fn barycentric_reproduces_vertices_and_centroid() {
    let t = [[0.0, 0.0], [2.0, 0.0], [0.0, 4.0]];
    for (k, v) in t.iter().enumerate() {
        let w = barycentric_weights(&t, *v).unwrap();
        for (i, wi) in w.iter().enumerate() {
            assert!((wi - if i == k { 1.0 } else { 0.0 }).abs() < 1e-15);
        }
    }
    let w = barycentric_weights(&t, [2.0 / 3.0, 4.0 / 3.0]).unwrap();
    assert!(w.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
}

fn spec(n: usize, seed: u64) -> ReservoirSpec {
    ReservoirSpec {
        n_nodes: n,
        mean_in_degree: 3.0,
        spectral_radius: 0.8,
        input_strength: 1.0,
        bias_strength: 0.5,
        leakage: 0.3,
        n_inputs: 1,
        seed,
    }
}

#[test]
fn search_matches_brute_force() {
    let f = Reservoir::build(&spec(10, 3)).unwrap();
    let signal = Series::scalar(logistic_loop(3.83, 0.21, 300), 1.0).unwrap();
    let lib = MetaLibrary::build(&f, vec![signal.clone()], 20, 1e-6, 7, 1).unwrap();
    for start in [5, 40, 150, 290] {
        let mut cue = signal.window(start, 7).into_data();
        cue[3] += 1e-3;
        let cue = Series::scalar(cue, 1.0).unwrap();
        let got = search_training_data(&lib, &cue).unwrap();
        let mut best = (usize::MAX, f64::INFINITY);
        for j in 20..=signal.len() - 7 {
            let ss: f64 = (0..7).map(|k| (signal.row(j + k)[0] - cue.row(k)[0]).powi(2)).sum();
            let rms = (ss / 7.0).sqrt();
            if rms < best.1 {
                best = (j, rms);
            }
        }
        assert_eq!(got.start, best.0);
        assert!((got.rms - best.1).abs() < 1e-15);
    }
}

#[test]
fn train_on_test_uses_the_schedule() {
    let f = Reservoir::build(&spec(10, 3)).unwrap();
    let cue = Series::scalar(logistic_loop(3.7, 0.3, 8), 1.0).unwrap();
    let got = train_on_test(&f, &cue, ScheduleFamily::Map, 1e-6).unwrap();
    let n_trans = train_on_test_transient(ScheduleFamily::Map, 8).unwrap();
    assert_eq!(n_trans, 4);
    assert_eq!(got, train_output_layer(&f, &cue, n_trans, 1e-6).unwrap().0);
    assert!(train_on_test(&f, &cue.window(0, 1), ScheduleFamily::Map, 1e-6).is_err());
}

#[test]
fn backward_padding_repeats_the_first_row() {
    let cue = Series::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]], 0.01).unwrap();
    let p = backward_padded(&cue).unwrap();
    assert_eq!(p.len(), BACKWARD_PAD + 2);
    assert!((0..BACKWARD_PAD).all(|k| p.row(k) == [1.0, 2.0]));
    assert_eq!(p.row(BACKWARD_PAD + 1), &[3.0, 4.0]);
}
