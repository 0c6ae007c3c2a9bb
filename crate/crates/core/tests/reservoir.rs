use metafors::metrics::autonomous_one_step_error;
use metafors::reservoir::{forecast_closed_loop_with_states, train_output_layer};
use metafors::systems::{
    gauss_trajectory, logistic_trajectory, lorenz_trajectory, LorenzParams, MapParams, TrueDynamics, GAUSS_B,
};
use metafors::{rng, Reservoir, ReservoirSpec, ReservoirState, Series};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn spec(n_nodes: usize, n_inputs: usize, seed: u64) -> ReservoirSpec {
    ReservoirSpec {
        n_nodes,
        mean_in_degree: 3.0,
        spectral_radius: 0.8,
        input_strength: 0.8,
        bias_strength: 0.4,
        leakage: 0.4,
        n_inputs,
        seed,
    }
}

fn training_signal(len: usize, seed: u64) -> Series {
    let mut r = rng::stream(seed, "reservoir-test", 0);
    Series::new((0..2 * len).map(|_| r.random_range(-1.0..1.0)).collect(), 2, 1.0).unwrap()
}

/// Ridge cost with features `traj[k]` and targets `s[k + 1]` for `k >= n_trans`.
fn ridge_cost(w: &DMatrix<f64>, res: &Reservoir, s: &Series, n_trans: usize, alpha: f64) -> f64 {
    let traj = res.drive_open_loop(&ReservoirState::zeros(res.n_nodes()), s).unwrap();
    let count = s.len() - 1 - n_trans;
    let mut cost = 0.0;
    for k in n_trans..s.len() - 1 {
        let r = traj.row(k);
        for o in 0..w.nrows() {
            let pred: f64 = (0..w.ncols()).map(|i| w[(o, i)] * r[i]).sum();
            cost += (pred - s.row(k + 1)[o]).powi(2);
        }
    }
    cost + alpha * count as f64 * w.iter().map(|v| v * v).sum::<f64>()
}

#[test]
fn ridge_solution_is_a_local_minimum() {
    let res = Reservoir::build(&spec(12, 2, 4)).unwrap();
    let s = training_signal(80, 4);
    let alpha = 1e-3;
    let (model, _) = train_output_layer(&res, &s, 5, alpha).unwrap();
    let base = ridge_cost(&model.w_out, &res, &s, 5, alpha);
    for o in 0..model.w_out.nrows() {
        for i in 0..model.w_out.ncols() {
            for h in [1e-4, -1e-4] {
                let mut w = model.w_out.clone();
                w[(o, i)] += h;
                assert!(ridge_cost(&w, &res, &s, 5, alpha) >= base, "entry ({o}, {i}) step {h}");
            }
        }
    }
}

#[test]
fn ridge_shrinks_with_alpha() {
    let res = Reservoir::build(&spec(15, 2, 8)).unwrap();
    let s = training_signal(120, 8);
    let norms: Vec<f64> = [1e-8, 1e-6, 1e-4, 1e-2, 1.0, 100.0]
        .iter()
        .map(|&a| train_output_layer(&res, &s, 10, a).unwrap().0.w_out.norm())
        .collect();
    assert!(norms.windows(2).all(|w| w[1] <= w[0]), "{norms:?}");
}

#[test]
fn true_system_has_zero_one_step_error() {
    for (g, s) in [
        (TrueDynamics::Map(MapParams::logistic(3.9)), logistic_trajectory(3.9, 0.3, 400, 0).unwrap()),
        (TrueDynamics::Map(MapParams::gauss(9.0, GAUSS_B)), gauss_trajectory(9.0, GAUSS_B, 0.3, 400, 0).unwrap()),
    ] {
        assert_eq!(autonomous_one_step_error(&s, &g, 0).unwrap().epsilon, 0.0);
    }
    let p = LorenzParams::with(1.1, 9.5);
    let s = lorenz_trajectory(&p, [1.0, 2.0, 20.0], 500, 100).unwrap();
    assert!(autonomous_one_step_error(&s, &TrueDynamics::Lorenz(p), 0).unwrap().epsilon < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn closed_loop_replays_open_loop(seed in 0u64..1000, steps in 1usize..40) {
        let res = Reservoir::build(&spec(10, 2, seed)).unwrap();
        let (model, _) = train_output_layer(&res, &training_signal(60, seed), 5, 1e-4).unwrap();
        let mut r = rng::stream(seed, "closed-loop-start", 0);
        let r0 = ReservoirState::new((0..10).map(|_| r.random_range(-0.5..0.5)).collect());
        let (f, states) = forecast_closed_loop_with_states(&res, &model, &r0, steps).unwrap();
        let mut first = vec![0.0; 2];
        model.output(&r0.r, &mut first);
        let mut inputs = first;
        inputs.extend_from_slice(&f.values.data()[..2 * (steps - 1)]);
        let open = res.drive_open_loop(&r0, &Series::new(inputs, 2, 1.0).unwrap()).unwrap();
        prop_assert_eq!(open.data(), states.data());
    }

    #[test]
    fn logistic_stays_in_unit_interval(mu in 0.01f64..=4.0, x0 in 0.0f64..=1.0) {
        let s = logistic_trajectory(mu, x0, 500, 0).unwrap();
        prop_assert!(s.data().iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn gauss_stays_in_half_open_unit_interval(a in 4.0f64..14.0, x0 in 0.0f64..=1.0) {
        let s = gauss_trajectory(a, GAUSS_B, x0, 500, 1).unwrap();
        prop_assert!(s.data().iter().all(|&x| x > 0.0 && x <= 1.0));
    }
}
