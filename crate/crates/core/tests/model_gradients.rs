use bnn_mcmc::model::{
    langevin_gradient, LinearState, MlpState, Model, ModelSpec, Network, Task,
};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn half_sq_error(net: &mut impl Network, x: &[f64], y: &[f64]) -> f64 {
    let out = net.forward(x).unwrap();
    0.5 * out.iter().zip(y).map(|(o, t)| (t - o) * (t - o)).sum::<f64>()
}

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Gradient implied by one backward step: the update is `-r * grad`.
fn backward_gradient(net: &mut impl Network, x: &[f64], y: &[f64]) -> Vec<f64> {
    let before = net.encode();
    net.forward(x).unwrap();
    net.backward_step(x, y, 1.0).unwrap();
    let after = net.encode();
    net.decode(&before).unwrap();
    before.iter().zip(&after).map(|(b, a)| b - a).collect()
}

fn central_difference<N: Network>(
    net: &mut N,
    x: &[f64],
    y: &[f64],
    h: f64,
    loss: fn(&mut N, &[f64], &[f64]) -> f64,
) -> Vec<f64> {
    let theta = net.encode();
    (0..theta.len())
        .map(|i| {
            let mut plus = theta.clone();
            plus[i] += h;
            let mut minus = theta.clone();
            minus[i] -= h;
            net.decode(&plus).unwrap();
            let up = loss(net, x, y);
            net.decode(&minus).unwrap();
            let down = loss(net, x, y);
            net.decode(&theta).unwrap();
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn assert_gradients_close(analytic: &[f64], numeric: &[f64], ctx: &str) {
    for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        // relative tolerance, floored where the difference quotient itself is
        // dominated by rounding
        let scale = a.abs().max(n.abs()).max(1e-3);
        assert!(
            (a - n).abs() <= 1e-5 * scale,
            "{ctx}: parameter {i}: backward {a}, finite difference {n}"
        );
    }
}

#[test]
fn mlp_backward_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..100 {
        let i = rng.random_range(1..=3);
        let h = rng.random_range(1..=4);
        let o = rng.random_range(1..=2);
        let spec = ModelSpec::mlp(i, h, o, Task::Regression, 0.1).unwrap();
        let theta = normals(&mut rng, spec.n_params());
        let mut net = MlpState::from_theta(&spec, &theta).unwrap();
        let x = normals(&mut rng, i);
        let y: Vec<f64> = (0..o).map(|_| rng.random()).collect();
        let analytic = backward_gradient(&mut net, &x, &y);
        let numeric = central_difference(&mut net, &x, &y, 1e-6, half_sq_error);
        assert_gradients_close(&analytic, &numeric, &format!("case {case} ({i}-{h}-{o})"));
    }
}

/// Cross-entropy of class scores against a target distribution.
fn cross_entropy(net: &mut impl Network, x: &[f64], y: &[f64]) -> f64 {
    let z = net.forward(x).unwrap();
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_norm = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    -z.iter().zip(y).map(|(v, t)| t * (v - log_norm)).sum::<f64>()
}

#[test]
fn linear_backward_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..50 {
        let i = rng.random_range(1..=4);
        let (task, o) = if case % 2 == 0 {
            (Task::Regression, 1)
        } else {
            (Task::Classification, rng.random_range(2..=3))
        };
        let spec = ModelSpec::linear(i, o, task, 0.1).unwrap();
        let mut net = LinearState::zeros(&spec).unwrap();
        net.decode(&normals(&mut rng, spec.n_params())).unwrap();
        let x = normals(&mut rng, i);
        let mut y: Vec<f64> = (0..o).map(|_| rng.random()).collect();
        let loss: fn(&mut LinearState, &[f64], &[f64]) -> f64 = match task {
            Task::Regression => half_sq_error,
            Task::Classification => {
                // the classifier's step descends the cross-entropy, whose
                // gradient is `softmax(z) - y` for targets summing to one
                let total: f64 = y.iter().sum();
                y.iter_mut().for_each(|t| *t /= total);
                cross_entropy
            }
        };
        let analytic = backward_gradient(&mut net, &x, &y);
        let numeric = central_difference(&mut net, &x, &y, 1e-6, loss);
        assert_gradients_close(&analytic, &numeric, &format!("linear case {case}"));
    }
}

#[test]
fn small_steps_do_not_increase_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spec = ModelSpec::mlp(3, 4, 2, Task::Regression, 1e-3).unwrap();
    for _ in 0..100 {
        let mut net = MlpState::init_scaled(&spec, &mut rng).unwrap();
        let x = normals(&mut rng, 3);
        let y = [rng.random(), rng.random()];
        let before = half_sq_error(&mut net, &x, &y);
        net.backward_step(&x, &y, 1e-3).unwrap();
        let after = half_sq_error(&mut net, &x, &y);
        assert!(after <= before + 1e-15, "{before} -> {after}");
    }
}

#[test]
fn forward_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let spec = ModelSpec::mlp(4, 5, 3, Task::Classification, 0.01).unwrap();
    let theta = normals(&mut rng, spec.n_params());
    let x = Array2::from_shape_fn((10, 4), |_| rng.random::<f64>());
    let a = Model::new(&spec).unwrap().outputs(x.view(), &theta).unwrap();
    let b = Model::new(&spec).unwrap().outputs(x.view(), &theta).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|&v| v > 0.0 && v < 1.0));
}

#[test]
fn gradient_map_follows_stored_row_order() {
    let spec = ModelSpec::mlp(2, 3, 1, Task::Regression, 0.2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let theta = normals(&mut rng, spec.n_params());
    let x = Array2::from_shape_fn((4, 2), |_| rng.random::<f64>());
    let y = Array2::from_shape_fn((4, 1), |_| rng.random::<f64>());

    let mut net = MlpState::from_theta(&spec, &theta).unwrap();
    for _ in 0..2 {
        for r in 0..4 {
            let (xr, yr) = (x.row(r).to_vec(), y.row(r).to_vec());
            net.forward(&xr).unwrap();
            net.backward_step(&xr, &yr, 0.2).unwrap();
        }
    }
    let mapped = langevin_gradient(x.view(), y.view(), &theta, 2, &spec).unwrap();
    assert_eq!(mapped, net.encode());
}

proptest! {
    #[test]
    fn encode_decode_round_trip(
        dims in (1usize..5, 1usize..6, 1usize..4),
        seed in any::<u64>(),
    ) {
        let (i, h, o) = dims;
        let spec = ModelSpec::mlp(i, h, o, Task::Regression, 0.01).unwrap();
        let theta = normals(&mut ChaCha8Rng::seed_from_u64(seed), spec.n_params());
        let state = MlpState::from_theta(&spec, &theta).unwrap();
        prop_assert_eq!(state.encode(), theta.clone());
        let again = MlpState::from_theta(&spec, &state.encode()).unwrap();
        prop_assert_eq!(again, state);
    }

    #[test]
    fn mlp_outputs_in_unit_interval(seed in any::<u64>(), scale in 0.1f64..20.0) {
        let spec = ModelSpec::mlp(3, 4, 2, Task::Regression, 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta: Vec<f64> = normals(&mut rng, spec.n_params()).iter().map(|t| t * scale).collect();
        let mut net = MlpState::from_theta(&spec, &theta).unwrap();
        let x = normals(&mut rng, 3);
        prop_assert!(net.forward(&x).unwrap().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
