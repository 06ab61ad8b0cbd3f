use bnn_mcmc::diagnostics::{
    model_draws, posterior_summary, split_rhat, thin, DrawMode, PosteriorDraws,
};
use bnn_mcmc::model::{ModelSpec, Task};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn chains(seed: u64, m: usize, n: usize, shift: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m)
        .map(|c| {
            (0..n)
                .map(|_| c as f64 * shift + rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rhat_is_affine_invariant(
        seed in any::<u64>(),
        a in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0],
        b in -100.0f64..100.0,
        shift in 0.0f64..2.0,
        n in 4usize..200,
    ) {
        let base = chains(seed, 3, n, shift);
        let moved: Vec<Vec<f64>> = base.iter().map(|c| c.iter().map(|x| a * x + b).collect()).collect();
        let r0 = split_rhat(&base).unwrap().unwrap();
        let r1 = split_rhat(&moved).unwrap().unwrap();
        prop_assert!((r0 - r1).abs() < 1e-10, "{} vs {}", r0, r1);
    }

    #[test]
    fn thinning_composes(n in 1usize..500, f in 1usize..8, g in 1usize..8) {
        let m = Array2::from_shape_fn((n, 2), |(i, j)| (2 * i + j) as f64);
        let twice = thin(thin(m.view(), f).unwrap().view(), g).unwrap();
        let once = thin(m.view(), f * g).unwrap();
        prop_assert_eq!(&twice, &once);
        prop_assert_eq!(once.nrows(), n.div_ceil(f * g));
    }

    #[test]
    fn summary_quantiles_are_ordered(seed in any::<u64>(), n in 4usize..300) {
        let draws = PosteriorDraws::new(
            vec!["a".into(), "b".into()],
            (0..2).map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ c);
                Array2::from_shape_fn((n, 2), |_| rng.sample::<f64, _>(StandardNormal).exp())
            }).collect(),
        ).unwrap();
        for p in posterior_summary(&draws).unwrap().parameters {
            prop_assert!(p.ci_lo95 <= p.q05 && p.q05 <= p.q50 && p.q50 <= p.q95 && p.q95 <= p.ci_hi95);
        }
    }
}

#[test]
fn pooled_mean_is_weighted_chain_mean() {
    let c = chains(1, 3, 101, 0.7);
    let draws = PosteriorDraws::new(
        vec!["x".into()],
        c.iter().map(|v| Array2::from_shape_vec((v.len(), 1), v.clone()).unwrap()).collect(),
    )
    .unwrap();
    let s = posterior_summary(&draws).unwrap();
    let per_chain: f64 = c.iter().map(|v| v.iter().sum::<f64>() / v.len() as f64).sum::<f64>() / 3.0;
    assert!((s.parameters[0].mean - per_chain).abs() < 1e-12);
    assert!(s.parameters[0].rhat.is_some());
}

#[test]
fn empirical_draws_come_from_the_posterior() {
    let spec = ModelSpec::linear(2, 1, Task::Regression, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let theta = Array2::from_shape_fn((40, 3), |_| rng.sample::<f64, _>(StandardNormal));
    // a one-hot design makes every prediction reveal one stored coefficient
    let x = ndarray::array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]];
    let p = model_draws(theta.view(), None, &spec, x.view(), 200, DrawMode::Empirical, &mut rng).unwrap();
    for row in p.draws.rows() {
        let (w0, w1, b) = (row[0] - row[2], row[1] - row[2], row[2]);
        let found = theta.rows().into_iter().any(|t| {
            (t[0] - w0).abs() < 1e-12 && (t[1] - w1).abs() < 1e-12 && (t[2] - b).abs() < 1e-12
        });
        assert!(found);
    }
}

#[test]
fn band_shrinks_with_posterior_spread() {
    let spec = ModelSpec::linear(1, 1, Task::Regression, 0.1).unwrap();
    let x = ndarray::array![[0.0], [0.5], [1.0]];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let wide = Array2::from_shape_fn((2000, 2), |(_, j)| [3.0, 4.0][j] + rng.sample::<f64, _>(StandardNormal));
    let narrow = wide.mapv(|v| v) - &ndarray::array![3.0, 4.0];
    let narrow = narrow * 0.1 + &ndarray::array![3.0, 4.0];
    let mut r1 = ChaCha8Rng::seed_from_u64(10);
    let mut r2 = ChaCha8Rng::seed_from_u64(10);
    let a = model_draws(wide.view(), None, &spec, x.view(), 500, DrawMode::GaussianApprox, &mut r1).unwrap();
    let b = model_draws(narrow.view(), None, &spec, x.view(), 500, DrawMode::GaussianApprox, &mut r2).unwrap();
    for j in 0..3 {
        let wa = a.hi95[j] - a.lo95[j];
        let wb = b.hi95[j] - b.lo95[j];
        assert!(wb < 0.2 * wa, "instance {j}: {wb} vs {wa}");
    }
}

#[test]
fn sequential_mode_reproduces_stored_predictions() {
    use bnn_mcmc::data::Dataset;
    use bnn_mcmc::inference::{run_chain, SamplerConfig};

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = Array2::from_shape_fn((12, 1), |_| rng.random::<f64>());
    let y = x.column(0).mapv(|v| 0.5 * v + 0.2);
    let data = Dataset::from_arrays(Task::Regression, x.clone(), y.clone(), x.clone(), y).unwrap();
    let spec = ModelSpec::mlp(1, 3, 1, Task::Regression, 0.01).unwrap();
    let config = SamplerConfig {
        n_samples: 300,
        record_predictions: true,
        ..SamplerConfig::mlp_defaults()
    };
    let chain = run_chain(&spec, &data, &config).unwrap();
    let stored = chain.pred_train.as_ref().unwrap().slice(ndarray::s![150.., ..]).to_owned();
    let p = model_draws(
        chain.pos_theta.view(),
        None,
        &spec,
        x.view(),
        chain.n_kept(),
        DrawMode::EmpiricalSequential,
        &mut rng,
    )
    .unwrap();
    assert_eq!(p.draws, stored);
}
