use bnn_mcmc::data::{
    takens_embed, Benchmark, BenchmarkOptions, CategoricalMode, EmbedMode, EmbeddingConfig,
};
use bnn_mcmc::model::Task;
use proptest::prelude::*;

fn brute_force(series: &[f64], d: usize, t: usize, mode: EmbedMode) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for start in 0..series.len() {
        let idx: Vec<usize> = match mode {
            EmbedMode::Horizon => (start..start + d).collect(),
            EmbedMode::Stride => (0..d).map(|j| start + j * t).collect(),
        };
        let target = match mode {
            EmbedMode::Horizon => idx[d - 1] + t,
            EmbedMode::Stride => idx[d - 1] + 1,
        };
        if target < series.len() {
            rows.push(idx.iter().map(|&i| series[i]).collect());
            targets.push(series[target]);
        }
    }
    (rows, targets)
}

proptest! {
    #[test]
    fn embedding_matches_enumeration(
        len in 2usize..=50,
        d in 1usize..6,
        t in 1usize..5,
        stride in any::<bool>(),
    ) {
        let series: Vec<f64> = (0..len).map(|i| (i as f64 * 1.7).sin() + i as f64).collect();
        let mode = if stride { EmbedMode::Stride } else { EmbedMode::Horizon };
        let cfg = EmbeddingConfig::new(d, t).unwrap().with_mode(mode);
        let (rows, targets) = brute_force(&series, d, t, mode);
        match takens_embed(&series, &cfg) {
            Ok((x, y)) => {
                prop_assert_eq!(x.nrows(), rows.len());
                for (r, want) in x.rows().into_iter().zip(&rows) {
                    prop_assert_eq!(&r.to_vec(), want);
                }
                prop_assert_eq!(y, targets);
                if mode == EmbedMode::Horizon {
                    prop_assert_eq!(x.nrows(), len - d - t + 1);
                }
            }
            Err(_) => prop_assert!(rows.is_empty()),
        }
    }
}

#[test]
fn benchmark_shapes() {
    let opts = BenchmarkOptions::default();
    let iris = Benchmark::Iris.table(&opts).unwrap();
    assert_eq!(iris.x.dim(), (150, 4));
    assert_eq!(iris.class_names.len(), 3);
    for k in 0..3 {
        assert_eq!(iris.y.iter().filter(|&&c| c == k as f64).count(), 50);
    }

    let iono = Benchmark::Ionosphere.table(&opts).unwrap();
    assert_eq!(iono.x.dim(), (351, 34));
    assert_eq!(iono.class_names, vec!["b", "g"]);

    let abalone = Benchmark::Abalone.table(&opts).unwrap();
    assert_eq!(abalone.x.dim(), (4177, 8));
    let one_hot = BenchmarkOptions {
        categorical: CategoricalMode::OneHot,
        ..opts.clone()
    };
    assert_eq!(Benchmark::Abalone.table(&one_hot).unwrap().x.ncols(), 10);
    let dropped = BenchmarkOptions {
        categorical: CategoricalMode::Drop,
        ..opts.clone()
    };
    assert_eq!(Benchmark::Abalone.table(&dropped).unwrap().x.ncols(), 7);

    let sunspot = Benchmark::Sunspot.table(&opts).unwrap();
    assert_eq!(sunspot.x.ncols(), 4);
    assert_eq!(sunspot.x.nrows(), 2000 - 4 - 2 + 1);
}

#[test]
fn benchmark_datasets_are_normalized_on_train_rows() {
    let opts = BenchmarkOptions::default();
    for b in Benchmark::ALL {
        let d = b.load(&opts).unwrap();
        assert_eq!(d.task, b.task());
        let n = d.x_train.nrows() + d.x_test.nrows();
        assert_eq!(d.x_train.nrows(), (n as f64 * 0.6).round() as usize);
        assert!(d.x_train.iter().all(|v| (0.0..=1.0).contains(v)), "{b}");
        if b.task() == Task::Regression {
            assert!(d.y_train.iter().all(|v| (0.0..=1.0).contains(v)), "{b}");
            let back = d.denormalize_target(d.y_train.view());
            let renorm = d.target.as_ref().unwrap().transform_vector(back.view());
            for (a, b) in renorm.iter().zip(&d.y_train) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }
    // the sunspot split is chronological
    let s = Benchmark::Sunspot.load(&opts).unwrap();
    assert_eq!(s.split.train, (0..s.split.train.len()).collect::<Vec<_>>());
    // and the others are reproducible for a fixed seed
    let a = Benchmark::Iris.load(&opts).unwrap();
    let b = Benchmark::Iris.load(&opts).unwrap();
    assert_eq!(a, b);
}
