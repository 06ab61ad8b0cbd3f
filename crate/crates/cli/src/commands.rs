use std::path::{Path, PathBuf};

use bnn_mcmc::data::{parse_series_str, takens_embed, write_rows, Benchmark, EmbedMode, EmbeddingConfig};
use bnn_mcmc::diagnostics::{
    model_draws, posterior_summary, read_draws_csv, rmse, summarize_values, DrawMode, PosteriorDraws,
    PosteriorSummary,
};
use bnn_mcmc::inference::sample_binomial_demo;
use bnn_mcmc::model::Task;
use clap::{Args, ValueEnum};
use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunSettings;
use crate::error::CliError;
use crate::sample::{build_dataset, build_spec, RunManifest};
use crate::Global;

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_summary(dir: &Path, prefix: &str, summary: &PosteriorSummary) -> Result<(), CliError> {
    let path = dir.join(format!("{prefix}_summary.csv"));
    let file = std::fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    summary.write_csv(std::io::BufWriter::new(file))?;
    let path = dir.join(format!("{prefix}_summary.json"));
    std::fs::write(&path, summary.to_json()).map_err(|e| CliError::io(&path, e))
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Observed successes.
    #[arg(long, default_value_t = 50)]
    pub k: u64,
    /// Trials.
    #[arg(long, default_value_t = 100)]
    pub n: u64,
    #[arg(long, default_value_t = 10_000)]
    pub n_samples: usize,
    #[arg(long, alias = "burn-in", default_value_t = 0.25)]
    pub burn_in_fraction: f64,
    #[arg(long, default_value = "demo")]
    pub prefix: String,
}

pub fn demo(global: &Global, args: &DemoArgs) -> Result<(), CliError> {
    if args.k > args.n {
        return Err(CliError::usage(format!("k = {} exceeds n = {}", args.k, args.n)));
    }
    let seed = global.seed.unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws = sample_binomial_demo(args.k, args.n, args.n_samples, args.burn_in_fraction, &mut rng)
        .map_err(|e| CliError::usage(e.to_string()))?;
    create_dir(&global.out_dir)?;
    let path = global.out_dir.join(format!("{}_posterior.csv", args.prefix));
    write_rows(&path, &["p".to_string()], draws.iter().map(|p| [*p]))?;
    let summary = PosteriorSummary {
        parameters: vec![summarize_values("p", &[draws])?],
    };
    write_summary(&global.out_dir, &args.prefix, &summary)?;
    let p = &summary.parameters[0];
    eprintln!(
        "p: mean {:.4}, std {:.4}, 95% interval [{:.4}, {:.4}]",
        p.mean, p.std, p.ci_lo95, p.ci_hi95
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Part {
    Train,
    Test,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Manifest written by `sample`.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Models drawn from the posterior.
    #[arg(long, default_value_t = 100)]
    pub draws: usize,
    /// empirical (resample stored rows), empirical-sequential or
    /// gaussian-approx (independent normals per parameter).
    #[arg(long, default_value = "empirical")]
    pub mode: DrawMode,
    #[arg(long, value_enum, default_value = "test")]
    pub split: Part,
    /// Add observation noise with each draw's variance (regression).
    #[arg(long)]
    pub noise: bool,
    /// Output file (default: <out-dir>/<prefix>_predictions_<split>.csv).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Pooled parameter rows of a run, ordered as the model expects, plus the
/// noise variance column for regression.
fn load_posterior(
    manifest: &RunManifest,
    dir: &Path,
) -> Result<(Array2<f64>, Option<Array1<f64>>), CliError> {
    let spec = &manifest.model;
    let names = spec.param_names();
    let mut expected = names.clone();
    if spec.task == Task::Regression {
        expected.push("tau".into());
    }
    let mut blocks = Vec::new();
    for c in &manifest.chains {
        let path = dir.join(&c.posterior_csv);
        let (header, m) = read_draws_csv(&path)?;
        let params: Vec<&String> = header.iter().filter(|h| *h != "metric").collect();
        if params.len() != expected.len() || params.iter().zip(&expected).any(|(a, b)| *a != b) {
            return Err(CliError::validation(format!(
                "{}: columns {:?} do not match the model's parameters {:?}",
                path.display(),
                params,
                expected
            )));
        }
        let idx: Vec<usize> = expected
            .iter()
            .map(|n| header.iter().position(|h| h == n).expect("checked above"))
            .collect();
        blocks.push(m.select(Axis(1), &idx));
    }
    if blocks.is_empty() {
        return Err(CliError::data("manifest lists no chains"));
    }
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    let all = ndarray::concatenate(Axis(0), &views).map_err(|e| CliError::data(e.to_string()))?;
    let m = names.len();
    let theta = all.slice(ndarray::s![.., ..m]).to_owned();
    let tau2 = (spec.task == Task::Regression).then(|| all.column(m).to_owned());
    Ok((theta, tau2))
}

pub fn predict(global: &Global, args: &PredictArgs) -> Result<(), CliError> {
    let manifest = RunManifest::read(&args.manifest)?;
    let dir = args.manifest.parent().unwrap_or(Path::new("."));
    let settings = RunSettings::resolve(&manifest.config)?;
    let data = build_dataset(&settings)?;
    let spec = manifest.model;
    if build_spec(&settings, &data)? != spec {
        return Err(CliError::validation(
            "the manifest's model does not fit the dataset its configuration describes",
        ));
    }
    if args.noise && spec.task != Task::Regression {
        return Err(CliError::validation("--noise applies to regression runs only"));
    }
    let (theta, tau2) = load_posterior(&manifest, dir)?;
    let (x, y, rows) = match args.split {
        Part::Train => (&data.x_train, &data.y_train, &data.split.train),
        Part::Test => (&data.x_test, &data.y_test, &data.split.test),
    };
    let seed = global.seed.unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = if args.noise { tau2.as_ref().map(|t| t.view()) } else { None };
    let p = model_draws(theta.view(), noise, &spec, x.view(), args.draws, args.mode, &mut rng)?;

    let (observed, mean, lo, hi) = match spec.task {
        Task::Regression => (
            data.denormalize_target(y.view()),
            data.denormalize_target(p.mean.view()),
            data.denormalize_target(p.lo95.view()),
            data.denormalize_target(p.hi95.view()),
        ),
        Task::Classification => {
            let majority = p.majority.as_ref().expect("classification draws carry a majority label");
            (
                y.clone(),
                majority.iter().map(|&c| c as f64).collect(),
                p.lo95.clone(),
                p.hi95.clone(),
            )
        }
    };
    let out = match &args.out {
        Some(path) => path.clone(),
        None => {
            create_dir(&global.out_dir)?;
            let part = match args.split {
                Part::Train => "train",
                Part::Test => "test",
            };
            global
                .out_dir
                .join(format!("{}_predictions_{part}.csv", settings.prefix))
        }
    };
    let header: Vec<String> = ["instance", "observed", "mean", "lo95", "hi95"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let table = (0..observed.len()).map(|i| [rows[i] as f64, observed[i], mean[i], lo[i], hi[i]]);
    write_rows(&out, &header, table)?;

    let inside = (0..observed.len())
        .filter(|&i| lo[i] <= observed[i] && observed[i] <= hi[i])
        .count();
    match spec.task {
        Task::Regression => eprintln!(
            "rmse of the mean {:.4} (target units), band covers {inside} of {} points",
            rmse(mean.as_slice().unwrap(), observed.as_slice().unwrap())?,
            observed.len()
        ),
        Task::Classification => {
            let hits = (0..observed.len()).filter(|&i| mean[i] == observed[i]).count();
            eprintln!(
                "majority-vote accuracy {:.2}%",
                100.0 * hits as f64 / observed.len() as f64
            )
        }
    }
    eprintln!("wrote {}", out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Posterior CSV files, one per chain.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Keep every n-th draw before summarizing.
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[arg(long, default_value = "diagnose")]
    pub prefix: String,
}

pub fn diagnose(global: &Global, args: &DiagnoseArgs) -> Result<(), CliError> {
    if args.files.len() < 2 {
        return Err(CliError::validation(format!(
            "R-hat needs at least 2 chain files, got {}",
            args.files.len()
        )));
    }
    if args.thin < 1 {
        return Err(CliError::validation("--thin must be at least 1"));
    }
    let mut names: Option<Vec<String>> = None;
    let mut chains = Vec::new();
    for path in &args.files {
        let (header, m) = read_draws_csv(path)?;
        let keep: Vec<usize> = (0..header.len()).filter(|&i| header[i] != "metric").collect();
        let cols: Vec<String> = keep.iter().map(|&i| header[i].clone()).collect();
        match &names {
            None => names = Some(cols),
            Some(first) if *first != cols => {
                return Err(CliError::validation(format!(
                    "{}: columns {:?} differ from {:?}",
                    path.display(),
                    cols,
                    first
                )))
            }
            Some(_) => {}
        }
        chains.push(m.select(Axis(1), &keep));
    }
    let draws = PosteriorDraws::new(names.unwrap_or_default(), chains)?.thin(args.thin)?;
    let summary = posterior_summary(&draws)?;
    create_dir(&global.out_dir)?;
    write_summary(&global.out_dir, &args.prefix, &summary)?;
    let worst = summary
        .parameters
        .iter()
        .filter_map(|p| p.rhat.map(|r| (r, &p.name)))
        .max_by(|a, b| a.0.total_cmp(&b.0));
    eprintln!(
        "{} chains x {} draws",
        draws.chains.len(),
        draws.chains[0].nrows()
    );
    match worst {
        Some((r, name)) => eprintln!("largest split R-hat {r:.4} ({name})"),
        None => eprintln!("R-hat undefined for every parameter"),
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct WindowArgs {
    /// Single-column series CSV, or `sunspot` for the bundled series.
    #[arg(long)]
    pub input: String,
    /// Window size D.
    #[arg(long, default_value_t = 4)]
    pub dim: usize,
    /// Lag T.
    #[arg(long, default_value_t = 2)]
    pub lag: usize,
    #[arg(long, default_value = "horizon")]
    pub mode: EmbedMode,
    /// Output file (default: <out-dir>/window.csv).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn window(global: &Global, args: &WindowArgs) -> Result<(), CliError> {
    let series = if args.input.eq_ignore_ascii_case("sunspot") {
        parse_series_str(Benchmark::Sunspot.csv_text(), "sunspot.csv")?
    } else {
        let path = Path::new(&args.input);
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        parse_series_str(&text, &args.input)?
    };
    let cfg = EmbeddingConfig::new(args.dim, args.lag)?.with_mode(args.mode);
    let (x, y) = takens_embed(&series, &cfg)?;
    let out = match &args.out {
        Some(p) => p.clone(),
        None => {
            create_dir(&global.out_dir)?;
            global.out_dir.join("window.csv")
        }
    };
    let mut header: Vec<String> = (0..args.dim).map(|j| format!("x{j}")).collect();
    header.push("target".into());
    let rows = x.rows().into_iter().zip(&y).map(|(r, t)| {
        let mut v = r.to_vec();
        v.push(*t);
        v
    });
    write_rows(&out, &header, rows)?;
    eprintln!("{} rows from a series of {}", x.nrows(), series.len());
    Ok(())
}
