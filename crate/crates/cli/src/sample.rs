use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use bnn_mcmc::data::{
    load_csv, train_test_split, write_rows, BenchmarkOptions, CategoricalMode, CsvOptions,
    Dataset, EmbedMode, Normalize,
};
use bnn_mcmc::diagnostics::posterior_summary;
use bnn_mcmc::inference::{run_multi_chain_with, Chain, SamplerConfig};
use bnn_mcmc::model::{Family, ModelSpec, Task};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::config::{read_key_values, KeyValues, RunSettings, Source};
use crate::error::CliError;
use crate::Global;

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Re-run the configuration stored in a manifest; other flags override it.
    #[arg(long)]
    pub from_manifest: Option<PathBuf>,

    /// Benchmark name (sunspot, abalone, iris, ionosphere) or a CSV path.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Task of a CSV dataset.
    #[arg(long)]
    pub task: Option<Task>,
    /// Zero-based target column of a CSV dataset (default: last).
    #[arg(long)]
    pub target_column: Option<usize>,
    /// Non-numeric feature columns: ordinal, one-hot or drop.
    #[arg(long)]
    pub categorical: Option<CategoricalMode>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub split_seed: Option<u64>,
    /// Shuffle CSV rows before splitting.
    #[arg(long)]
    pub shuffle: Option<bool>,
    /// Sunspot window size D.
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// Sunspot lag T.
    #[arg(long)]
    pub embed_lag: Option<usize>,
    /// How the lag is read: horizon or stride.
    #[arg(long)]
    pub embed_mode: Option<EmbedMode>,

    /// linear or mlp.
    #[arg(long)]
    pub model: Option<Family>,
    #[arg(long)]
    pub hidden_num: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,

    #[arg(long)]
    pub n_chains: Option<usize>,
    /// Samples per chain, burn-in included.
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long, alias = "burn-in")]
    pub burn_in_fraction: Option<f64>,
    #[arg(long)]
    pub step_theta: Option<f64>,
    /// Regression only.
    #[arg(long)]
    pub step_eta: Option<f64>,
    #[arg(long)]
    pub sigma2_prior: Option<f64>,
    #[arg(long)]
    pub nu1: Option<f64>,
    #[arg(long)]
    pub nu2: Option<f64>,
    #[arg(long)]
    pub use_langevin: Option<bool>,
    #[arg(long)]
    pub l_prob: Option<f64>,
    #[arg(long)]
    pub sgd_depth: Option<usize>,
    /// Hold the noise variance fixed (regression only).
    #[arg(long)]
    pub fixed_tau2: Option<f64>,

    /// Stem of every output file name (default: <dataset>_<model>).
    #[arg(long)]
    pub prefix: Option<String>,
}

impl SampleArgs {
    fn overrides(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        macro_rules! put {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field {
                    kv.insert(stringify!($field).to_string(), v.to_string());
                })*
            };
        }
        put!(
            dataset, task, target_column, categorical, train_fraction, split_seed, shuffle, embed_dim,
            embed_lag, embed_mode, model, hidden_num, learning_rate, n_chains, n_samples, burn_in_fraction,
            step_theta, step_eta, sigma2_prior, nu1, nu2, use_langevin, l_prob, sgd_depth, fixed_tau2, prefix
        );
        kv
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub name: String,
    pub task: Task,
    pub n_train: usize,
    pub n_test: usize,
    pub n_features: usize,
    pub class_names: Vec<String>,
    pub train_csv: String,
    pub test_csv: String,
    pub sidecar: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub index: usize,
    pub seed: u64,
    pub accept_count: usize,
    pub acceptance_rate: f64,
    pub langevin_count: usize,
    pub nonfinite_count: usize,
    /// Means over kept samples.
    pub train_metric: f64,
    pub test_metric: f64,
    pub posterior_csv: String,
    pub trace_csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub index: usize,
    pub seed: u64,
    pub error: String,
}

/// Pooled results of the surviving chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResults {
    /// `rmse` or `accuracy` (percent).
    pub metric: String,
    pub train_mean: f64,
    pub train_std: f64,
    pub test_mean: f64,
    pub test_std: f64,
    pub acceptance_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Resolved configuration; replaying it reproduces the run exactly.
    pub config: KeyValues,
    pub model: ModelSpec,
    pub sampler: SamplerConfig,
    pub n_chains: usize,
    pub dataset: DatasetRecord,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    pub chains: Vec<ChainRecord>,
    pub failures: Vec<FailureRecord>,
    pub results: RunResults,
    pub summary_csv: String,
    pub summary_json: String,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: not a run manifest: {e}", path.display())))
    }
}

fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Rebuilds the dataset a run samples on. Deterministic in the settings.
pub fn build_dataset(settings: &RunSettings) -> Result<Dataset, CliError> {
    match &settings.source {
        Source::Benchmark(b) => Ok(b.load(&BenchmarkOptions {
            train_fraction: Some(settings.train_fraction),
            split_seed: settings.split_seed,
            embedding: settings.embedding,
            categorical: settings.categorical,
        })?),
        Source::Csv {
            path,
            task,
            target_column,
        } => {
            let opts = CsvOptions {
                target_column: *target_column,
                categorical: settings.categorical,
                ..CsvOptions::new(*task)
            };
            let table = load_csv(path, &opts)?;
            let split = train_test_split(
                table.x.nrows(),
                settings.train_fraction,
                settings.shuffle,
                settings.split_seed,
            )?;
            let name = settings.source.stem();
            Ok(Dataset::from_table(
                &name,
                *task,
                &table,
                split,
                Normalize {
                    features: true,
                    target: true,
                },
            )?)
        }
    }
}

pub fn build_spec(settings: &RunSettings, data: &Dataset) -> Result<ModelSpec, CliError> {
    let task = settings.task();
    let outputs = match task {
        Task::Regression => 1,
        Task::Classification => data.n_classes(),
    };
    let spec = match settings.family {
        Family::Linear => ModelSpec::linear(data.n_features(), outputs, task, settings.learning_rate)?,
        Family::Mlp => ModelSpec::mlp(
            data.n_features(),
            settings.hidden_num,
            outputs,
            task,
            settings.learning_rate,
        )?,
    };
    Ok(spec)
}

fn nan_mean(v: &[f64]) -> f64 {
    let finite: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
    if finite.is_empty() {
        f64::NAN
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    }
}

fn nan_std(v: &[f64]) -> f64 {
    let m = nan_mean(v);
    let finite: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
    if finite.is_empty() {
        return f64::NAN;
    }
    (finite.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / finite.len() as f64).sqrt()
}

fn write_chain(out_dir: &Path, prefix: &str, chain: &Chain) -> Result<(String, String), CliError> {
    let i = chain.chain_index;
    let posterior = format!("{prefix}_chain{i}_posterior.csv");
    let mut header = chain.posterior_names();
    header.push("metric".into());
    let post = chain.posterior_matrix();
    let metric = chain.kept_train_metric();
    let rows = post.rows().into_iter().zip(metric).map(|(r, m)| {
        let mut v = r.to_vec();
        v.push(*m);
        v
    });
    write_rows(&out_dir.join(&posterior), &header, rows)?;

    let trace = format!("{prefix}_chain{i}_trace.csv");
    let header: Vec<String> = ["sample", "train_metric", "test_metric", "log_likelihood", "log_prior"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = (0..chain.config.n_samples).map(|s| {
        [
            s as f64,
            chain.train_metric[s],
            chain.test_metric[s],
            chain.log_likelihood[s],
            chain.log_prior[s],
        ]
    });
    write_rows(&out_dir.join(&trace), &header, rows)?;
    Ok((posterior, trace))
}

pub fn sample(global: &Global, args: &SampleArgs) -> Result<(), CliError> {
    let mut kv = KeyValues::new();
    if let Some(path) = &args.from_manifest {
        kv.extend(RunManifest::read(path)?.config);
    }
    if let Some(path) = &global.config {
        kv.extend(read_key_values(path)?);
    }
    kv.extend(args.overrides());
    if let Some(seed) = global.seed {
        kv.insert("seed".into(), seed.to_string());
    }
    let settings = RunSettings::resolve(&kv)?;
    let data = build_dataset(&settings)?;
    let spec = build_spec(&settings, &data)?;

    let out = &global.out_dir;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let prefix = &settings.prefix;
    let data_stem = format!("{prefix}_data");
    data.persist(out, &data_stem)?;

    let n_chains = settings.n_chains;
    eprintln!(
        "sampling {} with a {} model ({} parameters): {} chains x {} samples, seed {}",
        data.name,
        settings.family,
        spec.n_params(),
        n_chains,
        settings.sampler.n_samples,
        settings.sampler.seed
    );
    let started = unix_ms();
    let set = run_multi_chain_with(&spec, &data, &settings.sampler, n_chains, global.jobs, |i, r| match r {
        Ok(c) => eprintln!(
            "chain {i}: done, acceptance {:.1}%, langevin proposals {}",
            100.0 * c.acceptance_rate(),
            c.langevin_count
        ),
        Err(e) => eprintln!("chain {i}: failed: {e}"),
    })?;
    let finished = unix_ms();
    let seed_of = |i: usize| settings.sampler.seed.wrapping_add(i as u64);

    if set.chains.is_empty() {
        let first = set.failures.into_iter().next().expect("no chains means failures");
        let mut err = CliError::from(first.error);
        err.message = format!("every chain failed; chain {}: {}", first.chain_index, err.message);
        return Err(err);
    }

    let mut chains = Vec::new();
    for c in &set.chains {
        let (posterior_csv, trace_csv) = write_chain(out, prefix, c)?;
        chains.push(ChainRecord {
            index: c.chain_index,
            seed: seed_of(c.chain_index),
            accept_count: c.accept_count,
            acceptance_rate: c.acceptance_rate(),
            langevin_count: c.langevin_count,
            nonfinite_count: c.nonfinite_count,
            train_metric: nan_mean(c.kept_train_metric()),
            test_metric: nan_mean(c.kept_test_metric()),
            posterior_csv,
            trace_csv,
        });
    }

    let summary = posterior_summary(&set.draws()?)?;
    let summary_csv = format!("{prefix}_summary.csv");
    let summary_json = format!("{prefix}_summary.json");
    {
        let path = out.join(&summary_csv);
        let file = std::fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        summary.write_csv(std::io::BufWriter::new(file))?;
        let path = out.join(&summary_json);
        std::fs::write(&path, summary.to_json()).map_err(|e| CliError::io(&path, e))?;
    }

    let train: Vec<f64> = set.chains.iter().flat_map(|c| c.kept_train_metric().to_vec()).collect();
    let test: Vec<f64> = set.chains.iter().flat_map(|c| c.kept_test_metric().to_vec()).collect();
    let results = RunResults {
        metric: match spec.task {
            Task::Regression => "rmse".into(),
            Task::Classification => "accuracy".into(),
        },
        train_mean: nan_mean(&train),
        train_std: nan_std(&train),
        test_mean: nan_mean(&test),
        test_std: nan_std(&test),
        acceptance_rate: chains.iter().map(|c| c.acceptance_rate).sum::<f64>() / chains.len() as f64,
    };
    eprintln!(
        "{}: train {:.4} (sd {:.4}), test {:.4} (sd {:.4}), mean acceptance {:.1}%",
        results.metric,
        results.train_mean,
        results.train_std,
        results.test_mean,
        results.test_std,
        100.0 * results.acceptance_rate
    );

    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: settings.to_key_values(),
        model: spec,
        sampler: settings.sampler.clone(),
        n_chains,
        dataset: DatasetRecord {
            name: data.name.clone(),
            task: data.task,
            n_train: data.x_train.nrows(),
            n_test: data.x_test.nrows(),
            n_features: data.n_features(),
            class_names: data.class_names.clone(),
            train_csv: format!("{data_stem}_train.csv"),
            test_csv: format!("{data_stem}_test.csv"),
            sidecar: format!("{data_stem}.json"),
        },
        started_unix_ms: started,
        finished_unix_ms: finished,
        chains,
        failures: set
            .failures
            .iter()
            .map(|f| FailureRecord {
                index: f.chain_index,
                seed: seed_of(f.chain_index),
                error: f.error.to_string(),
            })
            .collect(),
        results,
        summary_csv,
        summary_json,
    };
    let path = out.join(format!("{prefix}_manifest.json"));
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, json).map_err(|e| CliError::io(&path, e))?;
    eprintln!("wrote {}", path.display());
    if !set.failures.is_empty() {
        eprintln!("warning: {} of {n_chains} chains failed", set.failures.len());
    }
    Ok(())
}

