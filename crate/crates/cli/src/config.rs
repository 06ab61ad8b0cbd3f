//! Flat `key = value` configuration for sampling runs.
//!
//! Every key mirrors a sampler, model or dataset field. Layers are merged
//! in order (config file, then command-line flags) and the fully resolved
//! map is what a manifest stores, so replaying it needs no defaults.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bnn_mcmc::data::{
    Benchmark, CategoricalMode, EmbedMode, EmbeddingConfig, DEFAULT_TRAIN_FRACTION,
};
use bnn_mcmc::inference::SamplerConfig;
use bnn_mcmc::model::{Family, Task, DEFAULT_HIDDEN};

use crate::error::CliError;

pub type KeyValues = BTreeMap<String, String>;

pub const KEYS: &[&str] = &[
    "dataset",
    "task",
    "target_column",
    "categorical",
    "train_fraction",
    "split_seed",
    "shuffle",
    "embed_dim",
    "embed_lag",
    "embed_mode",
    "model",
    "hidden_num",
    "learning_rate",
    "n_chains",
    "n_samples",
    "burn_in_fraction",
    "step_theta",
    "step_eta",
    "sigma2_prior",
    "nu1",
    "nu2",
    "use_langevin",
    "l_prob",
    "sgd_depth",
    "seed",
    "fixed_tau2",
    "prefix",
];

fn canonical_key(key: &str) -> String {
    key.trim().replace('-', "_")
}

/// Parses `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str, origin: &str) -> Result<KeyValues, CliError> {
    let mut out = KeyValues::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::validation(format!("{origin}: line {}: expected key = value", i + 1))
        })?;
        let key = canonical_key(k);
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::validation(format!(
                "{origin}: line {}: unknown key '{key}'",
                i + 1
            )));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

pub fn read_key_values(path: &Path) -> Result<KeyValues, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_key_values(&text, &path.display().to_string())
}

fn get<T>(kv: &KeyValues, key: &str) -> Result<Option<T>, CliError>
where
    T: FromStr,
    T::Err: Display,
{
    kv.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|e| CliError::validation(format!("{key} = '{v}': {e}")))
        })
        .transpose()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Benchmark(Benchmark),
    Csv {
        path: PathBuf,
        task: Task,
        target_column: Option<usize>,
    },
}

impl Source {
    pub fn task(&self) -> Task {
        match self {
            Source::Benchmark(b) => b.task(),
            Source::Csv { task, .. } => *task,
        }
    }

    /// Short name used in default output prefixes.
    pub fn stem(&self) -> String {
        match self {
            Source::Benchmark(b) => b.name().to_string(),
            Source::Csv { path, .. } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "data".into()),
        }
    }
}

/// Everything needed to build the dataset, model and sampler of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub source: Source,
    pub categorical: CategoricalMode,
    pub train_fraction: f64,
    pub split_seed: u64,
    pub shuffle: bool,
    pub embedding: EmbeddingConfig,
    pub family: Family,
    pub hidden_num: usize,
    pub learning_rate: f64,
    pub n_chains: usize,
    pub sampler: SamplerConfig,
    pub prefix: String,
}

impl RunSettings {
    pub fn resolve(kv: &KeyValues) -> Result<Self, CliError> {
        if let Some(bad) = kv.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(CliError::validation(format!("unknown key '{bad}'")));
        }
        let dataset = kv
            .get("dataset")
            .ok_or_else(|| CliError::usage("no dataset given (--dataset NAME or PATH)"))?;
        let task: Option<Task> = get(kv, "task")?;
        let target_column: Option<usize> = get(kv, "target_column")?;
        let source = match dataset.parse::<Benchmark>() {
            Ok(b) => {
                if task.is_some_and(|t| t != b.task()) {
                    return Err(CliError::validation(format!(
                        "benchmark {b} is a {} problem, task = {} given",
                        b.task(),
                        task.unwrap()
                    )));
                }
                if target_column.is_some() {
                    return Err(CliError::validation("target_column applies to CSV datasets only"));
                }
                Source::Benchmark(b)
            }
            Err(_) => Source::Csv {
                path: PathBuf::from(dataset),
                task: task.ok_or_else(|| {
                    CliError::validation(format!(
                        "'{dataset}' is not a bundled benchmark; a CSV dataset needs task = regression|classification"
                    ))
                })?,
                target_column,
            },
        };
        let task = source.task();

        let family: Family = get(kv, "model")?.unwrap_or(Family::Linear);
        let hidden_num = match family {
            Family::Linear => {
                if kv.contains_key("hidden_num") {
                    return Err(CliError::validation("hidden_num applies to the mlp model only"));
                }
                0
            }
            Family::Mlp => get(kv, "hidden_num")?.unwrap_or(DEFAULT_HIDDEN),
        };
        if task == Task::Classification {
            for key in ["step_eta", "fixed_tau2"] {
                if kv.contains_key(key) {
                    return Err(CliError::validation(format!(
                        "{key} applies to regression only; the noise variance is not sampled for classification"
                    )));
                }
            }
        }

        let base = SamplerConfig::defaults_for(family);
        let sampler = SamplerConfig {
            n_samples: get(kv, "n_samples")?.unwrap_or(base.n_samples),
            burn_in_fraction: get(kv, "burn_in_fraction")?.unwrap_or(base.burn_in_fraction),
            step_theta: get(kv, "step_theta")?.unwrap_or(base.step_theta),
            step_eta: get(kv, "step_eta")?.unwrap_or(base.step_eta),
            sigma2_prior: get(kv, "sigma2_prior")?.unwrap_or(base.sigma2_prior),
            nu1: get(kv, "nu1")?.unwrap_or(base.nu1),
            nu2: get(kv, "nu2")?.unwrap_or(base.nu2),
            use_langevin: get(kv, "use_langevin")?.unwrap_or(base.use_langevin),
            l_prob: get(kv, "l_prob")?.unwrap_or(base.l_prob),
            sgd_depth: get(kv, "sgd_depth")?.unwrap_or(base.sgd_depth),
            seed: get(kv, "seed")?.unwrap_or(base.seed),
            fixed_tau2: get(kv, "fixed_tau2")?,
            record_predictions: false,
        };
        sampler.validate()?;

        let embedding = {
            let d = get(kv, "embed_dim")?.unwrap_or(4);
            let t = get(kv, "embed_lag")?.unwrap_or(2);
            let mode: EmbedMode = get(kv, "embed_mode")?.unwrap_or(EmbedMode::Horizon);
            EmbeddingConfig::new(d, t)?.with_mode(mode)
        };
        let train_fraction = get(kv, "train_fraction")?.unwrap_or(DEFAULT_TRAIN_FRACTION);
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(CliError::validation(format!(
                "train_fraction must lie in (0, 1), got {train_fraction}"
            )));
        }
        let default_shuffle = source != Source::Benchmark(Benchmark::Sunspot);
        let shuffle = get(kv, "shuffle")?.unwrap_or(default_shuffle);
        if matches!(source, Source::Benchmark(_)) && shuffle != default_shuffle {
            return Err(CliError::validation(
                "benchmark splits are fixed: chronological for sunspot, shuffled otherwise",
            ));
        }
        let n_chains = get(kv, "n_chains")?.unwrap_or(5);
        if n_chains == 0 {
            return Err(CliError::validation("n_chains must be at least 1"));
        }
        let learning_rate = get(kv, "learning_rate")?
            .unwrap_or_else(|| SamplerConfig::default_learning_rate(family));
        let prefix = kv
            .get("prefix")
            .cloned()
            .unwrap_or_else(|| format!("{}_{family}", source.stem()));
        if prefix.is_empty() || prefix.contains(['/', '\\']) {
            return Err(CliError::validation(format!("prefix '{prefix}' must be a plain file name")));
        }

        Ok(Self {
            source,
            categorical: get(kv, "categorical")?.unwrap_or(CategoricalMode::Ordinal),
            train_fraction,
            split_seed: get(kv, "split_seed")?.unwrap_or(0),
            shuffle,
            embedding,
            family,
            hidden_num,
            learning_rate,
            n_chains,
            sampler,
            prefix,
        })
    }

    pub fn task(&self) -> Task {
        self.source.task()
    }

    /// Every setting as explicit keys. `resolve` of this map gives back an
    /// equal value.
    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        let mut put = |k: &str, v: String| {
            kv.insert(k.to_string(), v);
        };
        match &self.source {
            Source::Benchmark(b) => put("dataset", b.name().into()),
            Source::Csv {
                path,
                task,
                target_column,
            } => {
                put("dataset", path.display().to_string());
                put("task", task.to_string());
                if let Some(c) = target_column {
                    put("target_column", c.to_string());
                }
            }
        }
        put("categorical", self.categorical.to_string());
        put("train_fraction", self.train_fraction.to_string());
        put("split_seed", self.split_seed.to_string());
        put("shuffle", self.shuffle.to_string());
        put("embed_dim", self.embedding.dimension.to_string());
        put("embed_lag", self.embedding.lag.to_string());
        put("embed_mode", self.embedding.mode.to_string());
        put("model", self.family.to_string());
        if self.family == Family::Mlp {
            put("hidden_num", self.hidden_num.to_string());
        }
        put("learning_rate", self.learning_rate.to_string());
        put("n_chains", self.n_chains.to_string());
        let s = &self.sampler;
        put("n_samples", s.n_samples.to_string());
        put("burn_in_fraction", s.burn_in_fraction.to_string());
        put("step_theta", s.step_theta.to_string());
        if self.task() == Task::Regression {
            put("step_eta", s.step_eta.to_string());
            if let Some(t) = s.fixed_tau2 {
                put("fixed_tau2", t.to_string());
            }
        }
        put("sigma2_prior", s.sigma2_prior.to_string());
        put("nu1", s.nu1.to_string());
        put("nu2", s.nu2.to_string());
        put("use_langevin", s.use_langevin.to_string());
        put("l_prob", s.l_prob.to_string());
        put("sgd_depth", s.sgd_depth.to_string());
        put("seed", s.seed.to_string());
        put("prefix", self.prefix.clone());
        kv
    }
}
