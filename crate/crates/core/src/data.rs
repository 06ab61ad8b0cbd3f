//! Dataset ingestion, min-max normalization, time-series windowing and
//! train/test partitioning, plus the registry of bundled benchmarks.

use std::collections::HashMap;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Task;

/// How non-numeric feature columns are turned into numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CategoricalMode {
    /// Category codes `0, 1, ...` in order of first appearance.
    Ordinal,
    /// One indicator column per category, in order of first appearance.
    OneHot,
    Drop,
}

impl std::str::FromStr for CategoricalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ordinal" => Ok(CategoricalMode::Ordinal),
            "one-hot" | "onehot" => Ok(CategoricalMode::OneHot),
            "drop" => Ok(CategoricalMode::Drop),
            other => Err(Error::Validation(format!("unknown categorical mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for CategoricalMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CategoricalMode::Ordinal => "ordinal",
            CategoricalMode::OneHot => "one-hot",
            CategoricalMode::Drop => "drop",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvOptions {
    pub task: Task,
    /// Target column index; `None` means the last column.
    pub target_column: Option<usize>,
    pub categorical: CategoricalMode,
    /// Explicit label-to-class mapping for classification targets. Without
    /// one, integer labels are used as class indices and other labels are
    /// numbered by first appearance.
    pub label_map: Option<Vec<(String, usize)>>,
}

impl CsvOptions {
    pub fn new(task: Task) -> Self {
        Self {
            task,
            target_column: None,
            categorical: CategoricalMode::Ordinal,
            label_map: None,
        }
    }
}

/// A parsed table with the target separated from the features.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub feature_names: Vec<String>,
    pub x: Array2<f64>,
    /// Regression values or class indices.
    pub y: Vec<f64>,
    /// Class label strings indexed by class (classification).
    pub class_names: Vec<String>,
}

fn is_number(cell: &str) -> bool {
    cell.trim().parse::<f64>().is_ok()
}

fn read_records(text: &str, origin: &str) -> Result<Vec<Vec<String>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Data(format!("{origin}: row {}: {e}", i + 1)))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(rows)
}

fn first_appearance(values: &[&str]) -> (Vec<String>, HashMap<String, usize>) {
    let mut names = Vec::new();
    let mut codes = HashMap::new();
    for v in values {
        if !codes.contains_key(*v) {
            codes.insert(v.to_string(), names.len());
            names.push(v.to_string());
        }
    }
    (names, codes)
}

/// Parses comma-separated text. The first row is a header when none of its
/// cells is numeric.
pub fn parse_csv_str(text: &str, origin: &str, opts: &CsvOptions) -> Result<RawTable> {
    let mut rows = read_records(text, origin)?;
    if rows.is_empty() {
        return Err(Error::Data(format!("{origin}: no rows")));
    }
    let width = rows[0].len();
    let header = if rows[0].iter().any(|c| is_number(c)) {
        None
    } else {
        Some(rows.remove(0))
    };
    if rows.is_empty() {
        return Err(Error::Data(format!("{origin}: header but no data rows")));
    }
    let header_offset = if header.is_some() { 2 } else { 1 };
    for (i, r) in rows.iter().enumerate() {
        if r.len() != width {
            return Err(Error::Data(format!(
                "{origin}: row {} has {} cells, expected {width}",
                i + header_offset,
                r.len()
            )));
        }
    }
    let target = opts.target_column.unwrap_or(width - 1);
    if target >= width {
        return Err(Error::Data(format!(
            "{origin}: target column {target} out of range for {width} columns"
        )));
    }
    let names: Vec<String> = header.unwrap_or_else(|| (0..width).map(|c| format!("x{c}")).collect());

    let mut feature_names = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for c in (0..width).filter(|&c| c != target) {
        let cells: Vec<&str> = rows.iter().map(|r| r[c].as_str()).collect();
        if cells.iter().all(|s| is_number(s)) {
            feature_names.push(names[c].clone());
            columns.push(cells.iter().map(|s| s.parse().expect("checked")).collect());
            continue;
        }
        if cells.iter().any(|s| is_number(s)) {
            let (r, bad) = cells
                .iter()
                .enumerate()
                .find(|(_, s)| !is_number(s))
                .expect("some cell is not numeric");
            return Err(Error::Data(format!(
                "{origin}: row {}, column {}: cannot parse '{bad}' as a number",
                r + header_offset,
                c + 1
            )));
        }
        let (levels, codes) = first_appearance(&cells);
        match opts.categorical {
            CategoricalMode::Drop => {}
            CategoricalMode::Ordinal => {
                feature_names.push(names[c].clone());
                columns.push(cells.iter().map(|s| codes[*s] as f64).collect());
            }
            CategoricalMode::OneHot => {
                for (k, level) in levels.iter().enumerate() {
                    feature_names.push(format!("{}_{level}", names[c]));
                    columns.push(cells.iter().map(|s| f64::from(u8::from(codes[*s] == k))).collect());
                }
            }
        }
    }

    let target_cells: Vec<&str> = rows.iter().map(|r| r[target].as_str()).collect();
    let (y, class_names) = parse_targets(&target_cells, origin, header_offset, opts)?;

    let n = rows.len();
    let x = Array2::from_shape_fn((n, columns.len()), |(i, j)| columns[j][i]);
    Ok(RawTable {
        feature_names,
        x,
        y,
        class_names,
    })
}

fn parse_targets(
    cells: &[&str],
    origin: &str,
    header_offset: usize,
    opts: &CsvOptions,
) -> Result<(Vec<f64>, Vec<String>)> {
    let unparseable = |r: usize, s: &str| {
        Error::Data(format!("{origin}: row {}, target '{s}' is not a number", r + header_offset))
    };
    match opts.task {
        Task::Regression => {
            let y = cells
                .iter()
                .enumerate()
                .map(|(r, s)| s.parse::<f64>().map_err(|_| unparseable(r, s)))
                .collect::<Result<_>>()?;
            Ok((y, Vec::new()))
        }
        Task::Classification => {
            if let Some(map) = &opts.label_map {
                let lookup: HashMap<&str, usize> = map.iter().map(|(k, v)| (k.as_str(), *v)).collect();
                let k = map.iter().map(|(_, v)| v + 1).max().unwrap_or(0);
                let mut names = vec![String::new(); k];
                for (label, idx) in map {
                    names[*idx] = label.clone();
                }
                let y = cells
                    .iter()
                    .enumerate()
                    .map(|(r, s)| {
                        lookup.get(s).map(|&v| v as f64).ok_or_else(|| {
                            Error::Data(format!("{origin}: row {}, unknown label '{s}'", r + header_offset))
                        })
                    })
                    .collect::<Result<_>>()?;
                return Ok((y, names));
            }
            let ints: Option<Vec<usize>> = cells.iter().map(|s| s.parse::<usize>().ok()).collect();
            match ints {
                Some(v) => {
                    let k = v.iter().max().map_or(0, |m| m + 1);
                    Ok((v.iter().map(|&c| c as f64).collect(), (0..k).map(|c| c.to_string()).collect()))
                }
                None => {
                    let (names, codes) = first_appearance(cells);
                    Ok((cells.iter().map(|s| codes[*s] as f64).collect(), names))
                }
            }
        }
    }
}

/// Reads a CSV file; see [`parse_csv_str`].
pub fn load_csv(path: &Path, opts: &CsvOptions) -> Result<RawTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv_str(&text, &path.display().to_string(), opts)
}

/// Reads a one-column series (an optional header row is skipped; with
/// several columns the first is used).
pub fn parse_series_str(text: &str, origin: &str) -> Result<Vec<f64>> {
    let rows = read_records(text, origin)?;
    let skip = usize::from(rows.first().is_some_and(|r| !is_number(&r[0])));
    rows.iter()
        .enumerate()
        .skip(skip)
        .map(|(i, r)| {
            r[0].parse::<f64>()
                .map_err(|_| Error::Data(format!("{origin}: row {}: cannot parse '{}'", i + 1, r[0])))
        })
        .collect()
}

/// Per-column min-max scaling to `[0, 1]`. Constant columns map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl MinMax {
    pub fn fit(x: ArrayView2<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::Data("cannot fit normalization on zero rows".into()));
        }
        let mins = x.fold_axis(Axis(0), f64::INFINITY, |a, &b| a.min(b)).to_vec();
        let maxs = x.fold_axis(Axis(0), f64::NEG_INFINITY, |a, &b| a.max(b)).to_vec();
        Ok(Self { mins, maxs })
    }

    pub fn fit_vector(v: ArrayView1<f64>) -> Result<Self> {
        Self::fit(v.insert_axis(Axis(1)))
    }

    fn scale(&self, j: usize, v: f64) -> f64 {
        let range = self.maxs[j] - self.mins[j];
        if range > 0.0 {
            (v - self.mins[j]) / range
        } else {
            0.0
        }
    }

    fn unscale(&self, j: usize, v: f64) -> f64 {
        v * (self.maxs[j] - self.mins[j]) + self.mins[j]
    }

    pub fn transform(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mins.len() {
            return Err(Error::Shape(format!(
                "normalizer fitted on {} columns, got {}",
                self.mins.len(),
                x.ncols()
            )));
        }
        Ok(Array2::from_shape_fn(x.raw_dim(), |(i, j)| self.scale(j, x[[i, j]])))
    }

    pub fn inverse(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mins.len() {
            return Err(Error::Shape(format!(
                "normalizer fitted on {} columns, got {}",
                self.mins.len(),
                x.ncols()
            )));
        }
        Ok(Array2::from_shape_fn(x.raw_dim(), |(i, j)| self.unscale(j, x[[i, j]])))
    }

    pub fn transform_vector(&self, v: ArrayView1<f64>) -> Array1<f64> {
        v.mapv(|x| self.scale(0, x))
    }

    pub fn inverse_vector(&self, v: ArrayView1<f64>) -> Array1<f64> {
        v.mapv(|x| self.unscale(0, x))
    }
}

/// Which role the lag `T` plays in [`takens_embed`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedMode {
    /// `D` consecutive values; the target lies `T` steps after the window.
    Horizon,
    /// `D` values spaced `T` apart; the target is the next value.
    Stride,
}

impl std::str::FromStr for EmbedMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "horizon" => Ok(EmbedMode::Horizon),
            "stride" => Ok(EmbedMode::Stride),
            other => Err(Error::Validation(format!("unknown embedding mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for EmbedMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EmbedMode::Horizon => "horizon",
            EmbedMode::Stride => "stride",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub dimension: usize,
    pub lag: usize,
    pub mode: EmbedMode,
}

impl EmbeddingConfig {
    pub fn new(dimension: usize, lag: usize) -> Result<Self> {
        if dimension < 1 || lag < 1 {
            return Err(Error::InvalidParameter(format!(
                "embedding needs D >= 1 and T >= 1, got D = {dimension}, T = {lag}"
            )));
        }
        Ok(Self {
            dimension,
            lag,
            mode: EmbedMode::Horizon,
        })
    }

    pub fn with_mode(self, mode: EmbedMode) -> Self {
        Self { mode, ..self }
    }

    /// Number of (window, target) pairs a series of `len` values yields.
    pub fn n_rows(&self, len: usize) -> usize {
        let span = match self.mode {
            EmbedMode::Horizon => self.dimension + self.lag - 1,
            EmbedMode::Stride => (self.dimension - 1) * self.lag + 1,
        };
        len.saturating_sub(span)
    }
}

/// Sliding-window embedding of a scalar series into features and targets.
pub fn takens_embed(series: &[f64], cfg: &EmbeddingConfig) -> Result<(Array2<f64>, Vec<f64>)> {
    if cfg.dimension < 1 || cfg.lag < 1 {
        return Err(Error::InvalidParameter("embedding needs D >= 1 and T >= 1".into()));
    }
    let rows = cfg.n_rows(series.len());
    if rows == 0 {
        return Err(Error::Data(format!(
            "series of length {} is too short for D = {}, T = {} ({})",
            series.len(),
            cfg.dimension,
            cfg.lag,
            cfg.mode
        )));
    }
    let (d, t) = (cfg.dimension, cfg.lag);
    let (step, target_offset) = match cfg.mode {
        EmbedMode::Horizon => (1, d - 1 + t),
        EmbedMode::Stride => (t, (d - 1) * t + 1),
    };
    let x = Array2::from_shape_fn((rows, d), |(i, j)| series[i + j * step]);
    let y = (0..rows).map(|i| series[i + target_offset]).collect();
    Ok((x, y))
}

/// Row indices of a train/test partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits `n_rows` rows with `round(n * fraction)` (at least one on each
/// side) for training. Without shuffling the first rows train, which keeps
/// time series chronological.
pub fn train_test_split(n_rows: usize, fraction: f64, shuffle: bool, seed: u64) -> Result<Split> {
    if n_rows == 0 {
        return Err(Error::Data("cannot split an empty dataset".into()));
    }
    if n_rows == 1 {
        return Err(Error::Data("cannot split a single row into train and test".into()));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let n_train = ((n_rows as f64 * fraction).round() as usize).clamp(1, n_rows - 1);
    let mut order: Vec<usize> = (0..n_rows).collect();
    if shuffle {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let test = order.split_off(n_train);
    Ok(Split { train: order, test })
}

fn select_rows(x: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    x.select(Axis(0), rows)
}

/// Normalized train/test data ready for sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub task: Task,
    pub x_train: Array2<f64>,
    pub y_train: Array1<f64>,
    pub x_test: Array2<f64>,
    pub y_test: Array1<f64>,
    pub feature_names: Vec<String>,
    /// Feature scaling fitted on the training rows.
    pub features: Option<MinMax>,
    /// Target scaling fitted on the training rows (regression).
    pub target: Option<MinMax>,
    pub class_names: Vec<String>,
    pub split: Split,
}

/// What to normalize when building a [`Dataset`] from a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Normalize {
    pub features: bool,
    pub target: bool,
}

impl Dataset {
    /// Wraps ready-made arrays without normalization.
    pub fn from_arrays(
        task: Task,
        x_train: Array2<f64>,
        y_train: Array1<f64>,
        x_test: Array2<f64>,
        y_test: Array1<f64>,
    ) -> Result<Self> {
        let n_train = x_train.nrows();
        let n_test = x_test.nrows();
        let feature_names = (0..x_train.ncols()).map(|c| format!("x{c}")).collect();
        let class_names = match task {
            Task::Regression => Vec::new(),
            Task::Classification => {
                let k = y_train.iter().chain(&y_test).fold(0.0f64, |a, &b| a.max(b)) as usize + 1;
                (0..k).map(|c| c.to_string()).collect()
            }
        };
        let ds = Self {
            name: "arrays".into(),
            task,
            x_train,
            y_train,
            x_test,
            y_test,
            feature_names,
            features: None,
            target: None,
            class_names,
            split: Split {
                train: (0..n_train).collect(),
                test: (n_train..n_train + n_test).collect(),
            },
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Splits a table and scales it with statistics of the training rows.
    pub fn from_table(
        name: &str,
        task: Task,
        table: &RawTable,
        split: Split,
        normalize: Normalize,
    ) -> Result<Self> {
        let n = table.x.nrows();
        if let Some(&bad) = split.train.iter().chain(&split.test).find(|&&i| i >= n) {
            return Err(Error::Data(format!("split index {bad} out of range for {n} rows")));
        }
        let y = Array1::from(table.y.clone());
        let mut x_train = select_rows(&table.x, &split.train);
        let mut x_test = select_rows(&table.x, &split.test);
        let mut y_train = y.select(Axis(0), &split.train);
        let mut y_test = y.select(Axis(0), &split.test);

        let features = if normalize.features {
            let mm = MinMax::fit(x_train.view())?;
            x_train = mm.transform(x_train.view())?;
            x_test = mm.transform(x_test.view())?;
            Some(mm)
        } else {
            None
        };
        let target = if normalize.target && task == Task::Regression {
            let mm = MinMax::fit_vector(y_train.view())?;
            y_train = mm.transform_vector(y_train.view());
            y_test = mm.transform_vector(y_test.view());
            Some(mm)
        } else {
            None
        };
        let ds = Self {
            name: name.to_string(),
            task,
            x_train,
            y_train,
            x_test,
            y_test,
            feature_names: table.feature_names.clone(),
            features,
            target,
            class_names: table.class_names.clone(),
            split,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_train.ncols() != self.x_test.ncols() {
            return Err(Error::Shape("train and test column counts differ".into()));
        }
        if self.y_train.len() != self.x_train.nrows() || self.y_test.len() != self.x_test.nrows() {
            return Err(Error::Shape("target and feature row counts differ".into()));
        }
        if self.task == Task::Classification {
            let k = self.n_classes();
            self.class_indices(self.y_train.view(), k)?;
            self.class_indices(self.y_test.view(), k)?;
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.x_train.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Converts stored class labels to indices checked against `k` classes.
    pub fn class_indices(&self, y: ArrayView1<f64>, k: usize) -> Result<Vec<usize>> {
        y.iter()
            .map(|&v| {
                if v >= 0.0 && v.fract() == 0.0 && (v as usize) < k {
                    Ok(v as usize)
                } else {
                    Err(Error::Data(format!("class label {v} is not an index in [0, {k})")))
                }
            })
            .collect()
    }

    /// Maps normalized regression outputs back to target units.
    pub fn denormalize_target(&self, v: ArrayView1<f64>) -> Array1<f64> {
        match &self.target {
            Some(mm) => mm.inverse_vector(v),
            None => v.to_owned(),
        }
    }

    /// Metadata stored next to persisted data.
    pub fn sidecar(&self) -> DatasetSidecar {
        DatasetSidecar {
            name: self.name.clone(),
            task: self.task,
            feature_names: self.feature_names.clone(),
            feature_mins: self.features.as_ref().map(|m| m.mins.clone()),
            feature_maxs: self.features.as_ref().map(|m| m.maxs.clone()),
            target_min: self.target.as_ref().map(|m| m.mins[0]),
            target_max: self.target.as_ref().map(|m| m.maxs[0]),
            class_names: self.class_names.clone(),
            train_indices: self.split.train.clone(),
            test_indices: self.split.test.clone(),
        }
    }

    /// Writes `<stem>_train.csv`, `<stem>_test.csv` (features then a `target`
    /// column) and the `<stem>.json` sidecar into `dir`.
    pub fn persist(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut header = self.feature_names.clone();
        header.push("target".into());
        for (part, x, y) in [
            ("train", &self.x_train, &self.y_train),
            ("test", &self.x_test, &self.y_test),
        ] {
            let path = dir.join(format!("{stem}_{part}.csv"));
            let rows = x.rows().into_iter().zip(y).map(|(r, t)| {
                let mut v = r.to_vec();
                v.push(*t);
                v
            });
            write_rows(&path, &header, rows)?;
        }
        let path = dir.join(format!("{stem}.json"));
        let json = serde_json::to_string_pretty(&self.sidecar()).expect("sidecar serializes");
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))
    }
}

/// Normalization metadata and split indices of a persisted dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub name: String,
    pub task: Task,
    pub feature_names: Vec<String>,
    pub feature_mins: Option<Vec<f64>>,
    pub feature_maxs: Option<Vec<f64>>,
    pub target_min: Option<f64>,
    pub target_max: Option<f64>,
    pub class_names: Vec<String>,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Writes a header and numeric rows as CSV. Non-finite values are written
/// as `NA`.
pub fn write_rows<I, R>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let wrap = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Data(format!("{}: {other:?}", path.display())),
    };
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(row.as_ref().iter().map(|v| {
            if v.is_finite() {
                v.to_string()
            } else {
                "NA".to_string()
            }
        }))
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// The bundled benchmark problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    Sunspot,
    Abalone,
    Iris,
    Ionosphere,
}

impl std::str::FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sunspot" => Ok(Benchmark::Sunspot),
            "abalone" => Ok(Benchmark::Abalone),
            "iris" => Ok(Benchmark::Iris),
            "ionosphere" => Ok(Benchmark::Ionosphere),
            other => Err(Error::Validation(format!("unknown benchmark dataset '{other}'"))),
        }
    }
}

impl std::fmt::Display for Benchmark {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Options for loading a bundled benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkOptions {
    /// Training fraction; `None` uses 0.6.
    pub train_fraction: Option<f64>,
    /// Shuffle seed for non-temporal datasets.
    pub split_seed: u64,
    /// Sunspot windowing.
    pub embedding: EmbeddingConfig,
    /// Handling of the abalone sex column.
    pub categorical: CategoricalMode,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        Self {
            train_fraction: None,
            split_seed: 0,
            embedding: EmbeddingConfig {
                dimension: 4,
                lag: 2,
                mode: EmbedMode::Horizon,
            },
            categorical: CategoricalMode::Ordinal,
        }
    }
}

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.6;

impl Benchmark {
    pub const ALL: [Benchmark; 4] = [
        Benchmark::Sunspot,
        Benchmark::Abalone,
        Benchmark::Iris,
        Benchmark::Ionosphere,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Sunspot => "sunspot",
            Benchmark::Abalone => "abalone",
            Benchmark::Iris => "iris",
            Benchmark::Ionosphere => "ionosphere",
        }
    }

    pub fn task(self) -> Task {
        match self {
            Benchmark::Sunspot | Benchmark::Abalone => Task::Regression,
            Benchmark::Iris | Benchmark::Ionosphere => Task::Classification,
        }
    }

    /// Raw CSV text of the bundled file.
    pub fn csv_text(self) -> &'static str {
        match self {
            Benchmark::Sunspot => include_str!("../../../data/sunspot.csv"),
            Benchmark::Abalone => include_str!("../../../data/abalone.csv"),
            Benchmark::Iris => include_str!("../../../data/iris.csv"),
            Benchmark::Ionosphere => include_str!("../../../data/ionosphere.csv"),
        }
    }

    /// Parsed table before splitting. Sunspot is embedded first.
    pub fn table(self, opts: &BenchmarkOptions) -> Result<RawTable> {
        let origin = format!("{}.csv", self.name());
        match self {
            Benchmark::Sunspot => {
                let series = parse_series_str(self.csv_text(), &origin)?;
                let (x, y) = takens_embed(&series, &opts.embedding)?;
                Ok(RawTable {
                    feature_names: (0..x.ncols()).map(|c| format!("lag{c}")).collect(),
                    x,
                    y,
                    class_names: Vec::new(),
                })
            }
            Benchmark::Abalone => {
                let csv = CsvOptions {
                    categorical: opts.categorical,
                    ..CsvOptions::new(Task::Regression)
                };
                parse_csv_str(self.csv_text(), &origin, &csv)
            }
            Benchmark::Iris => parse_csv_str(self.csv_text(), &origin, &CsvOptions::new(Task::Classification)),
            Benchmark::Ionosphere => {
                let csv = CsvOptions {
                    label_map: Some(vec![("b".into(), 0), ("g".into(), 1)]),
                    ..CsvOptions::new(Task::Classification)
                };
                parse_csv_str(self.csv_text(), &origin, &csv)
            }
        }
    }

    /// Loads, splits and normalizes. Sunspot is split chronologically, the
    /// others by a seeded shuffle.
    pub fn load(self, opts: &BenchmarkOptions) -> Result<Dataset> {
        let table = self.table(opts)?;
        let fraction = opts.train_fraction.unwrap_or(DEFAULT_TRAIN_FRACTION);
        let shuffle = self != Benchmark::Sunspot;
        let split = train_test_split(table.x.nrows(), fraction, shuffle, opts.split_seed)?;
        Dataset::from_table(
            self.name(),
            self.task(),
            &table,
            split,
            Normalize {
                features: true,
                target: true,
            },
        )
    }
}
