//! Convergence diagnostics, posterior summaries, error metrics and
//! posterior-draw prediction.

use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{ensure_len, Error, Result};
use crate::model::{classify, Model, ModelSpec, Task};

/// Named parameter draws, one `n_kept x n_params` matrix per chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub names: Vec<String>,
    pub chains: Vec<Array2<f64>>,
}

impl PosteriorDraws {
    pub fn new(names: Vec<String>, chains: Vec<Array2<f64>>) -> Result<Self> {
        for (i, c) in chains.iter().enumerate() {
            if c.ncols() != names.len() {
                return Err(Error::Shape(format!(
                    "chain {i} has {} columns for {} names",
                    c.ncols(),
                    names.len()
                )));
            }
            if c.nrows() != chains[0].nrows() {
                return Err(Error::Shape(format!(
                    "chain {i} has {} draws, chain 0 has {}",
                    c.nrows(),
                    chains[0].nrows()
                )));
            }
        }
        Ok(Self { names, chains })
    }

    pub fn n_params(&self) -> usize {
        self.names.len()
    }

    /// One parameter's draws, per chain.
    pub fn column(&self, index: usize) -> Vec<Vec<f64>> {
        self.chains.iter().map(|c| c.column(index).to_vec()).collect()
    }

    pub fn thin(&self, factor: usize) -> Result<Self> {
        Ok(Self {
            names: self.names.clone(),
            chains: self.chains.iter().map(|c| thin(c.view(), factor)).collect::<Result<_>>()?,
        })
    }

    /// All chains stacked row-wise.
    pub fn pooled(&self) -> Array2<f64> {
        let views: Vec<_> = self.chains.iter().map(|c| c.view()).collect();
        if views.is_empty() {
            return Array2::zeros((0, self.names.len()));
        }
        ndarray::concatenate(Axis(0), &views).expect("validated shapes")
    }

    pub fn split_rhat(&self, index: usize) -> Result<Option<f64>> {
        split_rhat(&self.column(index))
    }
}

/// Keeps rows `0, factor, 2 factor, ...`.
pub fn thin(draws: ArrayView2<f64>, factor: usize) -> Result<Array2<f64>> {
    if factor < 1 {
        return Err(Error::InvalidParameter("thinning factor must be at least 1".into()));
    }
    Ok(draws.slice(ndarray::s![..;factor, ..]).to_owned())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Gelman-Rubin statistic of equal-length chains.
fn gelman_rubin(chains: &[Vec<f64>]) -> f64 {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = mean(&chains.iter().map(|c| sample_variance(c)).collect::<Vec<_>>());
    let b = n * sample_variance(&means);
    ((b / w + n - 1.0) / n).sqrt()
}

fn check_chains(chains: &[Vec<f64>], min_len: usize) -> Result<()> {
    if chains.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "R-hat needs at least 2 chains, got {}",
            chains.len()
        )));
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::Shape("chains differ in length".into()));
    }
    if n < min_len {
        return Err(Error::InvalidParameter(format!(
            "R-hat needs at least {min_len} draws per chain, got {n}"
        )));
    }
    Ok(())
}

fn has_spread(chains: &[Vec<f64>]) -> bool {
    let first = chains[0][0];
    chains.iter().flatten().any(|&x| x != first)
}

/// Classic Gelman-Rubin potential scale reduction over whole chains.
/// `None` when every draw is identical.
pub fn rhat_classic(chains: &[Vec<f64>]) -> Result<Option<f64>> {
    check_chains(chains, 2)?;
    if !has_spread(chains) {
        return Ok(None);
    }
    Ok(Some(gelman_rubin(chains)))
}

fn split_halves(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let half = c.len() / 2;
        out.push(c[..half].to_vec());
        out.push(c[c.len() - half..].to_vec());
    }
    out
}

/// Average ranks (1-based) of the pooled draws mapped through the normal
/// quantile function, preserving the chain layout. Values closer than a
/// tiny fraction of the pooled range count as ties so that rounding noise
/// from affine rescaling cannot reorder them.
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let pooled: Vec<f64> = chains.iter().flatten().copied().collect();
    let s = pooled.len();
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let (lo, hi) = (pooled[order[0]], pooled[order[s - 1]]);
    let tol = 1e-10 * (hi - lo);

    let mut ranks = vec![0.0; s];
    let mut start = 0;
    while start < s {
        let mut end = start + 1;
        while end < s && pooled[order[end]] - pooled[order[end - 1]] <= tol {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }

    let normal = Normal::standard();
    let denom = s as f64 + 0.25;
    let mut z = ranks.into_iter().map(|r| normal.inverse_cdf((r - 0.375) / denom));
    chains
        .iter()
        .map(|c| z.by_ref().take(c.len()).collect())
        .collect()
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Rank-normalized split R-hat: the larger of the bulk and folded
/// variants. Each chain is halved (the middle draw of an odd-length chain
/// is dropped) before ranking. `None` when every draw is identical.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<Option<f64>> {
    check_chains(chains, 4)?;
    if !has_spread(chains) {
        return Ok(None);
    }
    let split = split_halves(chains);
    let bulk = gelman_rubin(&rank_normalize(&split));

    let med = median(&split.iter().flatten().copied().collect::<Vec<_>>());
    let folded: Vec<Vec<f64>> = split
        .iter()
        .map(|c| c.iter().map(|x| (x - med).abs()).collect())
        .collect();
    let tail = gelman_rubin(&rank_normalize(&folded));
    Ok(Some(bulk.max(tail)))
}

/// Linear interpolation between order statistics of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
    pub ci_lo95: f64,
    pub ci_hi95: f64,
    /// `None` when R-hat is undefined (fewer than two chains, too few
    /// draws, or no spread).
    pub rhat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorSummary {
    pub parameters: Vec<ParameterSummary>,
}

/// Summary of draws pooled across chains. `std` is the population standard
/// deviation; the credible interval is equal-tailed.
pub fn summarize_values(name: &str, chains: &[Vec<f64>]) -> Result<ParameterSummary> {
    let mut pooled: Vec<f64> = chains.iter().flatten().copied().collect();
    if pooled.is_empty() {
        return Err(Error::Data(format!("no draws for parameter {name}")));
    }
    let m = mean(&pooled);
    let var = pooled.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / pooled.len() as f64;
    pooled.sort_by(f64::total_cmp);
    let q = |p| quantile_sorted(&pooled, p);
    let rhat = if chains.len() >= 2 {
        split_rhat(chains).ok().flatten()
    } else {
        None
    };
    Ok(ParameterSummary {
        name: name.to_string(),
        mean: m,
        std: var.sqrt(),
        q05: q(0.05),
        q50: q(0.5),
        q95: q(0.95),
        ci_lo95: q(0.025),
        ci_hi95: q(0.975),
        rhat,
    })
}

pub fn posterior_summary(draws: &PosteriorDraws) -> Result<PosteriorSummary> {
    if draws.chains.is_empty() || draws.chains[0].nrows() == 0 {
        return Err(Error::Data("posterior holds no draws".into()));
    }
    let parameters = draws
        .names
        .iter()
        .enumerate()
        .map(|(i, name)| summarize_values(name, &draws.column(i)))
        .collect::<Result<_>>()?;
    Ok(PosteriorSummary { parameters })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

impl PosteriorSummary {
    /// CSV with columns `name,mean,std,q05,q50,q95,rhat`; undefined R-hat is
    /// written as `NA`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Data(format!("writing summary: {e}"));
        w.write_record(["name", "mean", "std", "q05", "q50", "q95", "rhat"]).map_err(io)?;
        for p in &self.parameters {
            w.write_record([
                p.name.clone(),
                p.mean.to_string(),
                p.std.to_string(),
                p.q05.to_string(),
                p.q50.to_string(),
                p.q95.to_string(),
                fmt_opt(p.rhat),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Data(format!("writing summary: {e}")))?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    pub fn get(&self, name: &str) -> Option<&ParameterSummary> {
        self.parameters.iter().find(|p| p.name == name)
    }
}

pub fn rmse(predictions: &[f64], observations: &[f64]) -> Result<f64> {
    ensure_len("observations", observations.len(), predictions.len())?;
    if predictions.is_empty() {
        return Err(Error::Shape("rmse of empty vectors".into()));
    }
    let ss: f64 = predictions
        .iter()
        .zip(observations)
        .map(|(p, o)| (p - o) * (p - o))
        .sum();
    Ok((ss / predictions.len() as f64).sqrt())
}

/// Percentage of matching labels.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    ensure_len("true labels", truth.len(), predicted.len())?;
    if predicted.is_empty() {
        return Err(Error::Shape("accuracy of empty vectors".into()));
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(100.0 * hits as f64 / predicted.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DrawMode {
    /// Independent normal per parameter with the posterior mean and std.
    GaussianApprox,
    /// Stored posterior rows drawn uniformly with replacement.
    Empirical,
    /// Stored posterior rows in order, wrapping around.
    EmpiricalSequential,
}

impl std::str::FromStr for DrawMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian-approx" => Ok(DrawMode::GaussianApprox),
            "empirical" => Ok(DrawMode::Empirical),
            "empirical-sequential" => Ok(DrawMode::EmpiricalSequential),
            other => Err(Error::InvalidParameter(format!("unknown draw mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for DrawMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DrawMode::GaussianApprox => "gaussian-approx",
            DrawMode::Empirical => "empirical",
            DrawMode::EmpiricalSequential => "empirical-sequential",
        })
    }
}

/// Predictions from parameter draws with a per-instance mean and
/// equal-tailed 95% band. For classification the per-draw value is the
/// predicted label.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawPredictions {
    /// `num_draws x n_rows`.
    pub draws: Array2<f64>,
    pub mean: Array1<f64>,
    pub lo95: Array1<f64>,
    pub hi95: Array1<f64>,
    /// Most frequent label per row, lowest label on ties (classification).
    pub majority: Option<Vec<usize>>,
}

/// Evaluates the model under `num_draws` parameter vectors taken from the
/// stored posterior `theta` (`n_kept x n_params`, parameters only).
///
/// With `noise_tau2` (the stored noise variances, one per posterior row) a
/// regression draw becomes `f(x) + N(0, tau2)`, so the band covers
/// observations rather than the mean function.
pub fn model_draws<R: Rng + ?Sized>(
    theta: ArrayView2<f64>,
    noise_tau2: Option<ArrayView1<f64>>,
    spec: &ModelSpec,
    x: ArrayView2<f64>,
    num_draws: usize,
    mode: DrawMode,
    rng: &mut R,
) -> Result<DrawPredictions> {
    if num_draws == 0 {
        return Err(Error::InvalidParameter("num_draws must be at least 1".into()));
    }
    ensure_len("posterior columns", theta.ncols(), spec.n_params())?;
    if theta.nrows() == 0 {
        return Err(Error::Data("posterior holds no draws".into()));
    }
    if let Some(t) = noise_tau2 {
        ensure_len("noise variances", t.len(), theta.nrows())?;
        if spec.task != Task::Regression {
            return Err(Error::InvalidParameter("observation noise applies to regression only".into()));
        }
    }
    let (mu, sd) = match mode {
        DrawMode::GaussianApprox => {
            let mu = theta.mean_axis(Axis(0)).expect("non-empty");
            let sd = theta.std_axis(Axis(0), 0.0);
            (mu, sd)
        }
        _ => (Array1::zeros(0), Array1::zeros(0)),
    };
    let tau_moments = noise_tau2.map(|t| (t.mean().expect("non-empty"), t.std(0.0)));

    let mut model = Model::new(spec)?;
    let n = x.nrows();
    let mut draws = Array2::zeros((num_draws, n));
    let mut sample = vec![0.0; spec.n_params()];
    for d in 0..num_draws {
        let row = match mode {
            DrawMode::GaussianApprox => {
                for ((s, m), sdev) in sample.iter_mut().zip(&mu).zip(&sd) {
                    *s = m + sdev * rng.sample::<f64, _>(StandardNormal);
                }
                None
            }
            DrawMode::Empirical => Some(rng.random_range(0..theta.nrows())),
            DrawMode::EmpiricalSequential => Some(d % theta.nrows()),
        };
        if let Some(r) = row {
            sample.iter_mut().zip(theta.row(r)).for_each(|(s, t)| *s = *t);
        }
        let tau2 = match (noise_tau2, row, tau_moments) {
            (Some(t), Some(r), _) => Some(t[r]),
            // a normal draw for the variance can go negative; clip at zero
            (Some(_), None, Some((m, s))) => Some((m + s * rng.sample::<f64, _>(StandardNormal)).max(0.0)),
            _ => None,
        };
        let out = model.outputs(x, &sample)?;
        let mut dst = draws.row_mut(d);
        match spec.task {
            Task::Regression => {
                dst.assign(&out.column(0));
                if let Some(t2) = tau2 {
                    let sd = t2.sqrt();
                    dst.iter_mut().for_each(|v| *v += sd * rng.sample::<f64, _>(StandardNormal));
                }
            }
            Task::Classification => {
                let (labels, _) = classify(out.view())?;
                dst.iter_mut().zip(labels).for_each(|(v, l)| *v = l as f64);
            }
        }
    }

    let mean = draws.mean_axis(Axis(0)).expect("num_draws >= 1");
    let mut lo95 = Array1::zeros(n);
    let mut hi95 = Array1::zeros(n);
    for (j, col) in draws.columns().into_iter().enumerate() {
        let mut v = col.to_vec();
        v.sort_by(f64::total_cmp);
        lo95[j] = quantile_sorted(&v, 0.025);
        hi95[j] = quantile_sorted(&v, 0.975);
    }
    let majority = (spec.task == Task::Classification).then(|| {
        draws
            .columns()
            .into_iter()
            .map(|col| {
                let mut counts = vec![0usize; spec.output_num];
                col.iter().for_each(|&l| counts[l as usize] += 1);
                let mut best = 0;
                for (k, &c) in counts.iter().enumerate() {
                    if c > counts[best] {
                        best = k;
                    }
                }
                best
            })
            .collect()
    });
    Ok(DrawPredictions {
        draws,
        mean,
        lo95,
        hi95,
        majority,
    })
}

/// Reads a posterior CSV (header row of parameter names, one row per draw).
/// Non-parameter columns such as `metric` are kept; callers select by name.
pub fn read_draws_csv(path: &Path) -> Result<(Vec<String>, Array2<f64>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut values = Vec::new();
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        for (c, cell) in record.iter().enumerate() {
            let v = if cell == "NA" {
                f64::NAN
            } else {
                cell.trim().parse::<f64>().map_err(|_| {
                    Error::Data(format!(
                        "{}: row {}, column {}: cannot parse '{cell}'",
                        path.display(),
                        r + 2,
                        c + 1
                    ))
                })?
            };
            values.push(v);
        }
        rows += 1;
    }
    let m = Array2::from_shape_vec((rows, names.len()), values)
        .map_err(|e| Error::Shape(format!("{}: {e}", path.display())))?;
    Ok((names, m))
}
