//! Likelihoods, priors, proposals and the Metropolis-Hastings sampling loops.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::diagnostics::{accuracy, PosteriorDraws};
use crate::error::{ensure_len, Error, Result};
use crate::model::{argmax, Family, Model, ModelSpec, Network, Task};
use crate::prob::{
    binomial_logpmf, invgamma_unnorm_logpdf, isotropic_gaussian_logratio_core, softmax_into,
    InvGammaParams,
};

/// Sampler hyperparameters for one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_samples: usize,
    pub burn_in_fraction: f64,
    /// Standard deviation of the random-walk and Langevin parameter noise.
    pub step_theta: f64,
    /// Standard deviation of the random walk on `eta = ln tau2`.
    pub step_eta: f64,
    /// Variance of the zero-mean Gaussian prior on every parameter.
    pub sigma2_prior: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub use_langevin: bool,
    pub l_prob: f64,
    pub sgd_depth: usize,
    pub seed: u64,
    /// Hold the regression noise variance at this value instead of sampling it.
    pub fixed_tau2: Option<f64>,
    /// Keep a prediction row per sample for the train and test sets.
    pub record_predictions: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self::linear_defaults()
    }
}

impl SamplerConfig {
    /// Random-walk proposals only; Langevin gradients are opt-in for the
    /// linear model.
    pub fn linear_defaults() -> Self {
        Self {
            n_samples: 5000,
            burn_in_fraction: 0.5,
            step_theta: 0.02,
            step_eta: 0.01,
            sigma2_prior: 5.0,
            nu1: 0.0,
            nu2: 0.0,
            use_langevin: false,
            l_prob: 0.5,
            sgd_depth: 1,
            seed: 0,
            fixed_tau2: None,
            record_predictions: false,
        }
    }

    pub fn mlp_defaults() -> Self {
        Self {
            step_theta: 0.025,
            step_eta: 0.2,
            sigma2_prior: 25.0,
            use_langevin: true,
            ..Self::linear_defaults()
        }
    }

    pub fn defaults_for(family: Family) -> Self {
        match family {
            Family::Linear => Self::linear_defaults(),
            Family::Mlp => Self::mlp_defaults(),
        }
    }

    /// Default gradient learning rate for a family.
    pub fn default_learning_rate(family: Family) -> f64 {
        match family {
            Family::Linear => 0.1,
            Family::Mlp => 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(msg));
        if self.n_samples < 2 {
            return bad(format!("n_samples must be at least 2, got {}", self.n_samples));
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return bad(format!("burn_in_fraction must lie in [0, 1), got {}", self.burn_in_fraction));
        }
        for (name, v) in [
            ("step_theta", self.step_theta),
            ("step_eta", self.step_eta),
            ("sigma2_prior", self.sigma2_prior),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        InvGammaParams::new(self.nu1, self.nu2).map_err(|e| Error::Validation(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.l_prob) {
            return bad(format!("l_prob must lie in [0, 1], got {}", self.l_prob));
        }
        if let Some(t) = self.fixed_tau2 {
            if !(t > 0.0) || !t.is_finite() {
                return bad(format!("fixed_tau2 must be positive and finite, got {t}"));
            }
        }
        Ok(())
    }

    pub fn n_burn_in(&self) -> usize {
        (self.burn_in_fraction * self.n_samples as f64).floor() as usize
    }

    pub fn n_kept(&self) -> usize {
        self.n_samples - self.n_burn_in()
    }
}

/// The three terms of a Metropolis-Hastings log ratio for one state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LogPosteriorParts {
    pub log_likelihood: f64,
    pub log_prior: f64,
    /// `ln q(current | proposed) - ln q(proposed | current)`; zero for
    /// symmetric proposals and for the current state.
    pub log_qratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub log_likelihood: f64,
    pub predictions: Vec<f64>,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationFit {
    pub log_likelihood: f64,
    pub labels: Vec<usize>,
    /// Percentage of correctly labelled rows.
    pub accuracy: f64,
}

/// Gaussian log-likelihood of single-output regression targets `y`.
pub fn gaussian_log_likelihood(
    model: &mut Model,
    theta: &[f64],
    tau2: f64,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
) -> Result<RegressionFit> {
    if !(tau2 > 0.0) {
        return Err(Error::InvalidParameter(format!("tau2 must be positive, got {tau2}")));
    }
    ensure_len("regression outputs", model.spec().output_num, 1)?;
    ensure_len("target rows", y.len(), x.nrows())?;
    let predictions = model.outputs(x, theta)?.into_raw_vec_and_offset().0;
    let norm = -0.5 * (2.0 * std::f64::consts::PI * tau2).ln();
    let mut log_likelihood = 0.0;
    let mut sq = 0.0;
    for (f, yt) in predictions.iter().zip(y) {
        let r = yt - f;
        sq += r * r;
        log_likelihood += norm - r * r / (2.0 * tau2);
    }
    let rmse = (sq / predictions.len() as f64).sqrt();
    Ok(RegressionFit {
        log_likelihood,
        predictions,
        rmse,
    })
}

/// Multinomial log-likelihood `sum_t ln pi_{t, y_t}` with class
/// probabilities from the softmax of the output layer.
pub fn multinomial_log_likelihood(
    model: &mut Model,
    theta: &[f64],
    x: ArrayView2<f64>,
    labels: &[usize],
) -> Result<ClassificationFit> {
    let k = model.spec().output_num;
    ensure_len("label rows", labels.len(), x.nrows())?;
    if let Some(bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::Data(format!("class index {bad} outside [0, {k})")));
    }
    let outputs = model.outputs(x, theta)?;
    let mut probs = vec![0.0; k];
    let mut predicted = Vec::with_capacity(labels.len());
    let mut log_likelihood = 0.0;
    for (row, &truth) in outputs.rows().into_iter().zip(labels) {
        softmax_into(row.as_slice().expect("owned row-major"), &mut probs)?;
        log_likelihood += probs[truth].ln();
        predicted.push(argmax(&probs));
    }
    let accuracy = accuracy(&predicted, labels)?;
    Ok(ClassificationFit {
        log_likelihood,
        labels: predicted,
        accuracy,
    })
}

fn gaussian_prior_terms(sigma2: f64, theta: &[f64]) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter(format!("prior variance must be positive, got {sigma2}")));
    }
    let m = theta.len() as f64;
    let ss: f64 = theta.iter().map(|t| t * t).sum();
    Ok(-0.5 * m * sigma2.ln() - ss / (2.0 * sigma2))
}

/// Gaussian prior on `theta` plus the unnormalized inverse-gamma prior on
/// `tau2`, with the `2 pi` constant dropped.
pub fn regression_log_prior(sigma2: f64, nu1: f64, nu2: f64, theta: &[f64], tau2: f64) -> Result<f64> {
    let ig = InvGammaParams::new(nu1, nu2)?;
    Ok(gaussian_prior_terms(sigma2, theta)? + invgamma_unnorm_logpdf(tau2, &ig)?)
}

pub fn classification_log_prior(sigma2: f64, theta: &[f64]) -> Result<f64> {
    gaussian_prior_terms(sigma2, theta)
}

fn add_noise<R: Rng + ?Sized>(mean: &[f64], sd: f64, rng: &mut R) -> Vec<f64> {
    mean.iter()
        .map(|m| m + sd * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn check_step(name: &str, step: f64) -> Result<()> {
    if step > 0.0 && step.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {step}")))
    }
}

/// Gaussian random walk `theta + N(0, step_theta^2)` per element.
pub fn rw_propose<R: Rng + ?Sized>(theta: &[f64], step_theta: f64, rng: &mut R) -> Result<Vec<f64>> {
    check_step("step_theta", step_theta)?;
    Ok(add_noise(theta, step_theta, rng))
}

/// Random walk on `eta = ln tau2`; returns `(eta', tau2')`.
pub fn eta_propose<R: Rng + ?Sized>(eta: f64, step_eta: f64, rng: &mut R) -> Result<(f64, f64)> {
    check_step("step_eta", step_eta)?;
    let next = eta + step_eta * rng.sample::<f64, _>(StandardNormal);
    Ok((next, next.exp()))
}

/// `ln q(theta | proposal) - ln q(proposal | theta)` for Gaussian proposals
/// centred on the gradient-map images `theta_bar` and `proposal_bar`.
pub fn langevin_log_qratio(
    theta: &[f64],
    theta_bar: &[f64],
    proposal: &[f64],
    proposal_bar: &[f64],
    sigma2: f64,
) -> f64 {
    let back: Vec<f64> = theta.iter().zip(proposal_bar).map(|(a, b)| a - b).collect();
    let forth: Vec<f64> = proposal.iter().zip(theta_bar).map(|(a, b)| a - b).collect();
    isotropic_gaussian_logratio_core(&back, sigma2) - isotropic_gaussian_logratio_core(&forth, sigma2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LangevinProposal {
    pub theta: Vec<f64>,
    pub log_qratio: f64,
}

/// Proposal centred on the gradient map of `theta`. The noise uses
/// `step_theta` as its standard deviation while the q-ratio uses it as the
/// variance, as the reference sampler does.
pub fn langevin_propose<R: Rng + ?Sized>(
    model: &mut Model,
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    theta: &[f64],
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<LangevinProposal> {
    check_step("step_theta", config.step_theta)?;
    ensure_len("parameter vector", theta.len(), model.spec().n_params())?;
    let theta_bar = model.langevin_gradient(x, y, theta, config.sgd_depth)?;
    let proposal = add_noise(&theta_bar, config.step_theta, rng);
    let proposal_bar = model.langevin_gradient(x, y, &proposal, config.sgd_depth)?;
    let log_qratio = langevin_log_qratio(theta, &theta_bar, &proposal, &proposal_bar, config.step_theta);
    Ok(LangevinProposal {
        theta: proposal,
        log_qratio,
    })
}

/// Accepts iff `ln u < delta log-likelihood + delta log-prior + log q-ratio`.
pub fn mh_accept<R: Rng + ?Sized>(
    proposed: &LogPosteriorParts,
    current: &LogPosteriorParts,
    rng: &mut R,
) -> Result<bool> {
    let u: f64 = rng.random();
    let parts = [
        proposed.log_likelihood,
        proposed.log_prior,
        proposed.log_qratio,
        current.log_likelihood,
        current.log_prior,
    ];
    if parts.iter().any(|v| v.is_nan()) {
        return Err(Error::Numerical("NaN in Metropolis-Hastings ratio".into()));
    }
    let log_ratio = (proposed.log_likelihood - current.log_likelihood)
        + (proposed.log_prior - current.log_prior)
        + proposed.log_qratio;
    if log_ratio.is_nan() {
        return Err(Error::Numerical("undefined Metropolis-Hastings ratio".into()));
    }
    Ok(u.ln() < log_ratio)
}

/// Independence sampler for a binomial success probability under a uniform
/// prior. Returns the draws left after burn-in.
pub fn sample_binomial_demo<R: Rng + ?Sized>(
    k: u64,
    n: u64,
    n_samples: usize,
    burn_in_fraction: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if k > n {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds n = {n}")));
    }
    if !(0.0..1.0).contains(&burn_in_fraction) {
        return Err(Error::InvalidParameter(format!(
            "burn_in_fraction must lie in [0, 1), got {burn_in_fraction}"
        )));
    }
    let n_burn = (burn_in_fraction * n_samples as f64).floor() as usize;
    let mut p: f64 = rng.random();
    let mut current = binomial_logpmf(k, n, p)?;
    let mut kept = Vec::with_capacity(n_samples - n_burn);
    for i in 0..n_samples {
        let candidate: f64 = rng.random();
        let proposed = binomial_logpmf(k, n, candidate)?;
        let u: f64 = rng.random();
        // -inf - -inf cannot happen: the start point has positive likelihood
        // with probability one.
        if u.ln() < proposed - current {
            p = candidate;
            current = proposed;
        }
        if i >= n_burn {
            kept.push(p);
        }
    }
    Ok(kept)
}

/// One chain: stored posterior after burn-in and full-length traces.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub chain_index: usize,
    pub spec: ModelSpec,
    pub config: SamplerConfig,
    /// `n_kept x n_params`.
    pub pos_theta: Array2<f64>,
    /// Kept noise variances (regression only).
    pub pos_tau: Option<Vec<f64>>,
    /// Per-sample train metric over all samples (RMSE or accuracy %).
    pub train_metric: Vec<f64>,
    /// Per-sample test metric over all samples; NaN without test rows.
    pub test_metric: Vec<f64>,
    pub log_likelihood: Vec<f64>,
    pub log_prior: Vec<f64>,
    /// `n_samples x n_train` predictions (class labels for classification).
    pub pred_train: Option<Array2<f64>>,
    pub pred_test: Option<Array2<f64>>,
    pub accept_count: usize,
    pub langevin_count: usize,
    /// Proposals rejected because their log posterior was not a number.
    pub nonfinite_count: usize,
}

impl Chain {
    pub fn n_kept(&self) -> usize {
        self.pos_theta.nrows()
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accept_count as f64 / self.config.n_samples as f64
    }

    pub fn kept_train_metric(&self) -> &[f64] {
        &self.train_metric[self.config.n_burn_in()..]
    }

    pub fn kept_test_metric(&self) -> &[f64] {
        &self.test_metric[self.config.n_burn_in()..]
    }

    /// Column names of [`Chain::posterior_matrix`].
    pub fn posterior_names(&self) -> Vec<String> {
        let mut names = self.spec.param_names();
        if self.pos_tau.is_some() {
            names.push("tau".into());
        }
        names
    }

    /// Kept parameters with the noise variance appended as a last column
    /// for regression.
    pub fn posterior_matrix(&self) -> Array2<f64> {
        match &self.pos_tau {
            None => self.pos_theta.clone(),
            Some(tau) => {
                let (n, m) = self.pos_theta.dim();
                Array2::from_shape_fn((n, m + 1), |(i, j)| {
                    if j < m {
                        self.pos_theta[[i, j]]
                    } else {
                        tau[i]
                    }
                })
            }
        }
    }
}

/// Per-chain failure from a multi-chain run.
#[derive(Debug)]
pub struct ChainFailure {
    pub chain_index: usize,
    pub error: Error,
}

/// Independent chains over one model and dataset, ordered by chain index.
#[derive(Debug, Default)]
pub struct ChainSet {
    pub chains: Vec<Chain>,
    pub failures: Vec<ChainFailure>,
}

impl ChainSet {
    /// Parameter draws of all surviving chains for diagnostics.
    pub fn draws(&self) -> Result<PosteriorDraws> {
        let first = self
            .chains
            .first()
            .ok_or_else(|| Error::Data("chain set holds no chains".into()))?;
        PosteriorDraws::new(
            first.posterior_names(),
            self.chains.iter().map(Chain::posterior_matrix).collect(),
        )
    }
}

struct Targets {
    /// Single-column regression targets or one-hot class indicators; the
    /// gradient map trains against these.
    train_matrix: Array2<f64>,
    train_labels: Vec<usize>,
    test_labels: Vec<usize>,
}

fn prepare_targets(spec: &ModelSpec, data: &Dataset) -> Result<Targets> {
    let n = data.y_train.len();
    match spec.task {
        Task::Regression => Ok(Targets {
            train_matrix: data.y_train.view().into_shape_with_order((n, 1)).map_err(|e| Error::Shape(e.to_string()))?.to_owned(),
            train_labels: Vec::new(),
            test_labels: Vec::new(),
        }),
        Task::Classification => {
            let train_labels = data.class_indices(data.y_train.view(), spec.output_num)?;
            let test_labels = data.class_indices(data.y_test.view(), spec.output_num)?;
            let mut train_matrix = Array2::zeros((n, spec.output_num));
            for (i, &l) in train_labels.iter().enumerate() {
                train_matrix[[i, l]] = 1.0;
            }
            Ok(Targets {
                train_matrix,
                train_labels,
                test_labels,
            })
        }
    }
}

struct Evaluation {
    log_likelihood: f64,
    metric: f64,
    predictions: Vec<f64>,
}

fn evaluate(
    model: &mut Model,
    theta: &[f64],
    tau2: Option<f64>,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    labels: &[usize],
) -> Result<Evaluation> {
    if x.nrows() == 0 {
        return Ok(Evaluation {
            log_likelihood: 0.0,
            metric: f64::NAN,
            predictions: Vec::new(),
        });
    }
    match tau2 {
        Some(t) => {
            let fit = gaussian_log_likelihood(model, theta, t, x, y)?;
            Ok(Evaluation {
                log_likelihood: fit.log_likelihood,
                metric: fit.rmse,
                predictions: fit.predictions,
            })
        }
        None => {
            let fit = multinomial_log_likelihood(model, theta, x, labels)?;
            Ok(Evaluation {
                log_likelihood: fit.log_likelihood,
                metric: fit.accuracy,
                predictions: fit.labels.iter().map(|&l| l as f64).collect(),
            })
        }
    }
}

fn log_prior(spec: &ModelSpec, config: &SamplerConfig, theta: &[f64], tau2: Option<f64>) -> Result<f64> {
    match (spec.task, tau2) {
        (Task::Regression, Some(t)) => regression_log_prior(config.sigma2_prior, config.nu1, config.nu2, theta, t),
        (Task::Regression, None) => Err(Error::InvalidParameter("regression needs tau2".into())),
        (Task::Classification, _) => classification_log_prior(config.sigma2_prior, theta),
    }
}

/// Evaluation failures at a proposal that count as rejections rather than
/// aborting the chain.
fn recoverable(e: &Error) -> bool {
    matches!(e, Error::Numerical(_) | Error::InvalidParameter(_))
}

fn population_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

/// Runs one Metropolis-Hastings chain seeded from `config.seed`.
pub fn run_chain(spec: &ModelSpec, data: &Dataset, config: &SamplerConfig) -> Result<Chain> {
    run_chain_indexed(spec, data, config, 0)
}

fn check_compatible(spec: &ModelSpec, data: &Dataset) -> Result<()> {
    spec.validate()?;
    if spec.task != data.task {
        return Err(Error::Validation(format!(
            "model task {} does not match dataset task {}",
            spec.task, data.task
        )));
    }
    if data.x_train.ncols() != spec.input_num || data.x_test.ncols() != spec.input_num {
        return Err(Error::Shape(format!(
            "dataset has {} features, model expects {}",
            data.x_train.ncols(),
            spec.input_num
        )));
    }
    if data.x_train.nrows() == 0 {
        return Err(Error::Data("training split is empty".into()));
    }
    if spec.task == Task::Regression && spec.output_num != 1 {
        return Err(Error::Validation("regression models have a single output".into()));
    }
    Ok(())
}

fn run_chain_indexed(
    spec: &ModelSpec,
    data: &Dataset,
    config: &SamplerConfig,
    chain_index: usize,
) -> Result<Chain> {
    config.validate()?;
    check_compatible(spec, data)?;
    let targets = prepare_targets(spec, data)?;
    let regression = spec.task == Task::Regression;
    let n = config.n_samples;
    let m = spec.n_params();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = Model::new(spec)?;

    let (x_train, y_train) = (data.x_train.view(), data.y_train.view());
    let (x_test, y_test) = (data.x_test.view(), data.y_test.view());

    let mut theta: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let mut eta = 0.0;
    let mut tau2 = None;
    if regression {
        tau2 = Some(match config.fixed_tau2 {
            Some(t) => t,
            None => {
                let pred = model.outputs(x_train, &theta)?;
                let resid: Vec<f64> = pred.iter().zip(y_train).map(|(f, y)| f - y).collect();
                eta = population_variance(&resid).ln();
                if !eta.is_finite() {
                    eta = 0.0;
                }
                eta.exp()
            }
        });
    }

    let train0 = evaluate(&mut model, &theta, tau2, x_train, y_train, &targets.train_labels)?;
    let test0 = evaluate(&mut model, &theta, tau2, x_test, y_test, &targets.test_labels)?;
    let mut current = LogPosteriorParts {
        log_likelihood: train0.log_likelihood,
        log_prior: log_prior(spec, config, &theta, tau2)?,
        log_qratio: 0.0,
    };
    let mut cur_train_pred = train0.predictions;
    let mut cur_test_pred = test0.predictions;
    let mut cur_train_metric = train0.metric;
    let mut cur_test_metric = test0.metric;

    let mut all_theta = Array2::zeros((n, m));
    let mut all_tau = vec![0.0; if regression { n } else { 0 }];
    let mut train_metric = Vec::with_capacity(n);
    let mut test_metric = Vec::with_capacity(n);
    let mut ll_trace = Vec::with_capacity(n);
    let mut lp_trace = Vec::with_capacity(n);
    let mut pred_train = config
        .record_predictions
        .then(|| Array2::zeros((n, x_train.nrows())));
    let mut pred_test = config
        .record_predictions
        .then(|| Array2::zeros((n, x_test.nrows())));

    let mut accept_count = 0;
    let mut langevin_count = 0;
    let mut nonfinite_count = 0;

    #[allow(clippy::needless_range_loop)]
    for i in 0..n {
        if i > 0 {
            let kappa: f64 = rng.random();
            let proposal = if config.use_langevin && kappa < config.l_prob {
                langevin_count += 1;
                langevin_propose(&mut model, x_train, targets.train_matrix.view(), &theta, config, &mut rng)?
            } else {
                LangevinProposal {
                    theta: rw_propose(&theta, config.step_theta, &mut rng)?,
                    log_qratio: 0.0,
                }
            };
            let (eta_p, tau2_p) = match (regression, config.fixed_tau2) {
                (false, _) => (eta, None),
                (true, Some(t)) => (eta, Some(t)),
                (true, None) => {
                    let (e, t) = eta_propose(eta, config.step_eta, &mut rng)?;
                    (e, Some(t))
                }
            };

            let scored = log_prior(spec, config, &proposal.theta, tau2_p).and_then(|lp| {
                let fit = evaluate(&mut model, &proposal.theta, tau2_p, x_train, y_train, &targets.train_labels)?;
                Ok((lp, fit))
            });
            let decision = scored.and_then(|(lp, fit)| {
                let parts = LogPosteriorParts {
                    log_likelihood: fit.log_likelihood,
                    log_prior: lp,
                    log_qratio: proposal.log_qratio,
                };
                Ok((mh_accept(&parts, &current, &mut rng)?, parts, fit))
            });
            match decision {
                Ok((true, parts, fit)) => {
                    accept_count += 1;
                    let test = evaluate(&mut model, &proposal.theta, tau2_p, x_test, y_test, &targets.test_labels)?;
                    current = LogPosteriorParts { log_qratio: 0.0, ..parts };
                    theta = proposal.theta;
                    eta = eta_p;
                    tau2 = tau2_p;
                    cur_train_pred = fit.predictions;
                    cur_train_metric = fit.metric;
                    cur_test_pred = test.predictions;
                    cur_test_metric = test.metric;
                }
                Ok((false, ..)) => {}
                Err(e) if recoverable(&e) => nonfinite_count += 1,
                Err(e) => return Err(e),
            }
        }

        all_theta
            .row_mut(i)
            .as_slice_mut()
            .expect("row-major")
            .copy_from_slice(&theta);
        if let Some(t) = tau2.filter(|_| regression) {
            all_tau[i] = t;
        }
        train_metric.push(cur_train_metric);
        test_metric.push(cur_test_metric);
        ll_trace.push(current.log_likelihood);
        lp_trace.push(current.log_prior);
        if let Some(p) = pred_train.as_mut() {
            p.row_mut(i).iter_mut().zip(&cur_train_pred).for_each(|(d, s)| *d = *s);
        }
        if let Some(p) = pred_test.as_mut() {
            p.row_mut(i).iter_mut().zip(&cur_test_pred).for_each(|(d, s)| *d = *s);
        }
    }

    let burn = config.n_burn_in();
    Ok(Chain {
        chain_index,
        spec: *spec,
        config: config.clone(),
        pos_theta: all_theta.slice(ndarray::s![burn.., ..]).to_owned(),
        pos_tau: regression.then(|| all_tau[burn..].to_vec()),
        train_metric,
        test_metric,
        log_likelihood: ll_trace,
        log_prior: lp_trace,
        pred_train,
        pred_test,
        accept_count,
        langevin_count,
        nonfinite_count,
    })
}

/// Runs `n_chains` chains with seeds `config.seed + i` on up to `jobs`
/// threads (0 picks the rayon default). `on_done` is called as each chain
/// finishes.
pub fn run_multi_chain_with<F>(
    spec: &ModelSpec,
    data: &Dataset,
    config: &SamplerConfig,
    n_chains: usize,
    jobs: usize,
    on_done: F,
) -> Result<ChainSet>
where
    F: Fn(usize, &Result<Chain>) + Sync,
{
    if n_chains == 0 {
        return Err(Error::Validation("n_chains must be at least 1".into()));
    }
    config.validate()?;
    check_compatible(spec, data)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Validation(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<Chain>> = pool.install(|| {
        (0..n_chains)
            .into_par_iter()
            .map(|i| {
                let cfg = SamplerConfig {
                    seed: config.seed.wrapping_add(i as u64),
                    ..config.clone()
                };
                let out = run_chain_indexed(spec, data, &cfg, i);
                on_done(i, &out);
                out
            })
            .collect()
    });
    let mut set = ChainSet::default();
    for (chain_index, r) in results.into_iter().enumerate() {
        match r {
            Ok(c) => set.chains.push(c),
            Err(error) => set.failures.push(ChainFailure { chain_index, error }),
        }
    }
    Ok(set)
}

pub fn run_multi_chain(spec: &ModelSpec, data: &Dataset, config: &SamplerConfig, n_chains: usize) -> Result<ChainSet> {
    run_multi_chain_with(spec, data, config, n_chains, 0, |_, _| {})
}
