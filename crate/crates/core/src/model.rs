//! Deterministic model evaluation.
//!
//! Two families share one flat parameter layout convention: weights first
//! (row-major, `fan_in x fan_out`), biases last.
//!
//! * Linear: `[W (input x output), b (output)]`. With one output this is
//!   `[w_0, ..., w_{m-1}, b]`.
//! * MLP with one hidden layer: `[W1 (input x hidden), W2 (hidden x output),
//!   b1 (hidden), b2 (output)]`, sigmoid on both layers.
//!
//! The backward passes apply the squared-error update
//! `theta <- theta + r * (y - f) * df/dtheta` per instance (the linear
//! classifier uses the cross-entropy update `r * (y - softmax(z)) * dz/dtheta`
//! instead), and
//! [`Model::langevin_gradient`] sweeps that update over a dataset to produce
//! the mean of a Langevin-gradient proposal.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::prob::{sigmoid, softmax_into};

/// Hidden layer width used when none is given.
pub const DEFAULT_HIDDEN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Linear,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Family::Linear),
            "mlp" | "bnn" | "nn" => Ok(Family::Mlp),
            other => Err(Error::Validation(format!("unknown model family '{other}'"))),
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "regression" => Ok(Task::Regression),
            "classification" => Ok(Task::Classification),
            other => Err(Error::Validation(format!("unknown task '{other}'"))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Linear => "linear",
            Family::Mlp => "mlp",
        })
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Regression => "regression",
            Task::Classification => "classification",
        })
    }
}

/// Model family, layer sizes, task and gradient learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub input_num: usize,
    /// Zero for the linear family.
    pub hidden_num: usize,
    pub output_num: usize,
    pub task: Task,
    pub learning_rate: f64,
}

impl ModelSpec {
    pub fn linear(input_num: usize, output_num: usize, task: Task, learning_rate: f64) -> Result<Self> {
        let spec = Self {
            family: Family::Linear,
            input_num,
            hidden_num: 0,
            output_num,
            task,
            learning_rate,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn mlp(
        input_num: usize,
        hidden_num: usize,
        output_num: usize,
        task: Task,
        learning_rate: f64,
    ) -> Result<Self> {
        let spec = Self {
            family: Family::Mlp,
            input_num,
            hidden_num,
            output_num,
            task,
            learning_rate,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_num == 0 || self.output_num == 0 {
            return Err(Error::Validation("layer sizes must be positive".into()));
        }
        match self.family {
            Family::Linear if self.hidden_num != 0 => {
                return Err(Error::Validation("linear models have no hidden layer".into()))
            }
            Family::Mlp if self.hidden_num == 0 => {
                return Err(Error::Validation("mlp hidden layer must be non-empty".into()))
            }
            _ => {}
        }
        if self.task == Task::Classification && self.output_num < 2 {
            return Err(Error::Validation(
                "classification needs one output per class (at least 2)".into(),
            ));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Validation(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }

    pub fn n_weights(&self) -> usize {
        match self.family {
            Family::Linear => self.input_num * self.output_num,
            Family::Mlp => self.input_num * self.hidden_num + self.hidden_num * self.output_num,
        }
    }

    pub fn n_biases(&self) -> usize {
        match self.family {
            Family::Linear => self.output_num,
            Family::Mlp => self.hidden_num + self.output_num,
        }
    }

    pub fn n_params(&self) -> usize {
        self.n_weights() + self.n_biases()
    }

    /// Column names for a posterior row: `w0..`, then `b` (single bias) or
    /// `b0..`.
    pub fn param_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.n_weights()).map(|i| format!("w{i}")).collect();
        if self.n_biases() == 1 {
            names.push("b".into());
        } else {
            names.extend((0..self.n_biases()).map(|i| format!("b{i}")));
        }
        names
    }
}

/// Flattened model parameters plus the regression noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    pub theta: Vec<f64>,
    pub tau2: Option<f64>,
}

impl ParameterVector {
    pub fn new(spec: &ModelSpec, theta: Vec<f64>, tau2: Option<f64>) -> Result<Self> {
        ensure_len("parameter vector", theta.len(), spec.n_params())?;
        match (spec.task, tau2) {
            (Task::Regression, Some(t)) if t > 0.0 => {}
            (Task::Regression, Some(t)) => {
                return Err(Error::InvalidParameter(format!("tau2 must be positive, got {t}")))
            }
            (Task::Regression, None) => {
                return Err(Error::InvalidParameter("regression parameters need tau2".into()))
            }
            (Task::Classification, Some(_)) => {
                return Err(Error::InvalidParameter(
                    "classification parameters carry no tau2".into(),
                ))
            }
            (Task::Classification, None) => {}
        }
        Ok(Self { theta, tau2 })
    }
}

/// A network that can be loaded from, and written back to, a flat
/// parameter vector and trained one instance at a time.
pub trait Network {
    fn spec(&self) -> &ModelSpec;

    fn decode(&mut self, theta: &[f64]) -> Result<()>;

    fn encode(&self) -> Vec<f64>;

    /// Output-layer activations for one feature row. The hidden and output
    /// activations are cached for a following [`Network::backward_step`].
    fn forward(&mut self, x: &[f64]) -> Result<&[f64]>;

    /// One squared-error update towards target `y` with learning rate `r`,
    /// using the activations cached by the preceding forward pass.
    fn backward_step(&mut self, x: &[f64], y: &[f64], r: f64) -> Result<()>;
}

/// Single-hidden-layer perceptron with sigmoid activations.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpState {
    spec: ModelSpec,
    /// `input_num x hidden_num`, row-major.
    pub l1_weights: Vec<f64>,
    pub l1_biases: Vec<f64>,
    /// `hidden_num x output_num`, row-major.
    pub l2_weights: Vec<f64>,
    pub l2_biases: Vec<f64>,
    pub l1_output: Vec<f64>,
    pub l2_output: Vec<f64>,
    cached: bool,
    l1_delta: Vec<f64>,
    l2_delta: Vec<f64>,
}

impl MlpState {
    /// All-zero network.
    pub fn zeros(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        if spec.family != Family::Mlp {
            return Err(Error::Validation("MlpState needs an mlp spec".into()));
        }
        let (i, h, o) = (spec.input_num, spec.hidden_num, spec.output_num);
        Ok(Self {
            spec: *spec,
            l1_weights: vec![0.0; i * h],
            l1_biases: vec![0.0; h],
            l2_weights: vec![0.0; h * o],
            l2_biases: vec![0.0; o],
            l1_output: vec![0.0; h],
            l2_output: vec![0.0; o],
            cached: false,
            l1_delta: vec![0.0; h],
            l2_delta: vec![0.0; o],
        })
    }

    pub fn from_theta(spec: &ModelSpec, theta: &[f64]) -> Result<Self> {
        let mut state = Self::zeros(spec)?;
        state.decode(theta)?;
        Ok(state)
    }

    /// Random initialisation with per-layer scale `1/sqrt(fan)`.
    pub fn init_scaled<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> Result<Self> {
        let mut state = Self::zeros(spec)?;
        let mut fill = |v: &mut [f64], fan: usize| {
            let normal = Normal::new(0.0, 1.0 / (fan as f64).sqrt()).expect("positive scale");
            v.iter_mut().for_each(|w| *w = normal.sample(rng));
        };
        fill(&mut state.l1_weights, spec.input_num);
        fill(&mut state.l1_biases, spec.hidden_num);
        fill(&mut state.l2_weights, spec.hidden_num);
        fill(&mut state.l2_biases, spec.hidden_num);
        Ok(state)
    }
}

impl Network for MlpState {
    fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    fn decode(&mut self, theta: &[f64]) -> Result<()> {
        ensure_len("mlp parameter vector", theta.len(), self.spec.n_params())?;
        let (w1, rest) = theta.split_at(self.l1_weights.len());
        let (w2, rest) = rest.split_at(self.l2_weights.len());
        let (b1, b2) = rest.split_at(self.l1_biases.len());
        self.l1_weights.copy_from_slice(w1);
        self.l2_weights.copy_from_slice(w2);
        self.l1_biases.copy_from_slice(b1);
        self.l2_biases.copy_from_slice(b2);
        self.cached = false;
        Ok(())
    }

    fn encode(&self) -> Vec<f64> {
        let mut theta = Vec::with_capacity(self.spec.n_params());
        theta.extend_from_slice(&self.l1_weights);
        theta.extend_from_slice(&self.l2_weights);
        theta.extend_from_slice(&self.l1_biases);
        theta.extend_from_slice(&self.l2_biases);
        theta
    }

    fn forward(&mut self, x: &[f64]) -> Result<&[f64]> {
        ensure_len("mlp input row", x.len(), self.spec.input_num)?;
        let (h, o) = (self.spec.hidden_num, self.spec.output_num);
        self.l1_output.copy_from_slice(&self.l1_biases);
        for (xi, w_row) in x.iter().zip(self.l1_weights.chunks_exact(h)) {
            for (acc, w) in self.l1_output.iter_mut().zip(w_row) {
                *acc += xi * w;
            }
        }
        self.l1_output.iter_mut().for_each(|z| *z = sigmoid(*z));

        self.l2_output.copy_from_slice(&self.l2_biases);
        for (hj, w_row) in self.l1_output.iter().zip(self.l2_weights.chunks_exact(o)) {
            for (acc, w) in self.l2_output.iter_mut().zip(w_row) {
                *acc += hj * w;
            }
        }
        self.l2_output.iter_mut().for_each(|z| *z = sigmoid(*z));
        self.cached = true;
        Ok(&self.l2_output)
    }

    fn backward_step(&mut self, x: &[f64], y: &[f64], r: f64) -> Result<()> {
        if !self.cached {
            return Err(Error::State("backward pass requested before a forward pass".into()));
        }
        ensure_len("mlp input row", x.len(), self.spec.input_num)?;
        ensure_len("mlp target row", y.len(), self.spec.output_num)?;
        let (h, o) = (self.spec.hidden_num, self.spec.output_num);

        for ((d, &yk), &out) in self.l2_delta.iter_mut().zip(y).zip(&self.l2_output) {
            *d = (yk - out) * out * (1.0 - out);
        }
        // hidden deltas use the output weights before they are updated
        for (j, d) in self.l1_delta.iter_mut().enumerate() {
            let back: f64 = self.l2_weights[j * o..(j + 1) * o]
                .iter()
                .zip(&self.l2_delta)
                .map(|(w, dk)| w * dk)
                .sum();
            let hj = self.l1_output[j];
            *d = back * hj * (1.0 - hj);
        }

        for (hj, w_row) in self.l1_output.iter().zip(self.l2_weights.chunks_exact_mut(o)) {
            for (w, dk) in w_row.iter_mut().zip(&self.l2_delta) {
                *w += r * hj * dk;
            }
        }
        for (b, dk) in self.l2_biases.iter_mut().zip(&self.l2_delta) {
            *b += r * dk;
        }
        for (xi, w_row) in x.iter().zip(self.l1_weights.chunks_exact_mut(h)) {
            for (w, dj) in w_row.iter_mut().zip(&self.l1_delta) {
                *w += r * xi * dj;
            }
        }
        for (b, dj) in self.l1_biases.iter_mut().zip(&self.l1_delta) {
            *b += r * dj;
        }
        self.cached = false;
        Ok(())
    }
}

/// Linear model `y = x W + b`. For classification the outputs are class
/// scores and the softmax is taken over them directly (multinomial
/// logistic regression).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearState {
    spec: ModelSpec,
    /// `input_num x output_num`, row-major.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub output: Vec<f64>,
    cached: bool,
}

impl LinearState {
    pub fn zeros(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        if spec.family != Family::Linear {
            return Err(Error::Validation("LinearState needs a linear spec".into()));
        }
        Ok(Self {
            spec: *spec,
            weights: vec![0.0; spec.input_num * spec.output_num],
            biases: vec![0.0; spec.output_num],
            output: vec![0.0; spec.output_num],
            cached: false,
        })
    }

    fn is_classifier(&self) -> bool {
        self.spec.task == Task::Classification
    }
}

impl Network for LinearState {
    fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    fn decode(&mut self, theta: &[f64]) -> Result<()> {
        ensure_len("linear parameter vector", theta.len(), self.spec.n_params())?;
        let (w, b) = theta.split_at(self.weights.len());
        self.weights.copy_from_slice(w);
        self.biases.copy_from_slice(b);
        self.cached = false;
        Ok(())
    }

    fn encode(&self) -> Vec<f64> {
        let mut theta = self.weights.clone();
        theta.extend_from_slice(&self.biases);
        theta
    }

    fn forward(&mut self, x: &[f64]) -> Result<&[f64]> {
        ensure_len("linear input row", x.len(), self.spec.input_num)?;
        let o = self.spec.output_num;
        self.output.copy_from_slice(&self.biases);
        for (xi, w_row) in x.iter().zip(self.weights.chunks_exact(o)) {
            for (acc, w) in self.output.iter_mut().zip(w_row) {
                *acc += xi * w;
            }
        }
        self.cached = true;
        Ok(&self.output)
    }

    fn backward_step(&mut self, x: &[f64], y: &[f64], r: f64) -> Result<()> {
        if !self.cached {
            return Err(Error::State("backward pass requested before a forward pass".into()));
        }
        ensure_len("linear input row", x.len(), self.spec.input_num)?;
        ensure_len("linear target row", y.len(), self.spec.output_num)?;
        let o = self.spec.output_num;
        let mut delta = self.output.clone();
        if self.is_classifier() {
            softmax_into(&self.output, &mut delta)?;
        }
        delta.iter_mut().zip(y).for_each(|(d, &yk)| *d = yk - *d);
        for (xi, w_row) in x.iter().zip(self.weights.chunks_exact_mut(o)) {
            for (w, d) in w_row.iter_mut().zip(&delta) {
                *w += r * xi * d;
            }
        }
        for (b, d) in self.biases.iter_mut().zip(&delta) {
            *b += r * d;
        }
        self.cached = false;
        Ok(())
    }
}

/// Either model family behind one [`Network`] implementation.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Linear(LinearState),
    Mlp(MlpState),
}

impl Model {
    pub fn new(spec: &ModelSpec) -> Result<Self> {
        Ok(match spec.family {
            Family::Linear => Model::Linear(LinearState::zeros(spec)?),
            Family::Mlp => Model::Mlp(MlpState::zeros(spec)?),
        })
    }

    fn net(&mut self) -> &mut dyn Network {
        match self {
            Model::Linear(m) => m,
            Model::Mlp(m) => m,
        }
    }

    /// Output-layer activations for every row of `x` under parameters `theta`.
    pub fn outputs(&mut self, x: ArrayView2<f64>, theta: &[f64]) -> Result<Array2<f64>> {
        let spec = *self.spec();
        ensure_len("feature columns", x.ncols(), spec.input_num)?;
        self.decode(theta)?;
        let x = x.as_standard_layout();
        let mut out = Array2::zeros((x.nrows(), spec.output_num));
        for (row, mut dst) in x.rows().into_iter().zip(out.rows_mut()) {
            let y = self.forward(row.as_slice().expect("standard layout"))?;
            dst.as_slice_mut().expect("standard layout").copy_from_slice(y);
        }
        Ok(out)
    }

    /// `depth` epochs of per-instance forward and backward passes over the
    /// rows of `x` in stored order, starting from `theta`. Returns the
    /// updated parameter vector.
    pub fn langevin_gradient(
        &mut self,
        x: ArrayView2<f64>,
        y: ArrayView2<f64>,
        theta: &[f64],
        depth: usize,
    ) -> Result<Vec<f64>> {
        let spec = *self.spec();
        ensure_len("feature columns", x.ncols(), spec.input_num)?;
        ensure_len("target columns", y.ncols(), spec.output_num)?;
        ensure_len("target rows", y.nrows(), x.nrows())?;
        self.decode(theta)?;
        let x = x.as_standard_layout();
        let y = y.as_standard_layout();
        let r = spec.learning_rate;
        for _ in 0..depth {
            for (xr, yr) in x.rows().into_iter().zip(y.rows()) {
                let xs = xr.as_slice().expect("standard layout");
                self.forward(xs)?;
                self.backward_step(xs, yr.as_slice().expect("standard layout"), r)?;
            }
        }
        Ok(self.encode())
    }
}

impl Network for Model {
    fn spec(&self) -> &ModelSpec {
        match self {
            Model::Linear(m) => m.spec(),
            Model::Mlp(m) => m.spec(),
        }
    }

    fn decode(&mut self, theta: &[f64]) -> Result<()> {
        self.net().decode(theta)
    }

    fn encode(&self) -> Vec<f64> {
        match self {
            Model::Linear(m) => m.encode(),
            Model::Mlp(m) => m.encode(),
        }
    }

    fn forward(&mut self, x: &[f64]) -> Result<&[f64]> {
        match self {
            Model::Linear(m) => m.forward(x),
            Model::Mlp(m) => m.forward(x),
        }
    }

    fn backward_step(&mut self, x: &[f64], y: &[f64], r: f64) -> Result<()> {
        self.net().backward_step(x, y, r)
    }
}

/// Single-output linear prediction `x w + b` with `theta = [w, b]`.
pub fn linear_predict(x: ArrayView2<f64>, theta: &[f64]) -> Result<Vec<f64>> {
    if theta.is_empty() {
        return Err(Error::Shape("empty linear parameter vector".into()));
    }
    ensure_len("linear parameter vector", theta.len(), x.ncols() + 1)?;
    let (w, b) = theta.split_at(x.ncols());
    Ok(x.rows()
        .into_iter()
        .map(|row| row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b[0])
        .collect())
}

/// Output of the one-epoch gradient map used as the Langevin proposal mean.
pub fn langevin_gradient(
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    theta: &[f64],
    depth: usize,
    spec: &ModelSpec,
) -> Result<Vec<f64>> {
    Model::new(spec)?.langevin_gradient(x, y, theta, depth)
}

/// Softmax over each row of output activations, with the arg-max label
/// (lowest index on ties).
pub fn classify(outputs: ArrayView2<f64>) -> Result<(Vec<usize>, Array2<f64>)> {
    let mut probs = Array2::zeros(outputs.raw_dim());
    let mut labels = Vec::with_capacity(outputs.nrows());
    let mut scratch = vec![0.0; outputs.ncols()];
    for (row, mut dst) in outputs.rows().into_iter().zip(probs.rows_mut()) {
        let src: Vec<f64> = row.to_vec();
        softmax_into(&src, &mut scratch)?;
        dst.iter_mut().zip(&scratch).for_each(|(d, s)| *d = *s);
        labels.push(argmax(&scratch));
    }
    Ok((labels, probs))
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec_mlp(i: usize, h: usize, o: usize) -> ModelSpec {
        ModelSpec::mlp(i, h, o, Task::Regression, 0.1).unwrap()
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(spec_mlp(2, 2, 1).n_params(), 9);
        assert_eq!(spec_mlp(4, 5, 1).n_params(), 31);
        let lin = ModelSpec::linear(3, 1, Task::Regression, 0.1).unwrap();
        assert_eq!(lin.n_params(), 4);
        assert_eq!(lin.param_names(), vec!["w0", "w1", "w2", "b"]);
        let names = spec_mlp(2, 2, 1).param_names();
        assert_eq!(names.first().unwrap(), "w0");
        assert_eq!(names.last().unwrap(), "b2");
        assert!(ModelSpec::linear(3, 1, Task::Classification, 0.1).is_err());
        assert!(ModelSpec::mlp(3, 0, 1, Task::Regression, 0.1).is_err());
    }

    #[test]
    fn parameter_vector_invariants() {
        let s = spec_mlp(2, 2, 1);
        assert!(ParameterVector::new(&s, vec![0.0; 9], Some(0.5)).is_ok());
        assert!(ParameterVector::new(&s, vec![0.0; 9], None).is_err());
        assert!(ParameterVector::new(&s, vec![0.0; 8], Some(0.5)).is_err());
        assert!(ParameterVector::new(&s, vec![0.0; 9], Some(0.0)).is_err());
    }

    #[test]
    fn linear_predict_examples() {
        assert_eq!(linear_predict(array![[3.0]].view(), &[2.0, 1.0]).unwrap(), vec![7.0]);
        assert_eq!(
            linear_predict(array![[1.0, 2.0], [3.0, 4.0]].view(), &[0.0, 0.0, 0.0]).unwrap(),
            vec![0.0, 0.0]
        );
        assert_eq!(linear_predict(array![[2.0, 3.0]].view(), &[1.0, -1.0, 0.5]).unwrap(), vec![-0.5]);
        assert!(matches!(
            linear_predict(array![[2.0, 3.0]].view(), &[1.0, 0.5]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn linear_model_matches_linear_predict() {
        let spec = ModelSpec::linear(2, 1, Task::Regression, 0.1).unwrap();
        let x = array![[2.0, 3.0], [-1.0, 0.25]];
        let theta = [1.0, -1.0, 0.5];
        let out = Model::new(&spec).unwrap().outputs(x.view(), &theta).unwrap();
        let direct = linear_predict(x.view(), &theta).unwrap();
        assert_eq!(out.column(0).to_vec(), direct);
    }

    #[test]
    fn mlp_forward_examples() {
        let s = spec_mlp(3, 4, 2);
        let mut zero = MlpState::zeros(&s).unwrap();
        assert_eq!(zero.forward(&[0.3, -2.0, 7.0]).unwrap(), &[0.5, 0.5]);

        let s = spec_mlp(1, 1, 1);
        let mut ones = MlpState::from_theta(&s, &[1.0; 4]).unwrap();
        let out = ones.forward(&[1.0]).unwrap()[0];
        // hidden = sigmoid(2); output = sigmoid(hidden + 1)
        let hidden = 1.0 / (1.0 + (-2.0f64).exp());
        assert_abs_diff_eq!(ones.l1_output[0], 0.880_797_077_977_882_3, epsilon = 1e-15);
        assert_abs_diff_eq!(out, 1.0 / (1.0 + (-(hidden + 1.0)).exp()), epsilon = 1e-15);
        assert_abs_diff_eq!(out, 0.867_702_653_652_556_7, epsilon = 1e-12);
        assert!(matches!(ones.forward(&[1.0, 2.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn encode_layout() {
        let s = spec_mlp(2, 2, 1);
        let mut st = MlpState::zeros(&s).unwrap();
        st.l1_weights = vec![1.0, 2.0, 3.0, 4.0];
        st.l2_weights = vec![5.0, 6.0];
        st.l1_biases = vec![7.0, 8.0];
        st.l2_biases = vec![9.0];
        let theta = st.encode();
        assert_eq!(theta, (1..=9).map(f64::from).collect::<Vec<_>>());
        let back = MlpState::from_theta(&s, &theta).unwrap();
        assert_eq!(back.encode(), theta);
        assert!(matches!(MlpState::from_theta(&s, &theta[..8]), Err(Error::Shape(_))));
    }

    #[test]
    fn backward_requires_forward() {
        let s = spec_mlp(2, 3, 1);
        let mut st = MlpState::zeros(&s).unwrap();
        assert!(matches!(st.backward_step(&[0.0, 1.0], &[1.0], 0.1), Err(Error::State(_))));
        st.forward(&[0.0, 1.0]).unwrap();
        st.backward_step(&[0.0, 1.0], &[1.0], 0.1).unwrap();
        // the cache is consumed by the update
        assert!(st.backward_step(&[0.0, 1.0], &[1.0], 0.1).is_err());
    }

    #[test]
    fn backward_zero_step_and_zero_residual() {
        let s = spec_mlp(2, 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut st = MlpState::init_scaled(&s, &mut rng).unwrap();
        let before = st.encode();
        st.forward(&[0.4, -0.2]).unwrap();
        st.backward_step(&[0.4, -0.2], &[1.0, 0.0], 0.0).unwrap();
        assert_eq!(st.encode(), before);

        let y = st.forward(&[0.4, -0.2]).unwrap().to_vec();
        st.backward_step(&[0.4, -0.2], &y, 0.5).unwrap();
        assert_eq!(st.encode(), before);
    }

    #[test]
    fn langevin_gradient_identities() {
        let s = ModelSpec::mlp(2, 3, 1, Task::Regression, 0.05).unwrap();
        let x = array![[0.1, 0.9], [0.5, 0.2], [0.7, 0.7]];
        let y = array![[0.3], [0.8], [0.1]];
        let theta: Vec<f64> = (0..s.n_params()).map(|i| (i as f64 * 0.37).sin()).collect();
        assert_eq!(langevin_gradient(x.view(), y.view(), &theta, 0, &s).unwrap(), theta);

        let still = ModelSpec { learning_rate: 0.0, ..s };
        assert_eq!(langevin_gradient(x.view(), y.view(), &theta, 3, &still).unwrap(), theta);

        // one epoch over one row is one forward plus one backward pass
        let mut st = MlpState::from_theta(&s, &theta).unwrap();
        st.forward(&[0.1, 0.9]).unwrap();
        st.backward_step(&[0.1, 0.9], &[0.3], 0.05).unwrap();
        let one = langevin_gradient(x.slice(ndarray::s![0..1, ..]), y.slice(ndarray::s![0..1, ..]), &theta, 1, &s)
            .unwrap();
        assert_eq!(one, st.encode());

        assert!(matches!(
            langevin_gradient(x.view(), y.slice(ndarray::s![0..2, ..]), &theta, 1, &s),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn classify_examples() {
        let (labels, probs) = classify(array![[0.3, 0.3, 0.3], [0.2, 0.8, 0.5], [9.0, 0.0, 0.1]].view()).unwrap();
        assert_eq!(labels, vec![0, 1, 0]);
        for p in probs.row(0) {
            assert_abs_diff_eq!(*p, 1.0 / 3.0, epsilon = 1e-15);
        }
        for row in probs.rows() {
            assert_abs_diff_eq!(row.sum(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn linear_classifier_outputs_scores() {
        let spec = ModelSpec::linear(2, 3, Task::Classification, 0.1).unwrap();
        let theta = vec![1.0, -2.0, 0.5, 3.0, 0.0, -1.0, 0.1, 0.2, 0.3];
        let out = Model::new(&spec).unwrap().outputs(array![[1.0, 2.0]].view(), &theta).unwrap();
        let z = [1.0 + 6.0 + 0.1, -2.0 + 0.2, 0.5 - 2.0 + 0.3];
        for (o, zi) in out.row(0).iter().zip(z) {
            assert_abs_diff_eq!(*o, zi, epsilon = 1e-15);
        }
    }
}
