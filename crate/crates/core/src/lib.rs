//! Bayesian linear models and single-hidden-layer Bayesian neural networks
//! trained by Metropolis-Hastings MCMC with random-walk and Langevin-gradient
//! proposals.
//!
//! The crate is organised bottom-up:
//!
//! * [`prob`]: log-density kernels and transfer functions.
//! * [`model`]: the linear model and the multilayer perceptron, with forward
//!   and backward passes and the one-epoch gradient map used by Langevin
//!   proposals.
//! * [`inference`]: likelihoods, priors, proposals, the acceptance test and
//!   the single- and multi-chain sampling loops.
//! * [`diagnostics`]: rank-normalized split R-hat, thinning, posterior
//!   summaries, error metrics and posterior predictive draws.
//! * [`data`]: CSV ingestion, min-max normalization, time-series windowing,
//!   train/test partitioning and the bundled benchmark registry.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod inference;
pub mod model;
pub mod prob;

pub use error::{Error, Result};
