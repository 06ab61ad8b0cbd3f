//! Log-density kernels and transfer functions.
//!
//! Everything here works in log space. Normalizing constants that cancel in
//! Metropolis-Hastings ratios are kept where they are cheap and dropped only
//! where noted (the inverse-gamma prior).

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Inputs to [`sigmoid`] are clamped to this magnitude before exponentiation.
pub const SIGMOID_CLAMP: f64 = 500.0;

/// Location and variance of a univariate normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianParams {
    mu: f64,
    sigma2: f64,
}

impl GaussianParams {
    pub fn new(mu: f64, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gaussian variance must be positive and finite, got {sigma2}"
            )));
        }
        if !mu.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gaussian mean must be finite, got {mu}"
            )));
        }
        Ok(Self { mu, sigma2 })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
}

/// Shape and scale of the inverse-gamma prior on the noise variance.
///
/// Zero is allowed for both, which gives the improper `1/tau2` prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvGammaParams {
    nu1: f64,
    nu2: f64,
}

impl InvGammaParams {
    pub fn new(nu1: f64, nu2: f64) -> Result<Self> {
        if !(nu1 >= 0.0 && nu2 >= 0.0) || !nu1.is_finite() || !nu2.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "inverse-gamma hyperparameters must be finite and non-negative, got ({nu1}, {nu2})"
            )));
        }
        Ok(Self { nu1, nu2 })
    }

    pub fn nu1(&self) -> f64 {
        self.nu1
    }

    pub fn nu2(&self) -> f64 {
        self.nu2
    }
}

pub fn gaussian_logpdf(x: f64, p: &GaussianParams) -> f64 {
    let d = x - p.mu;
    -0.5 * (2.0 * PI * p.sigma2).ln() - d * d / (2.0 * p.sigma2)
}

/// Log probability of exactly `k` successes in `n` Bernoulli(`p`) trials.
pub fn binomial_logpmf(k: u64, n: u64, p: f64) -> Result<f64> {
    if k > n {
        return Err(Error::InvalidParameter(format!(
            "binomial: k = {k} exceeds n = {n}"
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "binomial: probability {p} outside [0, 1]"
        )));
    }
    let (kf, nf) = (k as f64, n as f64);
    let log_choose = if k == 0 || k == n {
        0.0
    } else {
        ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0)
    };
    // 0 * ln 0 is taken as 0 so that certain outcomes get probability one.
    let success = if k == 0 { 0.0 } else { kf * p.ln() };
    let failure = if k == n { 0.0 } else { (nf - kf) * (-p).ln_1p() };
    Ok(log_choose + success + failure)
}

/// Inverse-gamma log density with the `nu2^nu1 / Gamma(nu1)` factor dropped.
pub fn invgamma_unnorm_logpdf(tau2: f64, p: &InvGammaParams) -> Result<f64> {
    if !(tau2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "inverse-gamma: tau2 must be positive, got {tau2}"
        )));
    }
    Ok(-(1.0 + p.nu1) * tau2.ln() - p.nu2 / tau2)
}

/// `-0.5 * sum(delta^2) / sigma2`: the part of an isotropic normal log
/// density that survives in a proposal-density ratio.
pub fn isotropic_gaussian_logratio_core(delta: &[f64], sigma2: f64) -> f64 {
    -0.5 * delta.iter().map(|d| d * d).sum::<f64>() / sigma2
}

pub fn sigmoid(x: f64) -> f64 {
    let x = x.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP);
    1.0 / (1.0 + (-x).exp())
}

/// Softmax computed after subtracting the maximum entry.
pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; v.len()];
    softmax_into(v, &mut out)?;
    Ok(out)
}

pub(crate) fn softmax_into(v: &[f64], out: &mut [f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidParameter("softmax of an empty vector".into()));
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &x) in out.iter_mut().zip(v) {
        *o = (x - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn std_normal() -> GaussianParams {
        GaussianParams::new(0.0, 1.0).unwrap()
    }

    #[test]
    fn gaussian_logpdf_closed_form() {
        // -0.5 * ln(2 pi)
        assert_abs_diff_eq!(gaussian_logpdf(0.0, &std_normal()), -0.918_938_533_204_672_7, epsilon = 1e-12);
        let p = GaussianParams::new(1.5, 0.3).unwrap();
        assert_abs_diff_eq!(gaussian_logpdf(1.5, &p), -0.5 * (2.0 * PI * 0.3).ln(), epsilon = 1e-15);
        assert!(gaussian_logpdf(1.5, &p) > gaussian_logpdf(1.5001, &p));
    }

    #[test]
    fn gaussian_rejects_bad_variance() {
        assert!(matches!(GaussianParams::new(0.0, 0.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(GaussianParams::new(0.0, -2.0), Err(Error::InvalidParameter(_))));
        assert!(GaussianParams::new(0.0, f64::NAN).is_err());
    }

    #[test]
    fn gaussian_integrates_to_one() {
        // composite Simpson over mu +/- 10 sigma
        for &(mu, s2) in &[(0.0, 1.0), (3.0, 0.25), (-2.0, 7.0)] {
            let p = GaussianParams::new(mu, s2).unwrap();
            let sd = f64::sqrt(s2);
            let (a, b) = (mu - 10.0 * sd, mu + 10.0 * sd);
            let n = 20_000;
            let h = (b - a) / n as f64;
            let f = |x: f64| gaussian_logpdf(x, &p).exp();
            let mut s = f(a) + f(b);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * f(a + i as f64 * h);
            }
            assert_abs_diff_eq!(s * h / 3.0, 1.0, epsilon = 1e-6);
        }
    }

    /// ln C(n, k) p^k (1-p)^(n-k) by the multiplicative formula, independent
    /// of the log-gamma route.
    fn binomial_oracle(k: u64, n: u64, p: f64) -> f64 {
        let mut log_c = 0.0;
        for i in 0..k {
            log_c += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
        }
        log_c + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial_logpmf(0, 5, 0.0).unwrap(), 0.0);
        assert_eq!(binomial_logpmf(1, 1, 1.0).unwrap(), 0.0);
        let v = binomial_logpmf(50, 100, 0.5).unwrap();
        assert_abs_diff_eq!(v, binomial_oracle(50, 100, 0.5), epsilon = 1e-10);
        assert_abs_diff_eq!(v, -2.530_876_403_977, epsilon = 1e-9);
        assert_eq!(binomial_logpmf(3, 5, 0.0).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn binomial_rejects_bad_inputs() {
        assert!(matches!(binomial_logpmf(6, 5, 0.5), Err(Error::InvalidParameter(_))));
        assert!(matches!(binomial_logpmf(1, 5, 1.5), Err(Error::InvalidParameter(_))));
        assert!(binomial_logpmf(1, 5, -0.1).is_err());
    }

    #[test]
    fn binomial_sums_to_one() {
        for n in 0..=30u64 {
            for &p in &[0.0, 0.03, 0.5, 0.77, 1.0] {
                let total: f64 = (0..=n).map(|k| binomial_logpmf(k, n, p).unwrap().exp()).sum();
                assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn invgamma_values() {
        let flat = InvGammaParams::new(0.0, 0.0).unwrap();
        assert_eq!(invgamma_unnorm_logpdf(1.0, &flat).unwrap(), 0.0);
        assert_abs_diff_eq!(invgamma_unnorm_logpdf(std::f64::consts::E, &flat).unwrap(), -1.0, epsilon = 1e-15);
        let p = InvGammaParams::new(1.0, 3.0).unwrap();
        assert_abs_diff_eq!(invgamma_unnorm_logpdf(2.0, &p).unwrap(), -2.886_294_361_119_891, epsilon = 1e-12);
        assert!(invgamma_unnorm_logpdf(0.0, &p).is_err());
        assert!(InvGammaParams::new(-1.0, 0.0).is_err());
    }

    #[test]
    fn logratio_core_values() {
        assert_eq!(isotropic_gaussian_logratio_core(&[0.0, 0.0, 0.0], 0.3), 0.0);
        assert_eq!(isotropic_gaussian_logratio_core(&[1.0, 1.0], 1.0), -1.0);
        assert_abs_diff_eq!(isotropic_gaussian_logratio_core(&[0.3, -0.4], 0.025), -5.0, epsilon = 1e-12);
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_abs_diff_eq!(sigmoid(2.0), 0.880_797_077_977_882_3, epsilon = 1e-15);
        assert!(sigmoid(1e6).is_finite() && sigmoid(-1e6) >= 0.0);
        assert_eq!(sigmoid(1e6), sigmoid(SIGMOID_CLAMP));
    }

    #[test]
    fn softmax_values() {
        let p = softmax(&[0.0, 0.0, 0.0]).unwrap();
        for x in p {
            assert_abs_diff_eq!(x, 1.0 / 3.0, epsilon = 1e-15);
        }
        let p = softmax(&[1f64.ln(), 2f64.ln(), 3f64.ln()]).unwrap();
        for (x, want) in p.iter().zip([1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]) {
            assert_abs_diff_eq!(*x, want, epsilon = 1e-15);
        }
        assert!(matches!(softmax(&[]), Err(Error::InvalidParameter(_))));
        // no overflow for large logits
        let p = softmax(&[1000.0, 0.0]).unwrap();
        assert_abs_diff_eq!(p[0], 1.0, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn gaussian_is_symmetric(mu in -50.0f64..50.0, s2 in 1e-3f64..100.0, d in 0.0f64..20.0) {
            let p = GaussianParams::new(mu, s2).unwrap();
            let (a, b) = (gaussian_logpdf(mu + d, &p), gaussian_logpdf(mu - d, &p));
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }

        #[test]
        fn sigmoid_symmetric_and_monotone(x in -800.0f64..800.0, dx in 0.0f64..50.0) {
            prop_assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
            prop_assert!(sigmoid(x) <= sigmoid(x + dx));
        }

        #[test]
        fn softmax_is_a_distribution(v in prop::collection::vec(-50.0f64..50.0, 1..12), c in -100.0f64..100.0) {
            let p = softmax(&v).unwrap();
            let total: f64 = p.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            // the largest entry may round to exactly 1 when the others are tiny
            prop_assert!(p.iter().all(|&x| x > 0.0 && x <= 1.0));
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let q = softmax(&shifted).unwrap();
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
