//! GEV/GP marginal primitives.
//!
//! Above a high threshold `t` the distribution of a margin is approximated by
//!
//! ```text
//! F(y) ≈ exp(-(k/n) (1 + γ (y - μ)/σ)_+^{-1/γ})
//! ```
//!
//! where `k` is the number of threshold exceedances out of `n` observations.
//! Every function here is a pure function of its arguments.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Location, scale and tail index of a heavy-tailed margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevParams {
    pub mu: f64,
    pub sigma: f64,
    pub gamma: f64,
}

impl GevParams {
    /// Validated constructor. Only heavy tails (`gamma > 0`) are supported.
    pub fn new(mu: f64, sigma: f64, gamma: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::invalid(format!("location must be finite, got {mu}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("scale must be positive, got {sigma}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid(format!(
                "tail index must be positive, got {gamma}"
            )));
        }
        Ok(Self { mu, sigma, gamma })
    }

    /// `1 + γ (y - μ)/σ`; positive inside the support.
    #[inline]
    pub fn bracket(&self, y: f64) -> f64 {
        1.0 + self.gamma * (y - self.mu) / self.sigma
    }
}

/// Margin whose location is a quadratic function of a covariate `z`:
/// `μ(z) = β₀ + β₁ z + β₂ z²`. Scale and tail index are shared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalModel {
    pub beta: [f64; 3],
    pub sigma: f64,
    pub gamma: f64,
}

impl MarginalModel {
    pub fn constant(theta: GevParams) -> Self {
        Self {
            beta: [theta.mu, 0.0, 0.0],
            sigma: theta.sigma,
            gamma: theta.gamma,
        }
    }

    pub fn location_at(&self, z: f64) -> f64 {
        location_at(self, z)
    }

    /// GEV parameters at covariate value `z`.
    #[inline]
    pub fn at(&self, z: f64) -> GevParams {
        GevParams {
            mu: self.location_at(z),
            sigma: self.sigma,
            gamma: self.gamma,
        }
    }

    /// Parameters with the covariate terms dropped.
    pub fn intercept_only(&self) -> GevParams {
        GevParams {
            mu: self.beta[0],
            sigma: self.sigma,
            gamma: self.gamma,
        }
    }
}

/// Quadratic covariate-driven location.
#[inline]
pub fn location_at(model: &MarginalModel, z: f64) -> f64 {
    let [b0, b1, b2] = model.beta;
    b0 + z * (b1 + z * b2)
}

/// Observations of one margin together with their censoring threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct CensoredSample {
    pub values: Vec<f64>,
    pub covariates: Option<Vec<f64>>,
    pub threshold: f64,
    pub k: usize,
    pub n: usize,
}

impl CensoredSample {
    /// Censor `values` at their empirical quantile of order `level`.
    pub fn from_level(values: Vec<f64>, covariates: Option<Vec<f64>>, level: f64) -> Result<Self> {
        let (threshold, k) = select_threshold(&values, level)?;
        Self::with_threshold(values, covariates, threshold, k)
    }

    pub fn with_threshold(
        values: Vec<f64>,
        covariates: Option<Vec<f64>>,
        threshold: f64,
        k: usize,
    ) -> Result<Self> {
        let n = values.len();
        if let Some(c) = &covariates {
            if c.len() != n {
                return Err(Error::invalid(format!(
                    "{} covariate values for {n} observations",
                    c.len()
                )));
            }
        }
        if k == 0 || k >= n {
            return Err(Error::invalid(format!(
                "exceedance count must satisfy 0 < k < n, got k={k}, n={n}"
            )));
        }
        Ok(Self {
            values,
            covariates,
            threshold,
            k,
            n,
        })
    }

    pub fn k_over_n(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    pub fn covariate(&self, i: usize) -> f64 {
        self.covariates.as_ref().map_or(0.0, |c| c[i])
    }

    pub fn exceedances(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let t = self.threshold;
        self.values
            .iter()
            .copied()
            .enumerate()
            .filter(move |&(_, y)| y > t)
    }
}

/// Empirical quantile `t = X_{n-k,n}` of `values` at `level`, together with
/// the number `k` of observations strictly above it.
///
/// With tied data `k` counts strict exceedances of the selected order
/// statistic, so it can be smaller than `n (1 - level)`.
pub fn select_threshold(values: &[f64], level: f64) -> Result<(f64, usize)> {
    if values.is_empty() {
        return Err(Error::Empty("threshold selection needs observations"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("level must lie in (0, 1), got {level}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("observations must be finite"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    // Left-continuous inverse of the empirical CDF: X_{⌈n·level⌉, n}.
    let rank = ((n as f64 * level) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    let t = sorted[rank - 1];
    let k = sorted.iter().filter(|&&v| v > t).count();
    Ok((t, k))
}

/// `G^{k/n}` evaluated at `y`: `exp(-(k/n) (1 + γ(y-μ)/σ)_+^{-1/γ})`.
///
/// Below the lower support edge the positive part vanishes and the result is 0.
#[inline]
pub fn gev_cdf_power(y: f64, theta: &GevParams, k_over_n: f64) -> f64 {
    log_gev_cdf_power(y, theta, k_over_n).exp()
}

/// Natural logarithm of [`gev_cdf_power`]; `-∞` below the support.
#[inline]
pub fn log_gev_cdf_power(y: f64, theta: &GevParams, k_over_n: f64) -> f64 {
    let b = theta.bracket(y);
    if b <= 0.0 {
        return f64::NEG_INFINITY;
    }
    -k_over_n * (-b.ln() / theta.gamma).exp()
}

/// Log-density of the censored-tail approximation,
/// `log ∂/∂y G^{k/n}(y)`; `-∞` outside the support.
#[inline]
pub fn gev_tail_logdensity(y: f64, theta: &GevParams, k_over_n: f64) -> f64 {
    let b = theta.bracket(y);
    if b <= 0.0 || !b.is_finite() {
        return f64::NEG_INFINITY;
    }
    let lb = b.ln();
    let inv_gamma = 1.0 / theta.gamma;
    -k_over_n * (-lb * inv_gamma).exp() - (inv_gamma + 1.0) * lb - theta.sigma.ln() + k_over_n.ln()
}

/// Standardising transform `z = (k/n) (1 + γ(y-μ)/σ)^{-1/γ}`.
pub fn marginal_transform(y: f64, theta: &GevParams, k_over_n: f64) -> Result<f64> {
    let z = marginal_transform_unchecked(y, theta, k_over_n);
    if z.is_nan() {
        Err(Error::OutOfSupport(format!(
            "y = {y} lies below the support of (μ={}, σ={}, γ={})",
            theta.mu, theta.sigma, theta.gamma
        )))
    } else {
        Ok(z)
    }
}

/// [`marginal_transform`] returning NaN outside the support.
#[inline]
pub fn marginal_transform_unchecked(y: f64, theta: &GevParams, k_over_n: f64) -> f64 {
    let b = theta.bracket(y);
    if b <= 0.0 {
        return f64::NAN;
    }
    k_over_n * (-b.ln() / theta.gamma).exp()
}

/// Extreme quantile `Q(p) ≈ μ + σ ((k/(np))^γ - 1)/γ`.
pub fn extreme_quantile(p: f64, theta: &GevParams, k: usize, n: usize) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("probability must lie in (0, 1), got {p}")));
    }
    if n == 0 || k == 0 {
        return Err(Error::invalid("k and n must be positive"));
    }
    Ok(extreme_quantile_unchecked(p, theta, k as f64 / n as f64))
}

#[inline]
pub(crate) fn extreme_quantile_unchecked(p: f64, theta: &GevParams, k_over_n: f64) -> f64 {
    let log_ratio = (k_over_n / p).ln();
    theta.mu + theta.sigma * (theta.gamma * log_ratio).exp_m1() / theta.gamma
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn theta(mu: f64, sigma: f64, gamma: f64) -> GevParams {
        GevParams::new(mu, sigma, gamma).unwrap()
    }

    // Independent scalar oracle, written from the closed form without the
    // log-space rearrangement used above.
    fn cdf_oracle(y: f64, mu: f64, sigma: f64, gamma: f64, kn: f64) -> f64 {
        let b = 1.0 + gamma * (y - mu) / sigma;
        if b <= 0.0 {
            0.0
        } else {
            (-kn * b.powf(-1.0 / gamma)).exp()
        }
    }

    #[test]
    fn threshold_on_integers() {
        let values: Vec<f64> = (1..=100).rev().map(f64::from).collect();
        assert_eq!(select_threshold(&values, 0.90).unwrap(), (90.0, 10));
        let values: Vec<f64> = (0..1500).map(|i| (i as f64 * 0.37).sin()).collect();
        assert_eq!(select_threshold(&values, 0.90).unwrap().1, 150);
    }

    #[test]
    fn threshold_errors_and_ties() {
        assert!(matches!(select_threshold(&[], 0.9), Err(Error::Empty(_))));
        assert!(select_threshold(&[1.0, 2.0], 1.0).is_err());
        assert!(select_threshold(&[1.0, 2.0], 0.0).is_err());
        // Ties at the order statistic reduce k to the strict exceedances.
        let (t, k) = select_threshold(&[1.0, 2.0, 2.0, 2.0, 3.0], 0.5).unwrap();
        assert_eq!((t, k), (2.0, 1));
    }

    #[test]
    fn cdf_power_examples() {
        let th = theta(2.0, 3.0, 0.7);
        assert!((gev_cdf_power(2.0, &th, 0.1) - (-0.1f64).exp()).abs() < 1e-15);
        assert!((gev_cdf_power(1e300, &th, 0.1) - 1.0).abs() < 1e-15);
        let th = theta(0.0, 1.0, 1.0);
        let v = gev_cdf_power(9.0, &th, 0.1);
        assert!((v - cdf_oracle(9.0, 0.0, 1.0, 1.0, 0.1)).abs() < 1e-15);
        assert!((v - 0.990_049_833_749_168).abs() < 1e-12);
        assert_eq!(gev_cdf_power(-5.0, &th, 0.1), 0.0);
    }

    #[test]
    fn tail_logdensity_examples() {
        let th = theta(0.0, 1.0, 1.0);
        let ld = gev_tail_logdensity(9.0, &th, 0.1);
        assert!((ld - (-0.01 + 1e-3f64.ln())).abs() < 1e-12);
        assert_eq!(gev_tail_logdensity(-2.0, &th, 0.1), f64::NEG_INFINITY);

        // Central finite difference of the CDF at y = μ + σ.
        let th = theta(1.5, 2.0, 0.4);
        let y = th.mu + th.sigma;
        let h = 1e-5;
        let fd = (cdf_oracle(y + h, 1.5, 2.0, 0.4, 0.1) - cdf_oracle(y - h, 1.5, 2.0, 0.4, 0.1))
            / (2.0 * h);
        let dens = gev_tail_logdensity(y, &th, 0.1).exp();
        assert!((dens / fd - 1.0).abs() < 1e-6, "{dens} vs {fd}");
    }

    #[test]
    fn transform_examples() {
        let th = theta(0.0, 1.0, 1.0);
        assert_eq!(marginal_transform(0.0, &th, 0.1).unwrap(), 0.1);
        assert!((marginal_transform(9.0, &th, 0.1).unwrap() - 0.01).abs() < 1e-16);
        assert!(matches!(
            marginal_transform(-1.5, &th, 0.1),
            Err(Error::OutOfSupport(_))
        ));
    }

    #[test]
    fn quantile_examples() {
        let th = theta(4.0, 2.0, 0.5);
        assert_eq!(extreme_quantile(0.1, &th, 10, 100).unwrap(), 4.0);
        assert!(extreme_quantile(0.0, &th, 10, 100).is_err());
        assert!(extreme_quantile(1.0, &th, 10, 100).is_err());
        let q1 = extreme_quantile(1e-3, &th, 10, 100).unwrap();
        let q2 = extreme_quantile(1e-4, &th, 10, 100).unwrap();
        assert!(q2 > q1);
    }

    #[test]
    fn location_examples() {
        let m = |b: [f64; 3]| MarginalModel {
            beta: b,
            sigma: 1.0,
            gamma: 0.5,
        };
        assert_eq!(location_at(&m([5.0, 0.0, 0.0]), 100.0), 5.0);
        assert_eq!(location_at(&m([1.0, 2.0, 3.0]), 2.0), 17.0);
        assert!((location_at(&m([1.0, -1.0, 0.5]), -6.3) - 27.145).abs() < 1e-12);
    }

    #[test]
    fn constructor_rejects_bad_parameters() {
        assert!(GevParams::new(0.0, 0.0, 1.0).is_err());
        assert!(GevParams::new(0.0, 1.0, 0.0).is_err());
        assert!(GevParams::new(0.0, 1.0, -0.2).is_err());
        assert!(GevParams::new(f64::NAN, 1.0, 0.2).is_err());
    }

    proptest! {
        #[test]
        fn transform_inverts_quantile(
            mu in -50.0..50.0f64,
            sigma in 0.01..100.0f64,
            gamma in 0.05..4.0f64,
            kn in 0.01..0.3f64,
            frac in 0.0001..0.999f64,
        ) {
            let th = theta(mu, sigma, gamma);
            let p = kn * frac;
            let q = extreme_quantile_unchecked(p, &th, kn);
            let z = marginal_transform(q, &th, kn).unwrap();
            prop_assert!((z / p - 1.0).abs() < 1e-10, "z={z} p={p}");
        }

        #[test]
        fn cdf_power_is_monotone(
            mu in -5.0..5.0f64,
            sigma in 0.1..10.0f64,
            gamma in 0.05..3.0f64,
        ) {
            let th = theta(mu, sigma, gamma);
            let lo = mu - sigma / gamma;
            let mut prev = 0.0;
            for i in 0..1000 {
                let y = lo + (i as f64 / 999.0) * 50.0 * sigma;
                let v = gev_cdf_power(y, &th, 0.1);
                prop_assert!(v >= prev);
                prev = v;
            }
        }

        #[test]
        fn density_matches_finite_difference(
            mu in -5.0..5.0f64,
            sigma in 0.1..10.0f64,
            gamma in 0.05..3.0f64,
            u in 0.0..20.0f64,
        ) {
            let th = theta(mu, sigma, gamma);
            let y = mu + u * sigma;
            let h = 1e-4 * sigma;
            let fd = (cdf_oracle(y + h, mu, sigma, gamma, 0.1)
                - cdf_oracle(y - h, mu, sigma, gamma, 0.1)) / (2.0 * h);
            let dens = gev_tail_logdensity(y, &th, 0.1).exp();
            prop_assert!((dens / fd - 1.0).abs() < 1e-5, "{dens} vs {fd}");
        }

        #[test]
        fn threshold_counts_exceedances(k in 1usize..200, extra in 1usize..800, seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            let n = k + extra;
            let mut values: Vec<f64> = (0..n).map(|i| i as f64 * 1.5 - 7.0).collect();
            values.shuffle(&mut crate::rng_from_seed(seed));
            let level = 1.0 - k as f64 / n as f64;
            let (_, got) = select_threshold(&values, level).unwrap();
            prop_assert_eq!(got, k);
        }
    }
}
