//! Censored log-likelihoods.
//!
//! Observations below the threshold contribute the probability of being
//! censored, exceedances their (partial) density. In the bivariate case the
//! standardised margins `z_i` enter the max-stable form
//! `G̃(z) = exp(-L(z))`, `L(z) = (z₁ + z₂) A(z₂/(z₁ + z₂))`.

use crate::dependence::Dependence;
use crate::margins::{
    gev_tail_logdensity, log_gev_cdf_power, select_threshold, CensoredSample, GevParams,
    MarginalModel,
};
use crate::{Error, Result};

/// Floor applied to standardised values before forming `v = z₂/(z₁+z₂)`.
const Z_FLOOR: f64 = 1e-300;

/// Censored log-likelihood of a single margin. `-∞` when an exceedance (or
/// the threshold itself) leaves the support.
pub fn univariate_censored_loglik(sample: &CensoredSample, model: &MarginalModel) -> f64 {
    let kn = sample.k_over_n();
    let t = sample.threshold;
    match &sample.covariates {
        None => {
            let theta = model.at(0.0);
            let censored = (sample.n - exceedance_count(sample)) as f64;
            let mut ll = censored * log_gev_cdf_power(t, &theta, kn);
            if ll == f64::NEG_INFINITY {
                return ll;
            }
            for (_, y) in sample.exceedances() {
                ll += gev_tail_logdensity(y, &theta, kn);
            }
            ll
        }
        Some(z) => {
            let mut ll = 0.0;
            for (&y, &zi) in sample.values.iter().zip(z) {
                let theta = model.at(zi);
                ll += if y > t {
                    gev_tail_logdensity(y, &theta, kn)
                } else {
                    log_gev_cdf_power(t, &theta, kn)
                };
            }
            ll
        }
    }
}

fn exceedance_count(sample: &CensoredSample) -> usize {
    sample.values.iter().filter(|&&y| y > sample.threshold).count()
}

/// Bivariate observations with per-margin thresholds. An optional covariate
/// (shared by both margins) drives the location regressions.
#[derive(Debug, Clone, PartialEq)]
pub struct BivariateSample {
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub covariates: Option<Vec<f64>>,
    pub thresholds: [f64; 2],
    pub k: [usize; 2],
    pub n: usize,
    both_censored: usize,
    active: Vec<usize>,
}

impl BivariateSample {
    /// Censor each margin at its empirical quantile of order `level`.
    pub fn from_level(
        y1: Vec<f64>,
        y2: Vec<f64>,
        covariates: Option<Vec<f64>>,
        level: f64,
    ) -> Result<Self> {
        let (t1, k1) = select_threshold(&y1, level)?;
        let (t2, k2) = select_threshold(&y2, level)?;
        Self::with_thresholds(y1, y2, covariates, [t1, t2], [k1, k2])
    }

    pub fn with_thresholds(
        y1: Vec<f64>,
        y2: Vec<f64>,
        covariates: Option<Vec<f64>>,
        thresholds: [f64; 2],
        k: [usize; 2],
    ) -> Result<Self> {
        let n = y1.len();
        if y2.len() != n {
            return Err(Error::invalid(format!(
                "margins have different lengths ({n} and {})",
                y2.len()
            )));
        }
        if let Some(c) = &covariates {
            if c.len() != n {
                return Err(Error::invalid(format!(
                    "{} covariate values for {n} observations",
                    c.len()
                )));
            }
        }
        for (i, &ki) in k.iter().enumerate() {
            if ki == 0 || ki >= n {
                return Err(Error::invalid(format!(
                    "margin {}: exceedance count must satisfy 0 < k < n, got k={ki}, n={n}",
                    i + 1
                )));
            }
        }
        let active: Vec<usize> = (0..n)
            .filter(|&i| y1[i] > thresholds[0] || y2[i] > thresholds[1])
            .collect();
        Ok(Self {
            both_censored: n - active.len(),
            y1,
            y2,
            covariates,
            thresholds,
            k,
            n,
            active,
        })
    }

    pub fn k_over_n(&self) -> [f64; 2] {
        [self.k[0] as f64 / self.n as f64, self.k[1] as f64 / self.n as f64]
    }

    pub fn covariate(&self, i: usize) -> f64 {
        self.covariates.as_ref().map_or(0.0, |c| c[i])
    }

    /// Margin `index` (0 or 1) as a univariate censored sample.
    pub fn margin(&self, index: usize) -> CensoredSample {
        let values = if index == 0 { &self.y1 } else { &self.y2 };
        CensoredSample {
            values: values.clone(),
            covariates: self.covariates.clone(),
            threshold: self.thresholds[index],
            k: self.k[index],
            n: self.n,
        }
    }

    /// Indices of observations with at least one exceedance.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn both_censored(&self) -> usize {
        self.both_censored
    }
}

/// Full parameter vector of the bivariate model.
#[derive(Debug, Clone, PartialEq)]
pub struct DependenceParams {
    pub margins: [MarginalModel; 2],
    pub dependence: Dependence,
}

/// Standardised value and `log|dz/dy|` of one coordinate. The Jacobian term is
/// only meaningful for exceedances. Returns `None` outside the support.
#[inline]
fn standardise(y: f64, theta: &GevParams, kn: f64) -> Option<(f64, f64)> {
    let b = theta.bracket(y);
    if !(b > 0.0) || !b.is_finite() {
        return None;
    }
    let lb = b.ln();
    let log_z = kn.ln() - lb / theta.gamma;
    let z = log_z.exp().max(Z_FLOOR);
    Some((z, log_z - theta.sigma.ln() - lb))
}

/// Log-likelihood contribution of a single observation `y` with
/// per-margin parameters `theta`, thresholds `t` and ratios `k/n`.
pub fn bivariate_contribution(
    y: [f64; 2],
    t: [f64; 2],
    theta: [GevParams; 2],
    k_over_n: [f64; 2],
    dependence: &Dependence,
) -> f64 {
    let exceeds = [y[0] > t[0], y[1] > t[1]];
    let mut z = [0.0; 2];
    let mut log_jac = 0.0;
    for i in 0..2 {
        let at = if exceeds[i] { y[i] } else { t[i] };
        match standardise(at, &theta[i], k_over_n[i]) {
            Some((zi, lj)) => {
                z[i] = zi;
                if exceeds[i] {
                    log_jac += lj;
                }
            }
            None => return f64::NEG_INFINITY,
        }
    }
    let s = z[0] + z[1];
    let v = z[1] / s;
    let (a, a1, a2) = dependence.pickands(v);
    let minus_l = -s * a;
    match exceeds {
        [false, false] => minus_l,
        [true, false] => log_jac + minus_l + log_positive(a - v * a1),
        [false, true] => log_jac + minus_l + log_positive(a + (1.0 - v) * a1),
        [true, true] => {
            let l1 = a - v * a1;
            let l2 = a + (1.0 - v) * a1;
            let l12 = -v * (1.0 - v) * a2 / s;
            log_jac + minus_l + log_positive(l1 * l2 - l12)
        }
    }
}

#[inline]
fn log_positive(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Bivariate censored log-likelihood. Observations censored in both margins
/// share one contribution when there is no covariate.
pub fn bivariate_censored_loglik(sample: &BivariateSample, params: &DependenceParams) -> f64 {
    let kn = sample.k_over_n();
    let t = sample.thresholds;
    let dep = &params.dependence;
    let [m1, m2] = &params.margins;
    match &sample.covariates {
        None => {
            let theta = [m1.at(0.0), m2.at(0.0)];
            let mut ll = 0.0;
            if sample.both_censored > 0 {
                ll += sample.both_censored as f64 * bivariate_contribution(t, t, theta, kn, dep);
                if ll == f64::NEG_INFINITY {
                    return ll;
                }
            }
            for &i in &sample.active {
                ll += bivariate_contribution([sample.y1[i], sample.y2[i]], t, theta, kn, dep);
            }
            ll
        }
        Some(zs) => {
            let mut ll = 0.0;
            for (i, &zi) in zs.iter().enumerate() {
                let theta = [m1.at(zi), m2.at(zi)];
                ll += bivariate_contribution([sample.y1[i], sample.y2[i]], t, theta, kn, dep);
                if ll == f64::NEG_INFINITY {
                    return ll;
                }
            }
            ll
        }
    }
}
