//! Simulation distributions with closed-form tail truths.
//!
//! Univariate testbeds carry exact quantile functions; bivariate ones carry
//! their density, tail indices, angular density `h` and angular basic density
//! `q*`, plus exact samplers.

pub mod bivariate;
pub mod regression;
pub mod univariate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use bivariate::{extremal_t_exponent, Bivariate};
pub use regression::QuadraticLocationStudy;
pub use univariate::{true_univariate_quantile, Univariate};

use crate::{Error, Result};

/// Any experiment distribution, addressed by its short name.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TestbedSpec {
    Univariate(Univariate),
    Bivariate(Bivariate),
}

impl TestbedSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Univariate(u) => u.name(),
            Self::Bivariate(b) => b.name(),
        }
    }

    pub fn is_bivariate(&self) -> bool {
        matches!(self, Self::Bivariate(_))
    }
}

impl FromStr for TestbedSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "frechet" => Self::Univariate(Univariate::frechet()),
            "half_t" => Self::Univariate(Univariate::half_t()),
            "inv_gamma" => Self::Univariate(Univariate::inv_gamma()),
            "cauchy2" => Self::Bivariate(Bivariate::Cauchy),
            "trunc_t2" => Self::Bivariate(Bivariate::truncated_t()),
            "asymmetric" => Self::Bivariate(Bivariate::Asymmetric),
            "clover" => Self::Bivariate(Bivariate::Clover),
            other => {
                return Err(Error::invalid(format!(
                    "unknown testbed '{other}' (expected one of frechet, half_t, inv_gamma, \
                     cauchy2, trunc_t2, asymmetric, clover)"
                )))
            }
        })
    }
}

impl fmt::Display for TestbedSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Solve `f(t) = target` for a decreasing `f` by bisection on `[lo, hi]`.
pub(crate) fn solve_decreasing<F: FnMut(f64) -> f64>(
    mut f: F,
    target: f64,
    mut lo: f64,
    mut hi: f64,
) -> Result<f64> {
    if !(f(lo) >= target && f(hi) <= target) {
        return Err(Error::invalid(format!(
            "target {target} not bracketed on [{lo}, {hi}]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
