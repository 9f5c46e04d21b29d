//! Univariate heavy-tailed testbeds.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::gamma_lr;

use super::solve_decreasing;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Univariate {
    /// `F(y) = exp(-((y - ψ)/ς)^{-ξ})`, tail index `1/ξ`.
    Frechet { psi: f64, varsigma: f64, xi: f64 },
    /// `|T|` for `T` Student-t with scale and `nu` degrees of freedom; tail
    /// index `1/ν`.
    HalfT { scale: f64, nu: f64 },
    /// `λ / G` with `G ~ Gamma(shape, 1)`; tail index `1/shape`.
    InvGamma { shape: f64, scale: f64 },
}

impl Univariate {
    pub fn frechet() -> Self {
        Self::Frechet {
            psi: 3.0,
            varsigma: 1.0,
            xi: 1.0 / 3.0,
        }
    }

    pub fn half_t() -> Self {
        Self::HalfT {
            scale: 1.0,
            nu: 1.0 / 3.0,
        }
    }

    pub fn inv_gamma() -> Self {
        Self::InvGamma {
            shape: 0.5,
            scale: 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Frechet { .. } => "frechet",
            Self::HalfT { .. } => "half_t",
            Self::InvGamma { .. } => "inv_gamma",
        }
    }

    pub fn tail_index(&self) -> f64 {
        match *self {
            Self::Frechet { xi, .. } => 1.0 / xi,
            Self::HalfT { nu, .. } => 1.0 / nu,
            Self::InvGamma { shape, .. } => 1.0 / shape,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        match *self {
            Self::Frechet { psi, varsigma, xi } => Ok((0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    psi + varsigma * (-u.ln()).powf(-1.0 / xi)
                })
                .collect()),
            Self::HalfT { scale, nu } => {
                let chi = ChiSquared::new(nu).map_err(|e| Error::invalid(e.to_string()))?;
                Ok((0..n)
                    .map(|_| {
                        let z: f64 = rng.sample(StandardNormal);
                        scale * z.abs() / (chi.sample(rng) / nu).sqrt()
                    })
                    .collect())
            }
            Self::InvGamma { shape, scale } => {
                let g = Gamma::new(shape, 1.0).map_err(|e| Error::invalid(e.to_string()))?;
                Ok((0..n).map(|_| scale / g.sample(rng)).collect())
            }
        }
    }

    /// `P(Y > y)`.
    pub fn survival(&self, y: f64) -> f64 {
        match *self {
            Self::Frechet { psi, varsigma, xi } => {
                if y <= psi {
                    1.0
                } else {
                    -(-((y - psi) / varsigma).powf(-xi)).exp_m1()
                }
            }
            Self::HalfT { scale, nu } => {
                if y <= 0.0 {
                    1.0
                } else {
                    let x = y / scale;
                    // P(|T| > x) = I_{ν/(ν+x²)}(ν/2, 1/2), written to avoid
                    // cancellation for huge x.
                    let r = nu / (nu + x * x);
                    beta_reg(nu / 2.0, 0.5, r)
                }
            }
            Self::InvGamma { shape, scale } => {
                if y <= 0.0 {
                    1.0
                } else {
                    gamma_lr(shape, scale / y)
                }
            }
        }
    }

    /// Upper-tail quantile: the `y` with `P(Y > y) = p`.
    pub fn true_quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid(format!("probability must lie in (0, 1), got {p}")));
        }
        match *self {
            Self::Frechet { psi, varsigma, xi } => {
                Ok(psi + varsigma * (-(-p).ln_1p()).powf(-1.0 / xi))
            }
            _ => {
                let log_y = solve_decreasing(|t| self.survival(t.exp()), p, -60.0, 200.0)?;
                Ok(log_y.exp())
            }
        }
    }
}

/// Upper-tail quantile of a univariate testbed.
pub fn true_univariate_quantile(spec: &Univariate, p: f64) -> Result<f64> {
    spec.true_quantile(p)
}
