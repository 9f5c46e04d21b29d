//! Priors on the marginal parameters `(μ or β, σ, γ)`.
//!
//! Sampling happens on `(μ or β, log σ, γ)`, so the working-scale log-prior
//! carries the Jacobian `+log σ`. Only positive tail indices are supported:
//! `γ ≤ 0` has zero prior mass under every choice.

use serde::{Deserialize, Serialize};

use crate::margins::MarginalModel;

/// Marginal prior configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum MarginalPrior {
    /// Flat in `μ`, `log σ` and `γ`: `Π ∝ 1/σ`.
    #[default]
    A,
    /// Strongly informative: `N(μ; 0, 2²) logN(σ; 0, (1/3)²) N(γ; 0, (3/2)²)`.
    B,
    /// Weakly informative: `N(μ; 0, 5²) logN(σ; 0, 5²) N(γ; 0, 6²)`.
    C,
}

impl std::str::FromStr for MarginalPrior {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Self::A),
            "B" => Ok(Self::B),
            "C" => Ok(Self::C),
            other => Err(crate::Error::invalid(format!(
                "unknown marginal prior {other:?}; expected A, B or C"
            ))),
        }
    }
}

fn ln_normal(x: f64, sd: f64) -> f64 {
    let z = x / sd;
    -0.5 * z * z - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

impl MarginalPrior {
    /// `(sd of each location coefficient, sd of log σ, sd of γ)`.
    fn scales(&self) -> Option<(f64, f64, f64)> {
        match self {
            Self::A => None,
            Self::B => Some((2.0, 1.0 / 3.0, 1.5)),
            Self::C => Some((5.0, 5.0, 6.0)),
        }
    }

    /// Log prior density with respect to Lebesgue measure on `(β, σ, γ)`,
    /// up to an additive constant for the improper choice. Under regression
    /// the location prior applies independently to each coefficient.
    pub fn log_density(&self, model: &MarginalModel, regression: bool) -> f64 {
        if !(model.gamma > 0.0 && model.sigma > 0.0) {
            return f64::NEG_INFINITY;
        }
        let log_sigma = model.sigma.ln();
        match self.scales() {
            None => -log_sigma,
            Some((sd_mu, sd_log_sigma, sd_gamma)) => {
                let coefs = if regression { &model.beta[..] } else { &model.beta[..1] };
                coefs.iter().map(|&b| ln_normal(b, sd_mu)).sum::<f64>()
                    + ln_normal(log_sigma, sd_log_sigma)
                    - log_sigma
                    + ln_normal(model.gamma, sd_gamma)
            }
        }
    }

    /// Log prior on the sampling scale `(β, log σ, γ)`.
    pub fn log_density_working(&self, model: &MarginalModel, regression: bool) -> f64 {
        let lp = self.log_density(model, regression);
        if lp == f64::NEG_INFINITY {
            lp
        } else {
            lp + model.sigma.ln()
        }
    }
}
