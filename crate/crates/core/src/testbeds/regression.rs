//! Synthetic covariate study: GEV responses whose location is quadratic in a
//! uniform covariate.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::margins::MarginalModel;
use crate::{Error, Result};

/// `Y | z ~ GEV(μ_G(z), σ_G, γ)` with `σ_G = σ (k/n)^γ` and
/// `μ_G(z) = μ(z) - (σ - σ_G)/γ`, so that `G^{k/n}` evaluated with
/// `(μ(z), σ, γ)` is exactly the conditional CDF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadraticLocationStudy {
    pub beta: [f64; 3],
    pub sigma: f64,
    pub gamma: f64,
    /// Tail fraction `k/n` the parameters refer to.
    pub k_over_n: f64,
    pub z_range: (f64, f64),
}

impl Default for QuadraticLocationStudy {
    fn default() -> Self {
        Self {
            beta: [2.0, 1.0, 0.5],
            sigma: 100.0,
            gamma: 0.2,
            k_over_n: 0.1,
            z_range: (-5.0, 20.0),
        }
    }
}

impl QuadraticLocationStudy {
    pub fn model(&self) -> MarginalModel {
        MarginalModel {
            beta: self.beta,
            sigma: self.sigma,
            gamma: self.gamma,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.gamma > 0.0 && self.k_over_n > 0.0 && self.k_over_n < 1.0)
            || !(self.z_range.0 < self.z_range.1)
        {
            return Err(Error::invalid(format!("invalid regression study {self:?}")));
        }
        Ok(())
    }

    /// `n` responses and their covariates.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
        self.validate()?;
        let (lo, hi) = self.z_range;
        let sigma_g = self.sigma * self.k_over_n.powf(self.gamma);
        let model = self.model();
        let mut ys = Vec::with_capacity(n);
        let mut zs = Vec::with_capacity(n);
        for _ in 0..n {
            let z = lo + (hi - lo) * rng.random::<f64>();
            let mu_g = model.location_at(z) - (self.sigma - sigma_g) / self.gamma;
            let u: f64 = 1.0 - rng.random::<f64>();
            ys.push(mu_g + sigma_g * ((-u.ln()).powf(-self.gamma) - 1.0) / self.gamma);
            zs.push(z);
        }
        Ok((ys, zs))
    }
}
