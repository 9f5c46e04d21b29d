//! Adaptive Gaussian random-walk Metropolis with Robbins–Monro scaling.
//!
//! Proposals are `θ' ~ N(θ, τ Σ)`. After every step `Σ` is refreshed:
//! `(1 + τ²/j) I` for the first 100 iterations, then the empirical covariance
//! of the whole history plus `(τ²/j) I`; and `log τ += c (π - π*)`, with `π`
//! the acceptance probability of the step just made.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::{Error, Result};

/// Iterations with an identity-shaped proposal before the empirical
/// covariance takes over.
pub const IDENTITY_PHASE: usize = 100;

/// How the Robbins–Monro gain evolves with the iteration count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GainSchedule {
    /// `log τ += c (π - π*)` at every iteration.
    #[default]
    Constant,
    /// `log τ += c (π - π*) / max(1, j / 100)`: a diminishing adaptation.
    Decaying,
}

/// Robbins–Monro settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobbinsMonro {
    pub pi_star: f64,
    pub gain: GainSchedule,
}

impl Default for RobbinsMonro {
    fn default() -> Self {
        Self {
            pi_star: 0.234,
            gain: GainSchedule::Constant,
        }
    }
}

impl RobbinsMonro {
    /// `ζ₀ = -Φ⁻¹(π*/2)`.
    pub fn zeta0(&self) -> f64 {
        -Normal::standard().inverse_cdf(self.pi_star / 2.0)
    }

    /// Step length `c = √(2π) exp(ζ₀²/2) / (2 ζ₀)`.
    pub fn steplength(&self) -> f64 {
        let z = self.zeta0();
        (2.0 * std::f64::consts::PI).sqrt() * (z * z / 2.0).exp() / (2.0 * z)
    }

    fn gain_at(&self, j: usize) -> f64 {
        match self.gain {
            GainSchedule::Constant => self.steplength(),
            GainSchedule::Decaying => {
                self.steplength() / (j as f64 / IDENTITY_PHASE as f64).max(1.0)
            }
        }
    }
}

/// State of one adaptive block.
#[derive(Debug, Clone, PartialEq)]
pub struct RwmhState {
    pub theta: Vec<f64>,
    /// Proposal shape `Σ`, row-major `d × d`.
    pub sigma: Vec<f64>,
    pub tau: f64,
    /// Completed iterations.
    pub j: usize,
    pub accept_count: usize,
    running_mean: Vec<f64>,
    scatter: Vec<f64>,
    steplength: f64,
    rm: RobbinsMonro,
}

/// Result of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub accepted: bool,
    /// `min(1, posterior ratio)`; 0 for non-finite proposals.
    pub acceptance_prob: f64,
    /// Log target at the state after the step.
    pub log_target: f64,
}

impl RwmhState {
    pub fn new(theta: Vec<f64>, tau0: f64, rm: RobbinsMonro) -> Result<Self> {
        let d = theta.len();
        if d == 0 {
            return Err(Error::invalid("empty parameter block"));
        }
        if !(tau0 > 0.0 && tau0.is_finite()) {
            return Err(Error::invalid(format!("initial scaling must be positive, got {tau0}")));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("initial parameter values must be finite"));
        }
        if !(rm.pi_star > 0.0 && rm.pi_star < 1.0) {
            return Err(Error::invalid(format!(
                "target acceptance must lie in (0, 1), got {}",
                rm.pi_star
            )));
        }
        let mut sigma = vec![0.0; d * d];
        for i in 0..d {
            sigma[i * d + i] = 1.0;
        }
        Ok(Self {
            running_mean: vec![0.0; d],
            scatter: vec![0.0; d * d],
            theta,
            sigma,
            tau: tau0,
            j: 0,
            accept_count: 0,
            steplength: rm.steplength(),
            rm,
        })
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.j == 0 {
            0.0
        } else {
            self.accept_count as f64 / self.j as f64
        }
    }

    fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let d = self.dim();
        let scaled: Vec<f64> = self.sigma.iter().map(|s| s * self.tau).collect();
        let l = cholesky(&scaled, d)?;
        let eps: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        Ok((0..d)
            .map(|r| self.theta[r] + (0..=r).map(|c| l[r * d + c] * eps[c]).sum::<f64>())
            .collect())
    }

    // Σ and τ refresh after the (j+1)-th iteration, using τ^{(j)}.
    fn adapt(&mut self, acceptance_prob: f64) {
        let d = self.dim();
        self.j += 1;
        let j = self.j as f64;
        // Welford update of the running mean and scatter matrix.
        let delta: Vec<f64> = (0..d).map(|i| self.theta[i] - self.running_mean[i]).collect();
        for i in 0..d {
            self.running_mean[i] += delta[i] / j;
        }
        for r in 0..d {
            for c in 0..d {
                self.scatter[r * d + c] += delta[r] * (self.theta[c] - self.running_mean[c]);
            }
        }
        let ridge = self.tau * self.tau / j;
        if self.j <= IDENTITY_PHASE {
            for r in 0..d {
                for c in 0..d {
                    self.sigma[r * d + c] = if r == c { 1.0 + ridge } else { 0.0 };
                }
            }
        } else {
            for r in 0..d {
                for c in 0..d {
                    let cov = 0.5 * (self.scatter[r * d + c] + self.scatter[c * d + r]) / (j - 1.0);
                    self.sigma[r * d + c] = cov + if r == c { ridge } else { 0.0 };
                }
            }
        }
        let gain = match self.rm.gain {
            GainSchedule::Constant => self.steplength,
            GainSchedule::Decaying => self.rm.gain_at(self.j),
        };
        let log_tau = self.tau.ln() + gain * (acceptance_prob - self.rm.pi_star);
        // Keep τ representable; the bounds are never approached by a
        // well-posed target.
        self.tau = log_tau.clamp(-300.0, 300.0).exp();
    }
}

/// One Metropolis step on `state` followed by adaptation.
///
/// `current` is the log target at `state.theta`; `log_target` evaluates the
/// log target (log-likelihood plus log-prior) at a proposal. Non-finite
/// proposal values are rejected.
pub fn rwmh_step<R, F>(
    state: &mut RwmhState,
    current: f64,
    mut log_target: F,
    rng: &mut R,
) -> Result<StepOutcome>
where
    R: Rng + ?Sized,
    F: FnMut(&[f64]) -> f64,
{
    if !current.is_finite() {
        return Err(Error::Sampling(format!(
            "log target at the current state is {current}"
        )));
    }
    let proposal = state.propose(rng)?;
    let proposed = if proposal.iter().all(|v| v.is_finite()) {
        log_target(&proposal)
    } else {
        f64::NEG_INFINITY
    };
    let log_ratio = proposed - current;
    let acceptance_prob = if log_ratio.is_nan() || proposed == f64::NEG_INFINITY {
        0.0
    } else {
        log_ratio.min(0.0).exp()
    };
    let u: f64 = rng.random();
    let accepted = proposed.is_finite() && u < acceptance_prob;
    let log_target_after = if accepted {
        state.theta = proposal;
        state.accept_count += 1;
        proposed
    } else {
        current
    };
    state.adapt(acceptance_prob);
    Ok(StepOutcome {
        accepted,
        acceptance_prob,
        log_target: log_target_after,
    })
}

/// Lower Cholesky factor of a symmetric positive-definite `d × d` matrix.
pub fn cholesky(a: &[f64], d: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for r in 0..d {
        for c in 0..=r {
            let mut s = a[r * d + c];
            for k in 0..c {
                s -= l[r * d + k] * l[c * d + k];
            }
            if r == c {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::Sampling(format!(
                        "proposal covariance is not positive definite (pivot {s:e} at {r})"
                    )));
                }
                l[r * d + c] = s.sqrt();
            } else {
                l[r * d + c] = s / l[c * d + c];
            }
        }
    }
    Ok(l)
}
