//! Trans-dimensional update of the dependence structure `(κ, η)`.
//!
//! From `κ = 3` the proposed degree is always 4; otherwise `κ ± 1` with equal
//! probability. The coefficients of the proposed degree are drawn from their
//! conditional prior, so only the prior on `κ`, the likelihood ratio and the
//! Hastings factor of the degree proposal remain in the acceptance ratio.

use rand::Rng;

use crate::dependence::{
    sample_eta_given_kappa, Dependence, DependencePrior, MAX_KAPPA, MIN_KAPPA,
};
use crate::{Error, Result};

/// Result of one trans-dimensional update.
#[derive(Debug, Clone, PartialEq)]
pub struct TransdimOutcome {
    pub dependence: Dependence,
    pub log_likelihood: f64,
    pub proposed_kappa: usize,
    pub accepted: bool,
}

/// Draw the proposed degree.
pub fn propose_kappa<R: Rng + ?Sized>(kappa: usize, rng: &mut R) -> usize {
    if kappa == MIN_KAPPA || rng.random::<bool>() {
        kappa + 1
    } else {
        kappa - 1
    }
}

/// `q(κ | κ') / q(κ' | κ)` for the degree proposal. With `uncorrected` the
/// factor is 1/2 whenever `κ = 3` and 1 otherwise (no correction for 4 → 3).
pub fn hastings_factor(kappa: usize, proposed: usize, uncorrected: bool) -> f64 {
    if uncorrected {
        return if kappa == MIN_KAPPA { 0.5 } else { 1.0 };
    }
    let q = |from: usize, to: usize| {
        if from == MIN_KAPPA {
            if to == MIN_KAPPA + 1 {
                1.0
            } else {
                0.0
            }
        } else if to + 1 == from || to == from + 1 {
            0.5
        } else {
            0.0
        }
    };
    q(proposed, kappa) / q(kappa, proposed)
}

/// One trans-dimensional Metropolis–Hastings update.
///
/// `current_loglik` is the log-likelihood at `current`; `loglik` evaluates it
/// for a proposed dependence structure.
pub fn transdim_step<R, F>(
    current: &Dependence,
    current_loglik: f64,
    mut loglik: F,
    prior: &DependencePrior,
    uncorrected_degree_factor: bool,
    rng: &mut R,
) -> Result<TransdimOutcome>
where
    R: Rng + ?Sized,
    F: FnMut(&Dependence) -> f64,
{
    if !current_loglik.is_finite() {
        return Err(Error::Sampling(format!(
            "log-likelihood at the current dependence state is {current_loglik}"
        )));
    }
    let kappa = current.kappa();
    let proposed_kappa = propose_kappa(kappa, rng);
    let reject = |dependence: &Dependence| TransdimOutcome {
        dependence: dependence.clone(),
        log_likelihood: current_loglik,
        proposed_kappa,
        accepted: false,
    };
    if proposed_kappa > MAX_KAPPA {
        log::warn!("degree proposal {proposed_kappa} above the cap {MAX_KAPPA}; rejected");
        return Ok(reject(current));
    }
    let eta = match sample_eta_given_kappa(proposed_kappa, prior, rng) {
        Ok(eta) => eta,
        Err(Error::Sampling(msg)) | Err(Error::Infeasible(msg)) => {
            log::debug!("coefficient draw failed, counted as a rejection: {msg}");
            return Ok(reject(current));
        }
        Err(e) => return Err(e),
    };
    let proposal = Dependence::new(eta);
    let proposed_ll = loglik(&proposal);
    let log_alpha = hastings_factor(kappa, proposed_kappa, uncorrected_degree_factor).ln()
        + prior.log_kappa(proposed_kappa)?
        - prior.log_kappa(kappa)?
        + proposed_ll
        - current_loglik;
    let u: f64 = rng.random();
    if proposed_ll.is_finite() && u.ln() < log_alpha {
        Ok(TransdimOutcome {
            dependence: proposal,
            log_likelihood: proposed_ll,
            proposed_kappa,
            accepted: true,
        })
    } else {
        Ok(reject(current))
    }
}
