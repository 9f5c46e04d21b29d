//! Chain drivers: univariate adaptive RWMH and the three-block bivariate
//! scheme (margin 1, margin 2, dependence structure) run in that order at
//! every iteration.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dependence::{sample_eta_given_kappa, Dependence, DependencePrior, EtaCoefficients};
use crate::likelihoods::{bivariate_censored_loglik, BivariateSample, DependenceParams};
use crate::margins::{CensoredSample, MarginalModel};
use crate::samplers::priors::MarginalPrior;
use crate::samplers::rwmh::{rwmh_step, RobbinsMonro, RwmhState};
use crate::samplers::transdim::transdim_step;
use crate::stats;
use crate::{likelihoods, Error, Result};

/// Settings shared by the chain drivers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    /// Total iterations `M`.
    pub iterations: usize,
    /// Burn-in `m`, discarded by the summaries.
    pub burn_in: usize,
    pub seed: u64,
    pub robbins_monro: RobbinsMonro,
    /// Initial scaling `τ⁽⁰⁾`.
    pub tau0: f64,
    pub marginal_prior: MarginalPrior,
    pub dependence_prior: DependencePrior,
    /// Use the uncorrected degree-proposal factor (1/2 only when leaving 3).
    pub uncorrected_degree_factor: bool,
    /// Run the random walk on location coefficients divided by the initial
    /// scale estimate, so the identity start of `Σ` is commensurate across
    /// coordinates.
    pub precondition: bool,
    /// Hold the dependence structure fixed at these coefficients.
    pub fixed_dependence: Option<Vec<f64>>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            iterations: 50_000,
            burn_in: 30_000,
            seed: 1,
            robbins_monro: RobbinsMonro::default(),
            tau0: 1.0,
            marginal_prior: MarginalPrior::A,
            dependence_prior: DependencePrior::simulation(),
            uncorrected_degree_factor: false,
            precondition: true,
            fixed_dependence: None,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return Err(Error::invalid(format!(
                "need 0 <= burn-in < iterations, got burn-in {} and {} iterations",
                self.burn_in, self.iterations
            )));
        }
        self.dependence_prior.validate()
    }
}

/// Full state after one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub margins: Vec<MarginalModel>,
    /// Dependence coefficients (bivariate chains only).
    pub eta: Option<Vec<f64>>,
    /// Acceptance flags: one per marginal block, then the dependence move.
    pub accepted: Vec<bool>,
    /// Metropolis acceptance probabilities of the marginal blocks.
    pub acceptance_prob: Vec<f64>,
    /// Scaling `τ` of each marginal block after adaptation.
    pub tau: Vec<f64>,
    pub log_likelihood: f64,
}

impl Draw {
    pub fn kappa(&self) -> Option<usize> {
        self.eta.as_ref().map(Vec::len)
    }

    /// Dependence structure of this draw.
    pub fn dependence(&self) -> Option<Result<Dependence>> {
        self.eta
            .as_ref()
            .map(|e| EtaCoefficients::new(e.clone()).map(Dependence::new))
    }
}

/// Ordered draws with the data summaries needed downstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorChain {
    pub draws: Vec<Draw>,
    pub burn_in: usize,
    pub regression: bool,
    pub thresholds: Vec<f64>,
    pub k: Vec<usize>,
    pub n: usize,
}

impl PosteriorChain {
    /// Post-burn-in draws.
    pub fn retained(&self) -> &[Draw] {
        &self.draws[self.burn_in.min(self.draws.len())..]
    }

    pub fn k_over_n(&self, margin: usize) -> f64 {
        self.k[margin] as f64 / self.n as f64
    }

    /// Retained values of a scalar functional.
    pub fn trace(&self, f: impl Fn(&Draw) -> f64) -> Vec<f64> {
        self.retained().iter().map(f).collect()
    }

    /// Empirical acceptance rate of `block` over the retained window.
    pub fn acceptance_rate(&self, block: usize) -> f64 {
        let r = self.retained();
        r.iter().filter(|d| d.accepted[block]).count() as f64 / r.len().max(1) as f64
    }

    /// Mean Metropolis acceptance probability of a marginal block over the
    /// retained window.
    pub fn mean_acceptance_prob(&self, block: usize) -> f64 {
        stats::mean(&self.trace(|d| d.acceptance_prob[block]))
    }

    /// Posterior frequencies of the degree over the retained window, indexed
    /// by `κ`.
    pub fn kappa_table(&self) -> Vec<(usize, f64)> {
        let r = self.retained();
        let mut counts = std::collections::BTreeMap::new();
        for d in r {
            if let Some(k) = d.kappa() {
                *counts.entry(k).or_insert(0usize) += 1;
            }
        }
        counts
            .into_iter()
            .map(|(k, c)| (k, c as f64 / r.len() as f64))
            .collect()
    }
}

/// Affine map between the sampler's working vector and a marginal model:
/// `x = offset + scale ⊙ u`, with `x = (β…, log σ, γ)`.
#[derive(Debug, Clone, PartialEq)]
struct Layout {
    regression: bool,
    offset: Vec<f64>,
    scale: Vec<f64>,
}

impl Layout {
    fn new(init: &MarginalModel, covariates: Option<&[f64]>, precondition: bool) -> Self {
        let regression = covariates.is_some();
        let mut offset = vec![init.beta[0]];
        if regression {
            offset.extend([init.beta[1], init.beta[2]]);
        }
        offset.extend([init.sigma.ln(), init.gamma]);
        let mut scale = vec![1.0; offset.len()];
        if precondition {
            scale[0] = init.sigma;
            if let Some(z) = covariates {
                let sq: Vec<f64> = z.iter().map(|v| v * v).collect();
                scale[1] = init.sigma / stats::variance(z).sqrt().max(1e-12);
                scale[2] = init.sigma / stats::variance(&sq).sqrt().max(1e-12);
            }
        }
        Self {
            regression,
            offset,
            scale,
        }
    }

    fn dim(&self) -> usize {
        self.offset.len()
    }

    fn to_model(&self, u: &[f64]) -> MarginalModel {
        let x: Vec<f64> = (0..self.dim())
            .map(|i| self.offset[i] + self.scale[i] * u[i])
            .collect();
        let d = x.len();
        MarginalModel {
            beta: if self.regression {
                [x[0], x[1], x[2]]
            } else {
                [x[0], 0.0, 0.0]
            },
            sigma: x[d - 2].exp(),
            gamma: x[d - 1],
        }
    }
}

/// Starting values: location at the threshold, `γ = 1/2` and a scale matched
/// to the median excess of a generalised Pareto law with that tail index.
pub fn initial_marginal(sample: &CensoredSample) -> MarginalModel {
    let gamma0: f64 = 0.5;
    let excesses: Vec<f64> = sample.exceedances().map(|(_, y)| y - sample.threshold).collect();
    let median = if excesses.is_empty() {
        0.0
    } else {
        stats::quantile(&excesses, 0.5)
    };
    let mut sigma = median * gamma0 / (2f64.powf(gamma0) - 1.0);
    if !(sigma > 0.0 && sigma.is_finite()) {
        let spread = stats::variance(&sample.values).sqrt();
        sigma = if spread > 0.0 && spread.is_finite() { spread } else { 1.0 };
    }
    MarginalModel {
        beta: [sample.threshold, 0.0, 0.0],
        sigma,
        gamma: gamma0,
    }
}

/// Adaptive RWMH for one margin on `(μ or β, log σ, γ)`.
pub fn run_univariate_chain<R: Rng + ?Sized>(
    sample: &CensoredSample,
    config: &ChainConfig,
    rng: &mut R,
) -> Result<PosteriorChain> {
    let loglik = |m: &MarginalModel| likelihoods::univariate_censored_loglik(sample, m);
    run_univariate_with(sample, config, loglik, rng)
}

/// [`run_univariate_chain`] with a caller-supplied log-likelihood (used for
/// known-target checks).
pub fn run_univariate_with<R, L>(
    sample: &CensoredSample,
    config: &ChainConfig,
    loglik: L,
    rng: &mut R,
) -> Result<PosteriorChain>
where
    R: Rng + ?Sized,
    L: Fn(&MarginalModel) -> f64,
{
    config.validate()?;
    let regression = sample.covariates.is_some();
    let init = initial_marginal(sample);
    let layout = Layout::new(&init, sample.covariates.as_deref(), config.precondition);
    let prior = config.marginal_prior;
    let target = |u: &[f64]| {
        let m = layout.to_model(u);
        let lp = prior.log_density_working(&m, regression);
        if lp == f64::NEG_INFINITY {
            lp
        } else {
            lp + loglik(&m)
        }
    };
    let mut state = RwmhState::new(vec![0.0; layout.dim()], config.tau0, config.robbins_monro)?;
    let mut current = target(&state.theta);
    if !current.is_finite() {
        return Err(Error::Sampling(format!(
            "log posterior at the starting values is {current}"
        )));
    }
    let mut draws = Vec::with_capacity(config.iterations);
    for _ in 0..config.iterations {
        let out = rwmh_step(&mut state, current, target, rng)?;
        current = out.log_target;
        let model = layout.to_model(&state.theta);
        draws.push(Draw {
            log_likelihood: current - prior.log_density_working(&model, regression),
            margins: vec![model],
            eta: None,
            accepted: vec![out.accepted],
            acceptance_prob: vec![out.acceptance_prob],
            tau: vec![state.tau],
        });
    }
    Ok(PosteriorChain {
        draws,
        burn_in: config.burn_in,
        regression,
        thresholds: vec![sample.threshold],
        k: vec![sample.k],
        n: sample.n,
    })
}

/// Three-block trans-dimensional scheme for a bivariate sample.
pub fn run_bivariate_chain<R: Rng + ?Sized>(
    sample: &BivariateSample,
    config: &ChainConfig,
    rng: &mut R,
) -> Result<PosteriorChain> {
    config.validate()?;
    let regression = sample.covariates.is_some();
    let prior = config.marginal_prior;
    let layouts: Vec<Layout> = (0..2)
        .map(|i| {
            let init = initial_marginal(&sample.margin(i));
            Layout::new(&init, sample.covariates.as_deref(), config.precondition)
        })
        .collect();
    let mut states = (0..2)
        .map(|i| RwmhState::new(vec![0.0; layouts[i].dim()], config.tau0, config.robbins_monro))
        .collect::<Result<Vec<_>>>()?;
    let mut margins = [layouts[0].to_model(&states[0].theta), layouts[1].to_model(&states[1].theta)];

    let dep_prior = config.dependence_prior;
    let mut dependence = match &config.fixed_dependence {
        Some(eta) => Dependence::new(EtaCoefficients::new(eta.clone())?),
        None => Dependence::new(sample_eta_given_kappa(dep_prior.initial_kappa(), &dep_prior, rng)?),
    };
    let loglik = |margins: &[MarginalModel; 2], dependence: &Dependence| {
        bivariate_censored_loglik(
            sample,
            &DependenceParams {
                margins: *margins,
                dependence: dependence.clone(),
            },
        )
    };
    let mut ll = loglik(&margins, &dependence);
    if !ll.is_finite() {
        return Err(Error::Sampling(format!(
            "log-likelihood at the starting values is {ll}"
        )));
    }

    let mut draws = Vec::with_capacity(config.iterations);
    for _ in 0..config.iterations {
        let mut accepted = vec![false; 3];
        let mut probs = vec![0.0; 2];
        for b in 0..2 {
            let layout = &layouts[b];
            let current = prior.log_density_working(&margins[b], regression) + ll;
            let mut proposal_ll = f64::NEG_INFINITY;
            let target = |u: &[f64]| {
                let m = layout.to_model(u);
                let lp = prior.log_density_working(&m, regression);
                if lp == f64::NEG_INFINITY {
                    return lp;
                }
                let mut trial = margins;
                trial[b] = m;
                proposal_ll = loglik(&trial, &dependence);
                lp + proposal_ll
            };
            let out = rwmh_step(&mut states[b], current, target, rng)?;
            if out.accepted {
                margins[b] = layout.to_model(&states[b].theta);
                ll = proposal_ll;
            }
            accepted[b] = out.accepted;
            probs[b] = out.acceptance_prob;
        }
        if config.fixed_dependence.is_none() {
            let out = transdim_step(
                &dependence,
                ll,
                |d| loglik(&margins, d),
                &dep_prior,
                config.uncorrected_degree_factor,
                rng,
            )?;
            accepted[2] = out.accepted;
            dependence = out.dependence;
            ll = out.log_likelihood;
        }
        draws.push(Draw {
            margins: margins.to_vec(),
            eta: Some(dependence.eta().as_slice().to_vec()),
            accepted,
            acceptance_prob: probs,
            tau: vec![states[0].tau, states[1].tau],
            log_likelihood: ll,
        });
    }
    Ok(PosteriorChain {
        draws,
        burn_in: config.burn_in,
        regression,
        thresholds: sample.thresholds.to_vec(),
        k: sample.k.to_vec(),
        n: sample.n,
    })
}
