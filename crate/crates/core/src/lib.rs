//! Bayesian estimation of extreme univariate quantiles and bivariate extreme
//! quantile regions.
//!
//! The crate is organised bottom-up:
//!
//! - [`margins`]: GEV/GP tail primitives on a single margin (censored CDF
//!   power, tail density, standardising transform, extreme quantile formula,
//!   threshold selection and covariate-driven location).
//! - [`dependence`]: Bernstein-polynomial Pickands dependence function and
//!   angular density, the coefficient maps between them and the priors over
//!   the polynomial degree and coefficients.
//! - [`likelihoods`]: censored log-likelihoods for one and two margins.
//! - [`samplers`]: adaptive random-walk Metropolis with Robbins-Monro scaling
//!   and the trans-dimensional move on the dependence structure.
//! - [`regions`]: angular basic density, basic set, its exponent measure and
//!   the inflation to data-scale quantile regions, plus posterior summaries.
//! - [`testbeds`]: simulation distributions with closed-form tail truths.
//!
//! Supporting numerics live in [`quadrature`] and [`stats`].

pub mod dependence;
pub mod error;
pub mod likelihoods;
pub mod margins;
pub mod quadrature;
pub mod regions;
pub mod samplers;
pub mod stats;
pub mod testbeds;

pub use error::{Error, Result};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Random stream used by every sampler in the crate. One stream per chain.
pub type Rng = rand_chacha::ChaCha20Rng;

/// Build the crate's random stream from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
