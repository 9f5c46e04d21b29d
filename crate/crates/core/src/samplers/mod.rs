//! MCMC samplers: adaptive random-walk blocks for the margins, the
//! trans-dimensional move for the dependence structure, and the chain drivers.

pub mod chain;
pub mod priors;
pub mod rwmh;
pub mod transdim;

pub use chain::{
    run_bivariate_chain, run_univariate_chain, ChainConfig, Draw, PosteriorChain,
};
pub use priors::MarginalPrior;
pub use rwmh::{rwmh_step, GainSchedule, RobbinsMonro, RwmhState, StepOutcome};
pub use transdim::{transdim_step, TransdimOutcome};
