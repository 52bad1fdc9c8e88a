//! Data-augmentation MCMC for the closed SIR model observed through its
//! detection times: Gibbs updates of the two rates and Metropolis–Hastings
//! moves, insertions and deletions of latent infection times.

pub mod likelihood;
pub mod sampler;

pub use likelihood::{complete_loglik, path_stats, AugmentedState, McmcData, PathStats};
pub use sampler::{
    initial_infections, run_mcmc, run_mcmc_from, Chain, Diagnostics, GammaPrior, McmcConfig,
    MoveKind, MoveStats,
};
