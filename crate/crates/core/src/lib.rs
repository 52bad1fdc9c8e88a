//! Stochastic SIR epidemics with random-screening and contact-tracing
//! detection, and simulation-based inference of their rates.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: parameters, the exact jump-process simulator (thinning on the
//!   contact-tracing clock), event logs and the deterministic ODE limit.
//! - [`summaries`]: path-valued (`R¹_t`, `R²_t`) and binned vector summaries,
//!   the exact L1 distance between step paths, and the diagonal scale matrix.
//! - [`abc`]: priors, Epanechnikov kernel weighting, tolerance selection and
//!   weighted posterior estimators (mean, quantiles, KDE mode).
//! - [`adjust`]: local-linear and neural heteroscedastic regression
//!   adjustment on a support-preserving transformed scale.
//! - [`mcmc`]: data-augmentation MCMC for the closed SIR model observed
//!   through its detection times.
//! - [`experiments`]: datasets, the synthetic study, predictive checks and
//!   tolerance tuning.

pub mod abc;
pub mod adjust;
pub mod error;
pub mod experiments;
pub mod mcmc;
pub mod model;
pub mod rng;
pub mod summaries;

pub use abc::{PriorSpec, WeightedPosterior};
pub use error::{Error, Result};
pub use model::{
    ct_pressure, event_rates, simulate, solve_ode, DeterministicTrajectory, EpidemicPath,
    EventKind, Parameters, PopulationState, Variant,
};
pub use summaries::{detection_paths, l1_distance, ScaleMatrix, StepPath, SummaryVector};
