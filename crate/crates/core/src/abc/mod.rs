//! Rejection ABC with smooth kernel weights.

pub mod kernel;
pub mod posterior;
pub mod prior;

pub use kernel::{
    accepted_count, epanechnikov, kernel_weights, path_distances, path_weights,
    path_weights_from_distances, path_weights_joint_rate, scaled_distances, tolerance_from_rate,
    vector_weights, vector_weights_from_distances, Tolerance, Weights,
};
pub use posterior::{
    effective_sample_size, kde_bandwidth, weighted_kde_mode, weighted_mean, weighted_quantile,
    CoordinateSummary, PosteriorSummary, Provenance, WeightedPosterior, MODE_GRID,
};
pub use prior::{sample_prior, ParamPrior, PriorSpec};
