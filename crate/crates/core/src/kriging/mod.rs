//! Ordinary Kriging (Gaussian-process regression with a constant trend)
//! using the Matérn-5/2 correlation and maximum-likelihood hyper-parameters.

mod kernel;
mod likelihood;
mod model;
mod standardize;

pub use kernel::{matern52, matern52_from_distance, scaled_sq_distance};
pub use likelihood::{
    build_factorized_correlation, profile_trend_and_variance, reduced_likelihood,
    reduced_likelihood_objective, PairwiseSqDiffs, NUGGET_MAX, NUGGET_START, SIGMA2_FLOOR,
};
pub use model::{fit, fit_with, KrigingConfig, KrigingHyperParams, KrigingModel};
pub use standardize::Standardizer;

pub(crate) use likelihood::profile_from_whitened;
pub(crate) use model::optimize_theta;
