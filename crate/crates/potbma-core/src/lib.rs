//! Extreme value threshold selection and averaging for peaks-over-threshold
//! analyses.
//!
//! Binomial–generalized-Pareto (BGP) models are fitted at a grid of candidate
//! thresholds by posterior sampling, each threshold is scored by
//! importance-sampled leave-one-out cross-validation at a common validation
//! threshold, and the per-threshold scores drive both single-threshold
//! selection and Bayesian model averaging of predictive distributions of
//! N-year maxima.

pub mod cv;
pub mod error;
pub mod gp;
pub mod mle;
pub mod optim;
pub mod posterior;
pub mod predictive;
pub mod prior;
pub mod quantiles;
pub mod rou;
pub mod seed;
pub mod sim;

pub use error::{Error, Result};
pub use gp::{BgpParams, GpParams, Threshold};
pub use posterior::PosteriorSample;
pub use prior::PriorSpec;
