//! Selecting the number of components and the number of clusters of finite
//! Gaussian mixtures.
//!
//! The crate covers the frequentist and the Bayesian side of the problem:
//!
//! * [`mixture`]: densities, likelihoods, classification matrices, simulation;
//! * [`em`]: EM, componentwise EM with message-length annihilation, and the
//!   conditional-classification-likelihood fitter;
//! * [`criteria`]: AIC, BIC, AIC3, ICLbic, Lcc-ICL, slope heuristics, DIC and
//!   the parametric bootstrap likelihood ratio test;
//! * [`gibbs`]: Gibbs sampling under the Richardson–Green prior with random
//!   permutation moves and label-switching resolution;
//! * [`marglik`]: marginal likelihoods by importance, reciprocal importance
//!   and bridge sampling, Chib's estimator, and exact enumeration on toys;
//! * [`sparse`]: sparse finite mixtures, partition priors, predictive
//!   probabilities, stick breaking and Binder-loss partitions.

pub mod assignment;
pub mod criteria;
pub mod em;
pub mod error;
pub mod gibbs;
pub mod kmeans;
pub mod marglik;
pub mod mixture;
pub mod numeric;
pub mod perm;
pub mod sparse;

pub use em::{EmOptions, FitResult, InitPolicy};
pub use error::{MixError, Result};
pub use gibbs::{ChainOptions, GibbsOutput, RGPrior};
pub use mixture::{
    AllocationVector, ClassificationMatrix, CovarianceFamily, Dataset, Gaussian, MixtureParams,
};
