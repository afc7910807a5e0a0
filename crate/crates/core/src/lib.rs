//! Treatment-effect estimation for regression-discontinuity designs whose
//! covariate distributions jump at the cutoff.
//!
//! When units sort themselves across a cutoff, the classical jump estimand
//! mixes the direct effect with a contamination term from the unbalanced
//! covariates. This crate estimates a family of weighted average treatment
//! effects that recover the direct effect: per-observation inverse weights
//! built from kernel density estimates enter a weighted local linear fit on
//! each side of the cutoff, and the effect is the difference of the two
//! intercepts.
//!
//! The pieces are exposed as a pipeline:
//!
//! * [`kernels`] — compactly supported kernels and their boundary moments;
//! * [`density`] — marginal and cutoff-joint kernel density estimators;
//! * [`weights`] — inverse weights per estimand, with density flooring;
//! * [`estimators`] — weighted local linear side fits, sharp and fuzzy
//!   effect estimates;
//! * [`bandwidth`] — near-cutoff cross-validation and coupling rules;
//! * [`inference`] — pairs bootstrap and plug-in asymptotic variances;
//! * [`diagnostics`] — covariate-jump tests and density profiles;
//! * [`simulation`] — seeded designs and the Monte Carlo harness.

pub mod bandwidth;
pub mod dataset;
pub mod density;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod kernels;
pub mod seed;
pub mod simulation;
pub mod weights;

pub use bandwidth::{couple_bandwidths, default_grid, select_bandwidth_cv, BandwidthSet};
pub use dataset::{Dataset, Side};
pub use density::{fit_density_estimates, DensityEstimates};
pub use error::{Error, Result};
pub use estimators::{
    estimate_fuzzy, estimate_sharp, wll_side_fit, EstimateConfig, EstimateResult, FuzzyOptions,
    PointEstimate, SideFit,
};
pub use inference::{
    bootstrap_se, coverage_indicator, plugin_se, BootstrapResult, InferenceConfig, InferenceMethod,
};
pub use kernels::{cv_constant, Kernel, KernelMoments};
pub use weights::{build_weights, normalization_check, Estimand, ObservationWeights, WeightScheme};
