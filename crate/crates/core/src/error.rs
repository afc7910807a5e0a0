//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,

    #[error("bandwidth must be strictly positive, got {0}")]
    NonPositiveBandwidth(f64),

    #[error("no observations on the {0} side of the cutoff")]
    EmptySide(&'static str),

    #[error("insufficient support on the {side} side: {n_effective} point(s) with positive kernel weight (need at least 3)")]
    InsufficientSupport { side: &'static str, n_effective: usize },

    #[error("singular local design: effective running-variable values are collinear")]
    SingularDesign,

    #[error("degenerate kernel moments: variance-constant denominator is not positive")]
    DegenerateMoments,

    #[error("density estimates missing for the requested weight scheme: {0}")]
    MissingDensity(&'static str),

    #[error("estimand requires covariates but the dataset has none")]
    MissingCovariates,

    #[error("weak first stage: treatment jump {value:.6} below threshold {threshold}")]
    WeakFirstStage { value: f64, threshold: f64 },

    #[error("no bandwidth in the grid admits a valid cross-validation fit")]
    NoValidBandwidth,

    #[error("row {row}: treatment indicator contradicts sharp assignment 1(x > cutoff)")]
    SharpContradiction { row: usize },

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: value `{value}` is not a finite number")]
    NonNumericCell { row: usize, column: String, value: String },

    #[error("{failed} of {total} resampling replicates failed (more than 10% tolerated)")]
    ReplicateFailures { failed: usize, total: usize },

    #[error("plug-in variance is not derived for this configuration: {0}")]
    UnsupportedInference(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
