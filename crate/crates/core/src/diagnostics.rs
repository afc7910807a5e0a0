//! Covariate-balance diagnostics at the cutoff.
//!
//! A discontinuous covariate distribution at the cutoff is the condition
//! that motivates the weighted estimands, and the observable signature is a
//! jump in the covariate's conditional mean. The test here runs the
//! unweighted local linear jump estimator with the covariate as outcome;
//! it is a mean-jump test, not a full distributional one.

use serde::Serialize;

use crate::bandwidth::BandwidthSet;
use crate::dataset::{Dataset, Side};
use crate::density::fit_onesided_joint;
use crate::error::{Error, Result};
use crate::estimators::EstimateConfig;
use crate::inference::{bootstrap_around, InferenceConfig, InferenceMethod};
use crate::kernels::Kernel;
use crate::weights::{Estimand, WeightScheme};

/// Jump in a covariate's conditional mean at the cutoff.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct JumpTest {
    pub jump: f64,
    pub se: f64,
    pub z_score: f64,
}

/// Unweighted local linear jump estimate for covariate `j`, with a pairs
/// bootstrap standard error.
pub fn covariate_jump_test(
    ds: &Dataset,
    j: usize,
    kernel: Kernel,
    h: f64,
    b: usize,
    seed: u64,
) -> Result<JumpTest> {
    if j >= ds.n_covariates() {
        return Err(Error::InvalidConfig(format!(
            "covariate index {j} out of range ({} available)",
            ds.n_covariates()
        )));
    }
    let outcome_ds = ds.with_outcome(ds.covariate(j).to_vec())?;
    jump_with_bootstrap(&outcome_ds, kernel, h, b, seed)
}

/// The same jump machinery on an arbitrary outcome; `covariate_jump_test`
/// with the observed outcome reproduces the unweighted sharp estimate.
pub fn jump_with_bootstrap(ds: &Dataset, kernel: Kernel, h: f64, b: usize, seed: u64) -> Result<JumpTest> {
    let cfg = EstimateConfig::sharp(
        WeightScheme::new(Estimand::Unweighted),
        kernel,
        BandwidthSet::uniform(h),
    );
    let point = cfg.point(ds)?;
    let inf = InferenceConfig {
        method: InferenceMethod::Bootstrap,
        b,
        seed,
        level: 0.95,
        refit_cv: None,
    };
    let boot = bootstrap_around(ds, &cfg, &inf, point.effect)?;
    let jump = point.effect;
    let z_score = if boot.se == 0.0 {
        if jump == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(jump)
        }
    } else {
        jump / boot.se
    };
    Ok(JumpTest { jump, se: boot.se, z_score })
}

/// One-sided conditional-density profiles of covariate `j` near the cutoff,
/// each normalized to unit mass over the grid. Plot-ready.
#[derive(Debug, Clone, Serialize)]
pub struct DensityProfile {
    pub grid: Vec<f64>,
    /// Curve from observations above the cutoff.
    pub above: Vec<f64>,
    /// Curve from observations at or below the cutoff.
    pub below: Vec<f64>,
}

/// Evaluate the two one-sided joint densities of `(x, z_j)` at the cutoff
/// over `grid`, normalizing each curve by its own trapezoid mass.
pub fn density_profile(
    ds: &Dataset,
    j: usize,
    grid: &[f64],
    kernel: Kernel,
    h1: f64,
) -> Result<DensityProfile> {
    if j >= ds.n_covariates() {
        return Err(Error::InvalidConfig(format!(
            "covariate index {j} out of range ({} available)",
            ds.n_covariates()
        )));
    }
    if grid.len() < 2 {
        return Err(Error::InvalidConfig("profile grid needs at least two points".into()));
    }
    // single-covariate view so the joint is bivariate regardless of the
    // dataset's full covariate dimension
    let view = Dataset::new_fuzzy(
        ds.y().to_vec(),
        ds.x().to_vec(),
        vec![ds.covariate(j).to_vec()],
        ds.t().to_vec(),
        ds.cutoff(),
    )?;
    let above = fit_onesided_joint(&view, Side::Above, kernel, h1)?;
    let below = fit_onesided_joint(&view, Side::Below, kernel, h1)?;
    let mut above_vals: Vec<f64> = grid.iter().map(|&z| above.eval1(z)).collect();
    let mut below_vals: Vec<f64> = grid.iter().map(|&z| below.eval1(z)).collect();
    normalize_over_grid(grid, &mut above_vals);
    normalize_over_grid(grid, &mut below_vals);
    Ok(DensityProfile { grid: grid.to_vec(), above: above_vals, below: below_vals })
}

fn trapezoid_mass(grid: &[f64], vals: &[f64]) -> f64 {
    grid.windows(2)
        .zip(vals.windows(2))
        .map(|(g, v)| 0.5 * (v[0] + v[1]) * (g[1] - g[0]))
        .sum()
}

fn normalize_over_grid(grid: &[f64], vals: &mut [f64]) {
    let mass = trapezoid_mass(grid, vals);
    if mass > 0.0 {
        for v in vals.iter_mut() {
            *v /= mass;
        }
    }
}

/// Mean of a normalized profile curve over its grid.
pub fn profile_mean(grid: &[f64], vals: &[f64]) -> f64 {
    let weighted: Vec<f64> = grid.iter().zip(vals).map(|(&g, &v)| g * v).collect();
    trapezoid_mass(grid, &weighted)
}
