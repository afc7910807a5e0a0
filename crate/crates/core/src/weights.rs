//! Per-observation inverse weights for each estimand, built from fitted
//! densities.
//!
//! Each estimand weights the conditional-mean jump against a different
//! covariate distribution. The local linear fit only needs weights
//! *proportional* to the inverse pseudo-propensity on each side (the fit is
//! invariant to a per-side scale), so the builder returns ratios normalized
//! to mean one per side and records the scale it removed.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Side};
use crate::density::DensityEstimates;
use crate::error::{Error, Result};
use crate::kernels::Kernel;

/// Which covariate population the effect is averaged over.
///
/// * `Unweighted` — the classical cutoff estimand; all weights one.
/// * `W1` — whole-population covariate marginal.
/// * `W2` — covariate distribution of the locally untreated.
/// * `W3` — equal mixture of the two cutoff-side distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimand {
    #[serde(rename = "srd")]
    Unweighted,
    #[default]
    W1,
    W2,
    W3,
}

impl Estimand {
    pub fn name(self) -> &'static str {
        match self {
            Estimand::Unweighted => "srd",
            Estimand::W1 => "w1",
            Estimand::W2 => "w2",
            Estimand::W3 => "w3",
        }
    }

    pub fn needs_covariates(self) -> bool {
        !matches!(self, Estimand::Unweighted)
    }
}

impl std::str::FromStr for Estimand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "srd" | "unweighted" => Ok(Estimand::Unweighted),
            "w1" => Ok(Estimand::W1),
            "w2" => Ok(Estimand::W2),
            "w3" => Ok(Estimand::W3),
            other => Err(Error::InvalidConfig(format!(
                "unknown estimand `{other}` (expected srd|w1|w2|w3)"
            ))),
        }
    }
}

/// Weight-construction settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightScheme {
    pub estimand: Estimand,
    /// Relative density floor: evaluated densities are floored at
    /// `clip_epsilon` times their per-side maximum before any division.
    pub clip_epsilon: f64,
    /// Covariates declared pre-treatment: the pooled two-sided joint
    /// density replaces both one-sided fits.
    pub pretreatment: bool,
}

pub const DEFAULT_CLIP_EPSILON: f64 = 1e-3;

impl WeightScheme {
    pub fn new(estimand: Estimand) -> WeightScheme {
        WeightScheme { estimand, clip_epsilon: DEFAULT_CLIP_EPSILON, pretreatment: false }
    }

    pub fn pretreatment(mut self, yes: bool) -> WeightScheme {
        self.pretreatment = yes;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.clip_epsilon.is_finite() && self.clip_epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "clip epsilon must be positive, got {}",
                self.clip_epsilon
            )));
        }
        Ok(())
    }
}

/// Inverse weights per cutoff side, normalized to mean one.
///
/// `above`/`below` align with the dataset-order side indices. The removed
/// per-side scale and the scheme constant are kept so the plug-in inverse
/// pseudo-propensity can be reconstructed:
/// `invpi_i = weight_i * side_scale * pi_factor`.
#[derive(Debug, Clone)]
pub struct ObservationWeights {
    pub above: Vec<f64>,
    pub below: Vec<f64>,
    pub above_scale: f64,
    pub below_scale: f64,
    pub pi_factor: f64,
    /// Fraction of this side's density evaluations that hit the floor.
    /// Anything above [`CLIP_WARN_FRACTION`] signals unusable overlap.
    pub above_clip_frac: f64,
    pub below_clip_frac: f64,
}

/// Clipping beyond this fraction on either side is reported as a warning by
/// front ends.
pub const CLIP_WARN_FRACTION: f64 = 0.2;

impl ObservationWeights {
    pub fn side(&self, side: Side) -> &[f64] {
        match side {
            Side::Above => &self.above,
            Side::Below => &self.below,
        }
    }

    pub fn overlap_warning(&self) -> Option<String> {
        let mut msgs = Vec::new();
        if self.above_clip_frac > CLIP_WARN_FRACTION {
            msgs.push(format!("{:.0}% of treated-side densities clipped", self.above_clip_frac * 100.0));
        }
        if self.below_clip_frac > CLIP_WARN_FRACTION {
            msgs.push(format!("{:.0}% of control-side densities clipped", self.below_clip_frac * 100.0));
        }
        if msgs.is_empty() {
            None
        } else {
            Some(format!("weak overlap at the cutoff: {}", msgs.join("; ")))
        }
    }
}

/// Floor a vector of density evaluations at `eps` times its maximum,
/// returning the clipped values and the fraction clipped. Errors when the
/// side has no density support at all.
fn floor_densities(vals: &mut [f64], eps: f64, side: Side) -> Result<f64> {
    let max = vals.iter().cloned().fold(0.0_f64, f64::max);
    if !(max > 0.0) {
        return Err(Error::InsufficientSupport { side: side.name(), n_effective: 0 });
    }
    let floor = eps * max;
    let mut clipped = 0usize;
    for v in vals.iter_mut() {
        if *v < floor {
            *v = floor;
            clipped += 1;
        }
    }
    Ok(clipped as f64 / vals.len() as f64)
}

fn normalize_mean_one(raw: &mut [f64]) -> f64 {
    if raw.is_empty() {
        return 1.0;
    }
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    for v in raw.iter_mut() {
        *v /= mean;
    }
    mean
}

/// Build the per-observation inverse weights for `scheme` from fitted
/// densities.
///
/// The returned weights are proportional to the inverse pseudo-propensity
/// of the estimand on each side; proportionality is all the local linear
/// fit needs. Numerator and denominator density evaluations are both
/// floored at `clip_epsilon` times their per-side maximum — the spec floors
/// denominators, and the numerator floor additionally keeps every weight
/// strictly positive.
pub fn build_weights(
    ds: &Dataset,
    scheme: &WeightScheme,
    dens: &DensityEstimates,
) -> Result<ObservationWeights> {
    scheme.validate()?;
    if scheme.pretreatment != dens.pretreatment {
        return Err(Error::InvalidConfig(
            "weight scheme and fitted densities disagree on the pre-treatment flag".into(),
        ));
    }

    let above_idx = ds.side_indices(Side::Above);
    let below_idx = ds.side_indices(Side::Below);

    if scheme.estimand == Estimand::Unweighted {
        let pi_factor = 2.0 / dens.f_x_at_c;
        return Ok(ObservationWeights {
            above: vec![1.0; above_idx.len()],
            below: vec![1.0; below_idx.len()],
            above_scale: 1.0,
            below_scale: 1.0,
            pi_factor,
            above_clip_frac: 0.0,
            below_clip_frac: 0.0,
        });
    }

    if ds.n_covariates() == 0 {
        return Err(Error::MissingCovariates);
    }
    let f_z = dens.marginal()?;

    let mut out = ObservationWeights {
        above: Vec::new(),
        below: Vec::new(),
        above_scale: 1.0,
        below_scale: 1.0,
        pi_factor: match scheme.estimand {
            Estimand::W1 => 2.0,
            Estimand::W2 => 2.0 / dens.f_x_at_c,
            Estimand::W3 => 1.0 / dens.f_x_at_c,
            Estimand::Unweighted => unreachable!(),
        },
        above_clip_frac: 0.0,
        below_clip_frac: 0.0,
    };

    for (side, idx) in [(Side::Above, &above_idx), (Side::Below, &below_idx)] {
        let own = dens.joint(side)?;
        let other = dens.joint(side.opposite())?;
        let rows: Vec<Vec<f64>> = idx.iter().map(|&i| ds.covariate_row(i)).collect();

        // numerator / denominator per observation, scheme by scheme
        let (mut num, mut den): (Vec<f64>, Vec<f64>) = match scheme.estimand {
            Estimand::W1 => (
                rows.iter().map(|z| f_z.eval(z)).collect(),
                rows.iter().map(|z| own.eval(z)).collect(),
            ),
            Estimand::W2 => {
                if side == Side::Below {
                    (vec![1.0; rows.len()], vec![1.0; rows.len()])
                } else {
                    (
                        rows.iter().map(|z| other.eval(z)).collect(),
                        rows.iter().map(|z| own.eval(z)).collect(),
                    )
                }
            }
            Estimand::W3 => (
                rows.iter().map(|z| own.eval(z) + other.eval(z)).collect(),
                rows.iter().map(|z| own.eval(z)).collect(),
            ),
            Estimand::Unweighted => unreachable!(),
        };

        let constant_side = scheme.estimand == Estimand::W2 && side == Side::Below;
        let clip_frac = if constant_side || rows.is_empty() {
            0.0
        } else {
            let f = floor_densities(&mut den, scheme.clip_epsilon, side)?;
            floor_densities(&mut num, scheme.clip_epsilon, side)?;
            f
        };

        let mut raw: Vec<f64> = num.iter().zip(&den).map(|(n, d)| n / d).collect();
        let scale = normalize_mean_one(&mut raw);
        match side {
            Side::Above => {
                out.above = raw;
                out.above_scale = scale;
                out.above_clip_frac = clip_frac;
            }
            Side::Below => {
                out.below = raw;
                out.below_scale = scale;
                out.below_clip_frac = clip_frac;
            }
        }
    }
    Ok(out)
}

/// Empirical check of the weight normalization on the treated side:
///
/// `(1/n) * sum over x_i > c of invpi_i * K((x_i - c)/h) / h`
///
/// where `invpi_i` is the reconstructed plug-in inverse pseudo-propensity.
/// Its population target is one for a correctly normalized scheme; used as
/// a diagnostic, not an estimator.
pub fn normalization_check(ds: &Dataset, weights: &ObservationWeights, kernel: Kernel, h: f64) -> f64 {
    let c = ds.cutoff();
    let idx = ds.side_indices(Side::Above);
    let mut acc = 0.0;
    for (pos, &i) in idx.iter().enumerate() {
        let kw = kernel.eval((ds.x()[i] - c) / h);
        if kw > 0.0 {
            let invpi = weights.above[pos] * weights.above_scale * weights.pi_factor;
            acc += invpi * kw / h;
        }
    }
    acc / ds.n() as f64
}
