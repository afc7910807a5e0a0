//! Weighted local linear side fits and the cutoff-jump estimators.

use serde::Serialize;

use crate::bandwidth::BandwidthSet;
use crate::dataset::{Dataset, Side};
use crate::density::{fit_density_estimates, DensityEstimates};
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::weights::{build_weights, Estimand, ObservationWeights, WeightScheme};

/// One-sided weighted local linear fit at the cutoff.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SideFit {
    /// Intercept at the cutoff (outcome units).
    pub intercept: f64,
    /// Slope (outcome per running-variable unit).
    pub slope: f64,
    /// Observations with positive kernel weight.
    pub n_effective: usize,
}

/// Exact minimizer of
/// `sum_i invw_i (y_i - a - (x_i - c) b)^2 K((x_i - c)/h)`
/// over one side's points: a closed-form 2x2 weighted least squares solve.
///
/// Accumulation runs in slice order so results are reproducible bit for
/// bit; with unit inverse weights this is exactly the unweighted local
/// linear boundary fit.
pub fn wll_side_fit(
    x: &[f64],
    y: &[f64],
    invw: &[f64],
    kernel: Kernel,
    h: f64,
    cutoff: f64,
    side: Side,
) -> Result<SideFit> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::NonPositiveBandwidth(h));
    }
    if x.len() != y.len() || x.len() != invw.len() {
        return Err(Error::InvalidConfig("side fit inputs must have equal length".into()));
    }
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    let (mut t0, mut t1) = (0.0, 0.0);
    let mut n_effective = 0usize;
    let mut constant_y = None;
    for i in 0..x.len() {
        let kw = kernel.eval((x[i] - cutoff) / h);
        if kw <= 0.0 {
            continue;
        }
        n_effective += 1;
        constant_y = match constant_y {
            None => Some(Some(y[i])),
            Some(Some(v)) if v.to_bits() == y[i].to_bits() => Some(Some(v)),
            _ => Some(None),
        };
        let w = invw[i] * kw;
        let d = x[i] - cutoff;
        s0 += w;
        s1 += w * d;
        s2 += w * d * d;
        t0 += w * y[i];
        t1 += w * d * y[i];
    }
    if n_effective < 3 {
        return Err(Error::InsufficientSupport { side: side.name(), n_effective });
    }
    let det = s0 * s2 - s1 * s1;
    if !(det.is_finite() && det > f64::EPSILON * s0 * s2) {
        return Err(Error::SingularDesign);
    }
    if let Some(Some(v)) = constant_y {
        // the exact minimizer; skips the solve's rounding
        return Ok(SideFit { intercept: v, slope: 0.0, n_effective });
    }
    Ok(SideFit {
        intercept: (s2 * t0 - s1 * t1) / det,
        slope: (s0 * t1 - s1 * t0) / det,
        n_effective,
    })
}

/// Fuzzy-design settings: the first-stage jump in treatment probability
/// must clear this threshold in absolute value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FuzzyOptions {
    pub min_first_stage: f64,
}

impl Default for FuzzyOptions {
    fn default() -> Self {
        FuzzyOptions { min_first_stage: 0.05 }
    }
}

/// Everything needed to run the point-estimation pipeline once; bootstrap
/// replicates rerun this unchanged on resampled data.
#[derive(Debug, Clone)]
pub struct EstimateConfig {
    pub scheme: WeightScheme,
    pub kernel: Kernel,
    pub bw: BandwidthSet,
    /// `None` runs the sharp estimator; `Some` the ratio estimator.
    pub fuzzy: Option<FuzzyOptions>,
}

impl EstimateConfig {
    pub fn sharp(scheme: WeightScheme, kernel: Kernel, bw: BandwidthSet) -> Self {
        EstimateConfig { scheme, kernel, bw, fuzzy: None }
    }

    pub fn fuzzy(scheme: WeightScheme, kernel: Kernel, bw: BandwidthSet, opts: FuzzyOptions) -> Self {
        EstimateConfig { scheme, kernel, bw, fuzzy: Some(opts) }
    }

    /// Point estimate only (no inference).
    pub fn point(&self, ds: &Dataset) -> Result<PointEstimate> {
        Ok(self.pipeline(ds)?.0)
    }

    /// Full pipeline: densities, weights, per-side fits, effect. The
    /// artifacts feed plug-in inference.
    pub fn pipeline(&self, ds: &Dataset) -> Result<(PointEstimate, PipelineArtifacts)> {
        self.bw.validate()?;
        self.scheme.validate()?;
        if self.fuzzy.is_none() && !ds.is_sharp() {
            return Err(Error::InvalidConfig(
                "dataset treatment contradicts sharp assignment; use the fuzzy estimator".into(),
            ));
        }
        if let Some(opts) = &self.fuzzy {
            if self.scheme.estimand == Estimand::Unweighted {
                return Err(Error::InvalidConfig(
                    "the fuzzy estimator requires a weighted estimand (w1, w2 or w3)".into(),
                ));
            }
            if !(opts.min_first_stage >= 0.0 && opts.min_first_stage.is_finite()) {
                return Err(Error::InvalidConfig("min first stage must be nonnegative".into()));
            }
        }

        let dens = if self.scheme.estimand == Estimand::Unweighted {
            // unit weights only need the running-variable density
            DensityEstimates {
                f_z: None,
                f_x_at_c: crate::density::f_x_at_cutoff(ds, self.kernel, self.bw.h2)?,
                f_above: None,
                f_below: None,
                bandwidths: self.bw,
                pretreatment: self.scheme.pretreatment,
                z_scales: vec![],
            }
        } else {
            fit_density_estimates(ds, self.kernel, &self.bw, self.scheme.pretreatment)?
        };
        let weights = build_weights(ds, &self.scheme, &dens)?;

        let above_idx = ds.side_indices(Side::Above);
        let below_idx = ds.side_indices(Side::Below);
        let gather = |idx: &[usize], v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        let xa = gather(&above_idx, ds.x());
        let xb = gather(&below_idx, ds.x());
        let c = ds.cutoff();

        let fit_pair = |ya: &[f64], yb: &[f64]| -> Result<(SideFit, SideFit)> {
            let above = wll_side_fit(&xa, ya, &weights.above, self.kernel, self.bw.h, c, Side::Above)?;
            let below = wll_side_fit(&xb, yb, &weights.below, self.kernel, self.bw.h, c, Side::Below)?;
            Ok((above, below))
        };

        let ya = gather(&above_idx, ds.y());
        let yb = gather(&below_idx, ds.y());
        let (above, below) = fit_pair(&ya, &yb)?;
        let jump_y = above.intercept - below.intercept;

        let (effect, first_stage) = match &self.fuzzy {
            None => (jump_y, None),
            Some(opts) => {
                let ta: Vec<f64> = above_idx.iter().map(|&i| ds.t()[i] as f64).collect();
                let tb: Vec<f64> = below_idx.iter().map(|&i| ds.t()[i] as f64).collect();
                let (fa, fb) = fit_pair(&ta, &tb)?;
                let denom = fa.intercept - fb.intercept;
                if denom.abs() < opts.min_first_stage {
                    return Err(Error::WeakFirstStage {
                        value: denom,
                        threshold: opts.min_first_stage,
                    });
                }
                (jump_y / denom, Some(denom))
            }
        };

        let point = PointEstimate {
            effect,
            above,
            below,
            first_stage,
            clip_above: weights.above_clip_frac,
            clip_below: weights.below_clip_frac,
        };
        Ok((point, PipelineArtifacts { dens, weights, above_idx, below_idx }))
    }
}

/// Point estimate with its side fits.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PointEstimate {
    pub effect: f64,
    pub above: SideFit,
    pub below: SideFit,
    /// Estimated treatment-probability jump (fuzzy only).
    pub first_stage: Option<f64>,
    pub clip_above: f64,
    pub clip_below: f64,
}

/// Fitted intermediates kept for plug-in inference.
pub struct PipelineArtifacts {
    pub(crate) dens: DensityEstimates,
    pub(crate) weights: ObservationWeights,
    pub(crate) above_idx: Vec<usize>,
    pub(crate) below_idx: Vec<usize>,
}

impl PipelineArtifacts {
    pub fn densities(&self) -> &DensityEstimates {
        &self.dens
    }

    pub fn weights(&self) -> &ObservationWeights {
        &self.weights
    }
}

/// Sharp-design estimate with inference attached: densities, weights, the
/// two side fits, and the chosen standard error.
pub fn estimate_sharp(
    ds: &Dataset,
    scheme: WeightScheme,
    kernel: Kernel,
    bw: BandwidthSet,
    inf: &crate::inference::InferenceConfig,
) -> Result<EstimateResult> {
    finish_estimate(ds, &EstimateConfig::sharp(scheme, kernel, bw), inf)
}

/// Fuzzy-design ratio estimate: the outcome jump divided by the
/// treatment-probability jump, both from the same weighted pipeline.
/// Inference is bootstrap-only.
pub fn estimate_fuzzy(
    ds: &Dataset,
    scheme: WeightScheme,
    kernel: Kernel,
    bw: BandwidthSet,
    opts: FuzzyOptions,
    inf: &crate::inference::InferenceConfig,
) -> Result<EstimateResult> {
    finish_estimate(ds, &EstimateConfig::fuzzy(scheme, kernel, bw, opts), inf)
}

fn finish_estimate(
    ds: &Dataset,
    cfg: &EstimateConfig,
    inf: &crate::inference::InferenceConfig,
) -> Result<EstimateResult> {
    use crate::inference::{bootstrap_around, normal_quantile, plugin_se, InferenceMethod};
    inf.validate()?;
    let (point, artifacts) = cfg.pipeline(ds)?;
    let (se, ci, failures, tag) = match inf.method {
        InferenceMethod::Bootstrap => {
            let b = bootstrap_around(ds, cfg, inf, point.effect)?;
            (b.se, b.ci, Some(b.failed), "bootstrap")
        }
        InferenceMethod::Plugin => {
            let se = plugin_se(ds, cfg, &point, &artifacts)?;
            let z = normal_quantile(0.5 * (1.0 + inf.level));
            (se, (point.effect - z * se, point.effect + z * se), None, "plugin")
        }
    };
    Ok(EstimateResult {
        effect: point.effect,
        se,
        ci_lower: ci.0,
        ci_upper: ci.1,
        level: inf.level,
        above: point.above,
        below: point.below,
        bandwidths: cfg.bw,
        estimand: cfg.scheme.estimand,
        kernel: cfg.kernel,
        pretreatment: cfg.scheme.pretreatment,
        fuzzy: cfg.fuzzy.is_some(),
        first_stage: point.first_stage,
        n: ds.n(),
        n_above: artifacts.above_idx.len(),
        n_below: artifacts.below_idx.len(),
        clip_above: point.clip_above,
        clip_below: point.clip_below,
        inference: tag,
        bootstrap_failures: failures,
    })
}

/// A point estimate with inference attached.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateResult {
    pub effect: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub level: f64,
    pub above: SideFit,
    pub below: SideFit,
    pub bandwidths: BandwidthSet,
    pub estimand: Estimand,
    pub kernel: Kernel,
    pub pretreatment: bool,
    pub fuzzy: bool,
    pub first_stage: Option<f64>,
    pub n: usize,
    pub n_above: usize,
    pub n_below: usize,
    pub clip_above: f64,
    pub clip_below: f64,
    pub inference: &'static str,
    pub bootstrap_failures: Option<usize>,
}
