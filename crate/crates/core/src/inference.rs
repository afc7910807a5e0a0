//! Bootstrap and plug-in inference for the cutoff-jump estimators.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::ContinuousCDF;

use crate::bandwidth::{couple_bandwidths, select_bandwidth_cv};
use crate::dataset::{Dataset, Side};
use crate::density::ProductKde;
use crate::error::{Error, Result};
use crate::estimators::{EstimateConfig, PipelineArtifacts, PointEstimate};
use crate::kernels::Kernel;
use crate::seed::{derive_seed, splitmix64, BOOTSTRAP_DOMAIN};
use crate::weights::Estimand;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InferenceMethod {
    Bootstrap,
    Plugin,
}

/// Inference settings.
///
/// Bandwidths are frozen across bootstrap replicates by default, matching
/// how the simulations fix them per design; set `refit_cv` to re-select on
/// every replicate.
#[derive(Debug, Clone)]
pub struct InferenceConfig {
    pub method: InferenceMethod,
    /// Bootstrap replication count.
    pub b: usize,
    pub seed: u64,
    /// Two-sided coverage level of the interval.
    pub level: f64,
    /// Re-run bandwidth cross-validation on this grid inside every
    /// bootstrap replicate.
    pub refit_cv: Option<Vec<f64>>,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            method: InferenceMethod::Bootstrap,
            b: 500,
            seed: 0,
            level: 0.95,
            refit_cv: None,
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidConfig(format!("level must lie in (0,1), got {}", self.level)));
        }
        if self.method == InferenceMethod::Bootstrap && self.b < 50 {
            return Err(Error::InvalidConfig(format!(
                "bootstrap needs at least 50 replicates, got {}",
                self.b
            )));
        }
        Ok(())
    }
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    statrs::distribution::Normal::standard().inverse_cdf(p)
}

/// 1 iff `truth` lies in the closed interval.
pub fn coverage_indicator(ci: (f64, f64), truth: f64) -> u8 {
    u8::from(truth >= ci.0 && truth <= ci.1)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BootstrapResult {
    pub se: f64,
    pub ci: (f64, f64),
    /// Replicates dropped because the pipeline failed on the resample.
    pub failed: usize,
}

/// Nonparametric pairs bootstrap around an already-computed point estimate:
/// resample rows with replacement, rerun the entire pipeline per replicate,
/// take the standard deviation of the replicate effects.
pub(crate) fn bootstrap_around(
    ds: &Dataset,
    cfg: &EstimateConfig,
    inf: &InferenceConfig,
    center: f64,
) -> Result<BootstrapResult> {
    inf.validate()?;
    let n = ds.n();
    let master = splitmix64(inf.seed ^ BOOTSTRAP_DOMAIN);
    let taus: Vec<Option<f64>> = (0..inf.b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(master, rep as u64));
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let rs = ds.resample(&idx);
            let mut cfg_b = cfg.clone();
            if let Some(grid) = &inf.refit_cv {
                let h = select_bandwidth_cv(&rs, cfg.kernel, grid).ok()?;
                cfg_b.bw = couple_bandwidths(h, cfg.scheme.pretreatment, rs.x_scale());
            }
            cfg_b.point(&rs).ok().map(|p| p.effect)
        })
        .collect();

    let ok: Vec<f64> = taus.iter().flatten().copied().collect();
    let failed = inf.b - ok.len();
    if failed * 10 > inf.b {
        return Err(Error::ReplicateFailures { failed, total: inf.b });
    }
    let mean = ok.iter().sum::<f64>() / ok.len() as f64;
    let var = ok.iter().map(|&t| (t - mean) * (t - mean)).sum::<f64>() / (ok.len() - 1) as f64;
    let se = var.sqrt();
    let z = normal_quantile(0.5 * (1.0 + inf.level));
    Ok(BootstrapResult { se, ci: (center - z * se, center + z * se), failed })
}

/// Bootstrap standard error and interval for the configured estimator.
pub fn bootstrap_se(ds: &Dataset, cfg: &EstimateConfig, inf: &InferenceConfig) -> Result<BootstrapResult> {
    let point = cfg.point(ds)?;
    bootstrap_around(ds, cfg, inf, point.effect)
}

/// Variance of the jump in the general (one-sided density) regime:
/// `cv * w_sum / (n h^2)`.
pub fn plugin_variance_general(cv: f64, w_sum: f64, n: usize, h: f64) -> f64 {
    cv * w_sum / (n as f64 * h * h)
}

/// Variance of the jump with pre-treatment covariates (both sides):
/// `2 * cv * sigma2 * integral / (n h)`.
pub fn plugin_variance_pretreatment(cv: f64, sigma2: f64, integral: f64, n: usize, h: f64) -> f64 {
    2.0 * cv * sigma2 * integral / (n as f64 * h)
}

/// Variance of the unweighted jump: `cv * (s2_above + s2_below) / (n h fx)`.
pub fn plugin_variance_classical(cv: f64, s2_above: f64, s2_below: f64, n: usize, h: f64, fx: f64) -> f64 {
    cv * (s2_above + s2_below) / (n as f64 * h * fx)
}

/// Number of covariate quantile bins used for the auxiliary conditional-
/// mean fits inside the plug-in variance.
pub const PLUGIN_BINS: usize = 10;

/// Plug-in standard error from the asymptotic-variance formulas.
///
/// Supported configurations: the unweighted estimand (classical boundary
/// variance), and the whole-population weighting in either density regime.
/// The other weightings ship without an asymptotic variance; use the
/// bootstrap there. The population residual `d(z) = m(c, z) - intercept`
/// has no canonical estimator; here `m(c, z)` is an unweighted one-sided
/// local linear fit within covariate quantile bins, a documented choice.
pub fn plugin_se(
    ds: &Dataset,
    cfg: &EstimateConfig,
    point: &PointEstimate,
    artifacts: &PipelineArtifacts,
) -> Result<f64> {
    if cfg.fuzzy.is_some() {
        return Err(Error::UnsupportedInference(
            "fuzzy inference is bootstrap-only; no asymptotic variance is derived",
        ));
    }
    let cv = cfg.kernel.moments().cv;
    let n = ds.n();
    let h = cfg.bw.h;
    let clip = cfg.scheme.clip_epsilon;

    match (cfg.scheme.estimand, cfg.scheme.pretreatment) {
        (Estimand::Unweighted, _) => {
            let fx = artifacts.dens.f_x_at_c;
            if !(fx > 0.0) {
                return Err(Error::UnsupportedInference(
                    "running-variable density at the cutoff is zero",
                ));
            }
            let s2a = side_residual_variance(ds, &artifacts.above_idx, &point.above, cfg.kernel, h)?;
            let s2b = side_residual_variance(ds, &artifacts.below_idx, &point.below, cfg.kernel, h)?;
            Ok(plugin_variance_classical(cv, s2a, s2b, n, h, fx).sqrt())
        }
        (Estimand::W1, true) => {
            let sigma2 = pooled_binned_residual_variance(ds, artifacts, cfg)?;
            let f_z = artifacts.dens.marginal()?;
            let pooled = artifacts.dens.joint(Side::Above)?; // same estimate on both sides
            let mut ratios: Vec<f64> = (0..n)
                .map(|i| pooled.eval(&ds.covariate_row(i)))
                .collect();
            let max = ratios.iter().cloned().fold(0.0_f64, f64::max);
            if !(max > 0.0) {
                return Err(Error::UnsupportedInference("pooled joint density has no support"));
            }
            let floor = clip * max;
            let mut acc = 0.0;
            for (i, d) in ratios.iter_mut().enumerate() {
                let fz = f_z.eval(&ds.covariate_row(i));
                acc += fz / d.max(floor);
            }
            let integral = acc / n as f64;
            Ok(plugin_variance_pretreatment(cv, sigma2, integral, n, h).sqrt())
        }
        (Estimand::W1, false) => {
            let mut w_sum = 0.0;
            for (side, idx, fit) in [
                (Side::Above, &artifacts.above_idx, &point.above),
                (Side::Below, &artifacts.below_idx, &point.below),
            ] {
                w_sum += side_variance_component(ds, idx, fit, side, cfg, artifacts, clip)?;
            }
            Ok(plugin_variance_general(cv, w_sum, n, h).sqrt())
        }
        _ => Err(Error::UnsupportedInference(
            "plug-in variance covers the unweighted and whole-population estimands; use bootstrap",
        )),
    }
}

/// Kernel-weighted residual variance around a side's local linear fit.
fn side_residual_variance(
    ds: &Dataset,
    idx: &[usize],
    fit: &crate::estimators::SideFit,
    kernel: Kernel,
    h: f64,
) -> Result<f64> {
    let c = ds.cutoff();
    let mut num = 0.0;
    let mut den = 0.0;
    for &i in idx {
        let kw = kernel.eval((ds.x()[i] - c) / h);
        if kw <= 0.0 {
            continue;
        }
        let r = ds.y()[i] - fit.intercept - fit.slope * (ds.x()[i] - c);
        num += kw * r * r;
        den += kw;
    }
    if den <= 0.0 {
        return Err(Error::UnsupportedInference("no kernel support for residual variance"));
    }
    Ok(num / den)
}

/// Per-observation fitted cutoff means from unweighted one-sided local
/// linear fits within covariate quantile bins. Returns one `m(c, bin(z_i))`
/// per side observation. The bin count adapts down when kernel support is
/// thin; with no usable bins the error propagates.
fn binned_cutoff_means(
    ds: &Dataset,
    idx: &[usize],
    side: Side,
    kernel: Kernel,
    h: f64,
    outcome: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let c = ds.cutoff();
    // bin on the first covariate; the auxiliary fit only needs a coarse
    // partition of covariate space
    let z1: Vec<f64> = idx.iter().map(|&i| ds.covariate(0)[i]).collect();
    let eff: Vec<usize> = (0..idx.len())
        .filter(|&p| kernel.eval((ds.x()[idx[p]] - c) / h) > 0.0)
        .collect();
    if eff.len() < 3 {
        return Err(Error::InsufficientSupport { side: side.name(), n_effective: eff.len() });
    }
    let mut nq = PLUGIN_BINS.min(eff.len() / 3).max(1);

    'retry: loop {
        let mut zs: Vec<f64> = eff.iter().map(|&p| z1[p]).collect();
        zs.sort_by(|a, b| a.total_cmp(b));
        let edges: Vec<f64> = (0..=nq)
            .map(|q| zs[((q * (zs.len() - 1)) as f64 / nq as f64).round() as usize])
            .collect();
        let bin_of = |z: f64| -> usize {
            let mut b = edges[1..nq].partition_point(|&e| e < z);
            if b >= nq {
                b = nq - 1;
            }
            b
        };
        let mut fits: Vec<Option<(f64, f64)>> = vec![None; nq];
        for b in 0..nq {
            let members: Vec<usize> = eff
                .iter()
                .copied()
                .filter(|&p| bin_of(z1[p]) == b)
                .collect();
            let xs: Vec<f64> = members.iter().map(|&p| ds.x()[idx[p]]).collect();
            let ys: Vec<f64> = members.iter().map(|&p| outcome[p]).collect();
            let ones = vec![1.0; xs.len()];
            match crate::estimators::wll_side_fit(&xs, &ys, &ones, kernel, h, c, side) {
                Ok(f) => fits[b] = Some((f.intercept, f.slope)),
                Err(_) if nq > 1 => {
                    nq = 1;
                    continue 'retry;
                }
                Err(e) => return Err(e),
            }
        }
        let m_at_c: Vec<f64> = z1
            .iter()
            .map(|&z| fits[bin_of(z)].map(|(a, _)| a).unwrap_or(f64::NAN))
            .collect();
        let slopes: Vec<f64> = z1
            .iter()
            .map(|&z| fits[bin_of(z)].map(|(_, b)| b).unwrap_or(f64::NAN))
            .collect();
        return Ok((m_at_c, slopes));
    }
}

/// Pooled homoscedastic residual variance around the binned auxiliary fits.
fn pooled_binned_residual_variance(
    ds: &Dataset,
    artifacts: &PipelineArtifacts,
    cfg: &EstimateConfig,
) -> Result<f64> {
    let c = ds.cutoff();
    let h = cfg.bw.h;
    let mut num = 0.0;
    let mut den = 0.0;
    for (side, idx) in [(Side::Above, &artifacts.above_idx), (Side::Below, &artifacts.below_idx)] {
        let ys: Vec<f64> = idx.iter().map(|&i| ds.y()[i]).collect();
        let (m_at_c, slopes) = binned_cutoff_means(ds, idx, side, cfg.kernel, h, &ys)?;
        for (p, &i) in idx.iter().enumerate() {
            let kw = cfg.kernel.eval((ds.x()[i] - c) / h);
            if kw <= 0.0 || !m_at_c[p].is_finite() {
                continue;
            }
            let r = ys[p] - m_at_c[p] - slopes[p] * (ds.x()[i] - c);
            num += kw * r * r;
            den += kw;
        }
    }
    if den <= 0.0 {
        return Err(Error::UnsupportedInference("no kernel support for residual variance"));
    }
    Ok(num / den)
}

/// One side's contribution to the general-regime variance:
/// the side-sample mean of `(f_Z / f_side)(z) * d(z)^2`, importance-
/// reweighted from the side's covariate distribution to the marginal.
fn side_variance_component(
    ds: &Dataset,
    idx: &[usize],
    fit: &crate::estimators::SideFit,
    side: Side,
    cfg: &EstimateConfig,
    artifacts: &PipelineArtifacts,
    clip: f64,
) -> Result<f64> {
    let ys: Vec<f64> = idx.iter().map(|&i| ds.y()[i]).collect();
    let (m_at_c, _) = binned_cutoff_means(ds, idx, side, cfg.kernel, cfg.bw.h, &ys)?;
    let f_z = artifacts.dens.marginal()?;
    let joint = artifacts.dens.joint(side)?;

    let rows: Vec<Vec<f64>> = idx.iter().map(|&i| ds.covariate_row(i)).collect();
    let ft: Vec<f64> = rows.iter().map(|z| joint.eval(z)).collect();
    let max = ft.iter().cloned().fold(0.0_f64, f64::max);
    if !(max > 0.0) {
        return Err(Error::InsufficientSupport { side: side.name(), n_effective: 0 });
    }
    let floor = clip * max;

    // same-side covariate marginal for the importance ratio to f_Z
    let side_kde = ProductKde::from_rows(
        rows.clone(),
        cfg.kernel,
        cfg.bw.h2,
        artifacts.dens.z_scales.clone(),
    )?;

    let mut num = 0.0;
    let mut den = 0.0;
    for (p, z) in rows.iter().enumerate() {
        if !m_at_c[p].is_finite() {
            continue;
        }
        let fz = f_z.eval(z);
        let d = m_at_c[p] - fit.intercept;
        let g = fz / ft[p].max(floor) * d * d;
        let rho = fz / side_kde.eval(z).max(f64::MIN_POSITIVE);
        num += rho * g;
        den += rho;
    }
    if den <= 0.0 {
        return Err(Error::InsufficientSupport { side: side.name(), n_effective: 0 });
    }
    Ok(num / den)
}
