//! Seeded data-generating processes and the Monte Carlo harness comparing
//! the unweighted cutoff estimator with the weighted local linear one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::bandwidth::{default_grid, select_bandwidth_cv, BandwidthSet};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimators::EstimateConfig;
use crate::inference::{
    bootstrap_around, coverage_indicator, normal_quantile, plugin_se, InferenceConfig,
    InferenceMethod,
};
use crate::kernels::Kernel;
use crate::seed::derive_seed;
use crate::weights::{Estimand, WeightScheme, DEFAULT_CLIP_EPSILON};

/// Simulated design.
///
/// * `S1`: covariate distribution continuous at the cutoff; jump in the
///   outcome intercept of 1. The covariate is pre-treatment.
/// * `S2`: covariate mean jumps by `gamma` at the cutoff, contaminating the
///   unweighted estimand (`2 + gamma`) while the direct effect stays 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Setting {
    S1 { beta: f64 },
    S2 { gamma: f64 },
}

impl Setting {
    /// The direct effect, which is what the reports measure bias against.
    pub fn truth(self) -> f64 {
        match self {
            Setting::S1 { .. } => 1.0,
            Setting::S2 { .. } => 2.0,
        }
    }

    /// S1 draws the covariate independently of the cutoff side, so it is
    /// genuinely pre-treatment; S2's covariate responds to the cutoff.
    pub fn pretreatment(self) -> bool {
        matches!(self, Setting::S1 { .. })
    }

    pub fn name(self) -> &'static str {
        match self {
            Setting::S1 { .. } => "s1",
            Setting::S2 { .. } => "s2",
        }
    }

    pub fn generate(self, n: usize, seed: u64) -> Dataset {
        match self {
            Setting::S1 { beta } => generate_setting1(n, beta, seed),
            Setting::S2 { gamma } => generate_setting2(n, gamma, seed),
        }
    }
}

fn draws(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// First design: `y = 1 + x + beta z + e + 1(x > 0)`, all inputs standard
/// normal, cutoff 0. Both the unweighted and the weighted estimand equal 1.
pub fn generate_setting1(n: usize, beta: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = draws(&mut rng, n);
    let z = draws(&mut rng, n);
    let eps = draws(&mut rng, n);
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let t = f64::from(x[i] > 0.0);
            1.0 + x[i] + beta * z[i] + eps[i] + t
        })
        .collect();
    Dataset::new_sharp(y, x, vec![z], 0.0).expect("generated data is valid")
}

/// Second design: the covariate jumps at the cutoff,
/// `z = gamma 1(x > 0) + z*`, and
/// `y(1) = 3 + x + z + e1`, `y(0) = 1 + x + z + e0`. The direct effect is 2;
/// the unweighted estimand is `2 + gamma`.
pub fn generate_setting2(n: usize, gamma: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = draws(&mut rng, n);
    let zstar = draws(&mut rng, n);
    let e1 = draws(&mut rng, n);
    let e0 = draws(&mut rng, n);
    let mut z = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let above = x[i] > 0.0;
        let zi = if above { gamma + zstar[i] } else { zstar[i] };
        z.push(zi);
        y.push(if above { 3.0 + x[i] + zi + e1[i] } else { 1.0 + x[i] + zi + e0[i] });
    }
    Dataset::new_sharp(y, x, vec![z], 0.0).expect("generated data is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BandwidthPolicy {
    /// Cross-validate on the first replicate, then freeze.
    CvOnce,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum McInference {
    Plugin,
    Bootstrap { b: usize },
}

/// Monte Carlo run description.
#[derive(Debug, Clone, Serialize)]
pub struct McConfig {
    pub setting: Setting,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub estimators: Vec<Estimand>,
    pub bandwidth: BandwidthPolicy,
    pub kernel: Kernel,
    pub inference: McInference,
    pub level: f64,
    pub clip_epsilon: f64,
}

impl McConfig {
    pub fn new(setting: Setting, n: usize, reps: usize, seed: u64) -> McConfig {
        McConfig {
            setting,
            n,
            reps,
            seed,
            estimators: vec![Estimand::Unweighted, Estimand::W1],
            bandwidth: BandwidthPolicy::CvOnce,
            kernel: Kernel::Triangular,
            inference: McInference::Plugin,
            level: 0.95,
            clip_epsilon: DEFAULT_CLIP_EPSILON,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.reps < 1 {
            return Err(Error::InvalidConfig("need at least one replicate".into()));
        }
        if self.n < 100 {
            return Err(Error::InvalidConfig(format!("need n >= 100, got {}", self.n)));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidConfig("no estimators configured".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidConfig("level must lie in (0,1)".into()));
        }
        if let McInference::Bootstrap { b } = self.inference {
            if b < 50 {
                return Err(Error::InvalidConfig("bootstrap needs at least 50 replicates".into()));
            }
        }
        Ok(())
    }

    /// The estimator pipelines share one bandwidth for the regression and
    /// both density estimators, mirroring the simulation protocol of using
    /// the cross-validated regression bandwidth everywhere.
    fn resolve_bandwidth(&self) -> Result<f64> {
        match self.bandwidth {
            BandwidthPolicy::Fixed(h) => {
                if !(h.is_finite() && h > 0.0) {
                    return Err(Error::InvalidConfig(format!("fixed bandwidth must be positive, got {h}")));
                }
                Ok(h)
            }
            BandwidthPolicy::CvOnce => {
                let first = self.setting.generate(self.n, derive_seed(self.seed, 0));
                let grid = default_grid(&first);
                select_bandwidth_cv(&first, self.kernel, &grid)
            }
        }
    }
}

/// Summary for one estimator across replicates.
#[derive(Debug, Clone, Serialize)]
pub struct McEstimatorReport {
    pub estimand: Estimand,
    pub bias: f64,
    pub variance: f64,
    pub mse: f64,
    pub coverage: f64,
    pub ci_length: f64,
    pub failures: usize,
}

/// Monte Carlo summary with enough configuration echoed to rerun it.
#[derive(Debug, Clone, Serialize)]
pub struct McReport {
    pub truth: f64,
    pub bandwidth_used: f64,
    pub estimators: Vec<McEstimatorReport>,
    pub config: McConfig,
}

/// Neumaier compensated sum; aggregation stays order-exact regardless of
/// magnitude cancellation.
fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

struct RepOutcome {
    effect: f64,
    ci: (f64, f64),
}

fn estimate_replicate(
    ds: &Dataset,
    cfg: &EstimateConfig,
    inference: McInference,
    level: f64,
    boot_seed: u64,
) -> Result<RepOutcome> {
    match inference {
        McInference::Plugin => {
            let (point, artifacts) = cfg.pipeline(ds)?;
            let se = plugin_se(ds, cfg, &point, &artifacts)?;
            let z = normal_quantile(0.5 * (1.0 + level));
            Ok(RepOutcome {
                effect: point.effect,
                ci: (point.effect - z * se, point.effect + z * se),
            })
        }
        McInference::Bootstrap { b } => {
            let point = cfg.point(ds)?;
            let inf = InferenceConfig {
                method: InferenceMethod::Bootstrap,
                b,
                seed: boot_seed,
                level,
                refit_cv: None,
            };
            let out = bootstrap_around(ds, cfg, &inf, point.effect)?;
            Ok(RepOutcome { effect: point.effect, ci: out.ci })
        }
    }
}

/// Run the Monte Carlo: independent replicate datasets from derived seeds,
/// every configured estimator on each, aggregated bias / variance / MSE /
/// coverage / interval length against the direct effect.
pub fn run_monte_carlo(cfg: &McConfig) -> Result<McReport> {
    cfg.validate()?;
    let truth = cfg.setting.truth();
    let pretreatment = cfg.setting.pretreatment();
    let h = cfg.resolve_bandwidth()?;
    let bw = BandwidthSet::uniform(h);

    let configs: Vec<EstimateConfig> = cfg
        .estimators
        .iter()
        .map(|&est| {
            let mut scheme = WeightScheme::new(est).pretreatment(est.needs_covariates() && pretreatment);
            scheme.clip_epsilon = cfg.clip_epsilon;
            EstimateConfig::sharp(scheme, cfg.kernel, bw)
        })
        .collect();

    // outcome[rep][estimator]
    let outcomes: Vec<Vec<Option<RepOutcome>>> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = derive_seed(cfg.seed, rep as u64);
            let ds = cfg.setting.generate(cfg.n, rep_seed);
            configs
                .iter()
                .enumerate()
                .map(|(e_idx, ecfg)| {
                    let boot_seed = derive_seed(rep_seed, 1000 + e_idx as u64);
                    estimate_replicate(&ds, ecfg, cfg.inference, cfg.level, boot_seed).ok()
                })
                .collect()
        })
        .collect();

    let mut reports = Vec::with_capacity(configs.len());
    for (e_idx, &est) in cfg.estimators.iter().enumerate() {
        let per_rep: Vec<&RepOutcome> =
            outcomes.iter().filter_map(|row| row[e_idx].as_ref()).collect();
        let failures = cfg.reps - per_rep.len();
        if failures * 10 > cfg.reps {
            return Err(Error::ReplicateFailures { failed: failures, total: cfg.reps });
        }
        let m = per_rep.len() as f64;
        let mean = compensated_sum(per_rep.iter().map(|r| r.effect)) / m;
        let bias = mean - truth;
        let variance =
            compensated_sum(per_rep.iter().map(|r| (r.effect - mean) * (r.effect - mean))) / m;
        let mse =
            compensated_sum(per_rep.iter().map(|r| (r.effect - truth) * (r.effect - truth))) / m;
        let coverage =
            compensated_sum(per_rep.iter().map(|r| coverage_indicator(r.ci, truth) as f64)) / m;
        let ci_length = compensated_sum(per_rep.iter().map(|r| r.ci.1 - r.ci.0)) / m;
        reports.push(McEstimatorReport {
            estimand: est,
            bias,
            variance,
            mse,
            coverage,
            ci_length,
            failures,
        });
    }
    Ok(McReport { truth, bandwidth_used: h, estimators: reports, config: cfg.clone() })
}

/// One row of the bandwidth sweep.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepRow {
    pub h: f64,
    pub mse_rd: f64,
    pub mse_wll: f64,
}

/// Monte Carlo mean squared error of the unweighted and whole-population
/// estimators across a shared bandwidth grid. The same replicate datasets
/// are reused at every grid point.
pub fn bandwidth_sweep(cfg: &McConfig, grid: &[f64]) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    if grid.is_empty() || grid.iter().any(|&h| !(h.is_finite() && h > 0.0)) {
        return Err(Error::InvalidConfig("sweep grid must be nonempty and positive".into()));
    }
    let truth = cfg.setting.truth();
    let pretreatment = cfg.setting.pretreatment();

    let datasets: Vec<Dataset> = (0..cfg.reps)
        .map(|rep| cfg.setting.generate(cfg.n, derive_seed(cfg.seed, rep as u64)))
        .collect();

    let mut rows = Vec::with_capacity(grid.len());
    for &h in grid {
        let bw = BandwidthSet::uniform(h);
        let mut scheme_w1 = WeightScheme::new(Estimand::W1).pretreatment(pretreatment);
        scheme_w1.clip_epsilon = cfg.clip_epsilon;
        let rd_cfg = EstimateConfig::sharp(
            WeightScheme::new(Estimand::Unweighted),
            cfg.kernel,
            bw,
        );
        let wll_cfg = EstimateConfig::sharp(scheme_w1, cfg.kernel, bw);

        let errs: Vec<(Option<f64>, Option<f64>)> = datasets
            .par_iter()
            .map(|ds| {
                let sq = |p: crate::estimators::PointEstimate| {
                    (p.effect - truth) * (p.effect - truth)
                };
                (rd_cfg.point(ds).ok().map(sq), wll_cfg.point(ds).ok().map(sq))
            })
            .collect();

        let collect_mse = |pick: &dyn Fn(&(Option<f64>, Option<f64>)) -> Option<f64>| -> Result<f64> {
            let ok: Vec<f64> = errs.iter().filter_map(pick).collect();
            let failed = cfg.reps - ok.len();
            if failed * 10 > cfg.reps {
                return Err(Error::ReplicateFailures { failed, total: cfg.reps });
            }
            Ok(compensated_sum(ok.iter().copied()) / ok.len() as f64)
        };
        rows.push(SweepRow {
            h,
            mse_rd: collect_mse(&|e| e.0)?,
            mse_wll: collect_mse(&|e| e.1)?,
        });
    }
    Ok(rows)
}
