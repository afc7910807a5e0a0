//! Acceptance suite: one test per release criterion, each printing a
//! pass/fail line with the measured quantities. Tolerances are pinned in
//! the assertions. The companion criterion on byte-identical CLI output
//! lives in the command-line crate's acceptance tests.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rdwate::bandwidth::{couple_bandwidths, BandwidthSet};
use rdwate::dataset::{Dataset, Side};
use rdwate::diagnostics::covariate_jump_test;
use rdwate::estimators::{wll_side_fit, EstimateConfig, FuzzyOptions};
use rdwate::kernels::{cv_constant, Kernel};
use rdwate::seed::splitmix64;
use rdwate::simulation::{
    bandwidth_sweep, generate_setting1, generate_setting2, run_monte_carlo, BandwidthPolicy,
    McConfig, McInference, Setting,
};
use rdwate::weights::{Estimand, WeightScheme};

/// Deterministic uniform draws on [0, 1) for oracle-style test data.
struct MixRng(u64);

impl MixRng {
    fn next(&mut self) -> f64 {
        self.0 = splitmix64(self.0);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next()
    }
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

#[test]
fn criterion_1_kernel_constants() {
    let start = Instant::now();
    for (kernel, expected) in [(Kernel::Uniform, 4.0), (Kernel::Triangular, 4.8)] {
        let m = kernel.moments();
        assert!((m.cv - expected).abs() < 1e-12, "{kernel:?} cv = {}", m.cv);
        // independent quadrature oracle
        let mut kappa = [0.0; 3];
        let mut kappa2 = [0.0; 3];
        for q in 0..3 {
            kappa[q] = simpson(|u| kernel.eval(u) * u.powi(q as i32), 0.0, 1.0, 4096);
            kappa2[q] = simpson(|u| kernel.eval(u).powi(2) * u.powi(q as i32), 0.0, 1.0, 4096);
        }
        let oracle = cv_constant(&kappa, &kappa2).unwrap();
        assert!((m.cv - oracle).abs() < 1e-8, "{kernel:?}: cv {} vs quadrature {oracle}", m.cv);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("acceptance criterion 1 (kernel variance constants, quadrature oracle): PASS ({elapsed:?})");
}

#[test]
fn criterion_2_wls_exactness() {
    let mut rng = MixRng(0x5EED_0002);
    for case in 0..50 {
        let n = 10 + (rng.next() * 40.0) as usize;
        let alpha = rng.range(-5.0, 5.0);
        let beta = rng.range(-4.0, 4.0);
        let x: Vec<f64> = (0..n).map(|_| rng.range(0.01, 0.95)).collect();
        let y: Vec<f64> = x.iter().map(|&v| alpha + beta * v).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.range(0.05, 8.0)).collect();
        let fit = wll_side_fit(&x, &y, &w, Kernel::Triangular, 1.0, 0.0, Side::Above).unwrap();
        assert!((fit.intercept - alpha).abs() < 1e-9, "case {case}: intercept {}", fit.intercept);
        assert!((fit.slope - beta).abs() < 1e-9, "case {case}: slope {}", fit.slope);
    }
    println!("acceptance criterion 2 (weighted least squares exactness on linear data): PASS");
}

struct TwoSided {
    xa: Vec<f64>,
    ya: Vec<f64>,
    wa: Vec<f64>,
    xb: Vec<f64>,
    yb: Vec<f64>,
    wb: Vec<f64>,
}

fn random_two_sided(rng: &mut MixRng) -> TwoSided {
    let n = 12 + (rng.next() * 30.0) as usize;
    let mut out = TwoSided {
        xa: vec![],
        ya: vec![],
        wa: vec![],
        xb: vec![],
        yb: vec![],
        wb: vec![],
    };
    for _ in 0..n {
        out.xa.push(rng.range(0.01, 0.9));
        out.ya.push(rng.range(-2.0, 2.0));
        out.wa.push(rng.range(0.1, 5.0));
        out.xb.push(rng.range(-0.9, -0.01));
        out.yb.push(rng.range(-2.0, 2.0));
        out.wb.push(rng.range(0.1, 5.0));
    }
    out
}

#[test]
fn criterion_3_weight_scale_invariance() {
    let mut rng = MixRng(0x5EED_0003);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let d = random_two_sided(&mut rng);
        let tau = |wa: &[f64], wb: &[f64]| -> f64 {
            let fa = wll_side_fit(&d.xa, &d.ya, wa, Kernel::Triangular, 1.0, 0.0, Side::Above).unwrap();
            let fb = wll_side_fit(&d.xb, &d.yb, wb, Kernel::Triangular, 1.0, 0.0, Side::Below).unwrap();
            fa.intercept - fb.intercept
        };
        let base = tau(&d.wa, &d.wb);
        let scaled_a: Vec<f64> = d.wa.iter().map(|v| v * 1000.0).collect();
        let scaled_b: Vec<f64> = d.wb.iter().map(|v| v * 1000.0).collect();
        worst = worst.max((tau(&scaled_a, &d.wb) - base).abs());
        worst = worst.max((tau(&d.wa, &scaled_b) - base).abs());
    }
    assert!(worst < 1e-10, "worst effect shift {worst}");
    println!("acceptance criterion 3 (per-side weight scale invariance, worst {worst:.2e}): PASS");
}

/// Textbook local linear cutoff estimator, written independently of the
/// library pipeline: per side, kernel-weighted least squares of the
/// outcome on an intercept and the centered running variable.
fn standard_rd_estimate(ds: &Dataset, kernel: Kernel, h: f64) -> f64 {
    let c = ds.cutoff();
    let intercept = |above: bool| -> f64 {
        let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..ds.n() {
            let on_side = if above { ds.x()[i] > c } else { ds.x()[i] <= c };
            if !on_side {
                continue;
            }
            let kw = kernel.eval((ds.x()[i] - c) / h);
            if kw <= 0.0 {
                continue;
            }
            let d = ds.x()[i] - c;
            s0 += kw;
            s1 += kw * d;
            s2 += kw * d * d;
            t0 += kw * ds.y()[i];
            t1 += kw * d * ds.y()[i];
        }
        let det = s0 * s2 - s1 * s1;
        (s2 * t0 - s1 * t1) / det
    };
    intercept(true) - intercept(false)
}

#[test]
fn criterion_4_unweighted_reduction_bit_for_bit() {
    let mut rng = MixRng(0x5EED_0004);
    for case in 0..50 {
        let n = 30 + (rng.next() * 60.0) as usize;
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let side = if i % 2 == 0 { 1.0 } else { -1.0 };
            x.push(side * rng.range(0.005, 1.4));
            y.push(rng.range(-3.0, 3.0));
        }
        let ds = Dataset::new_sharp(y, x, vec![], 0.0).unwrap();
        let h = rng.range(0.5, 1.3);
        let cfg = EstimateConfig::sharp(
            WeightScheme::new(Estimand::Unweighted),
            Kernel::Triangular,
            BandwidthSet::uniform(h),
        );
        let ours = cfg.point(&ds).unwrap().effect;
        let oracle = standard_rd_estimate(&ds, Kernel::Triangular, h);
        assert_eq!(
            ours.to_bits(),
            oracle.to_bits(),
            "case {case}: {ours:?} vs {oracle:?}"
        );
    }
    println!("acceptance criterion 4 (unweighted estimator equals standard local linear, bit for bit): PASS");
}

#[test]
fn criterion_5_balanced_design_band() {
    let start = Instant::now();
    let cfg = McConfig::new(Setting::S1 { beta: 2.0 }, 2000, 200, 20260809);
    let rep = run_monte_carlo(&cfg).unwrap();
    let rd = &rep.estimators[0];
    let wll = &rep.estimators[1];
    assert!(rd.bias.abs() < 0.15, "RD bias {}", rd.bias);
    assert!(wll.bias.abs() < 0.15, "WLL bias {}", wll.bias);
    assert!(
        wll.mse <= 1.05 * rd.mse,
        "MSE ratio {} (WLL {} vs RD {})",
        wll.mse / rd.mse,
        wll.mse,
        rd.mse
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}");
    println!(
        "acceptance criterion 5 (balanced design: RD bias {:+.4}, WLL bias {:+.4}, MSE ratio {:.3}, {elapsed:?}): PASS",
        rd.bias,
        wll.bias,
        wll.mse / rd.mse
    );
}

#[test]
fn criterion_6_unbalanced_design_band() {
    let start = Instant::now();
    let mut cfg = McConfig::new(Setting::S2 { gamma: 1.0 }, 2000, 200, 7);
    cfg.bandwidth = BandwidthPolicy::Fixed(0.55);
    cfg.inference = McInference::Bootstrap { b: 200 };
    let rep = run_monte_carlo(&cfg).unwrap();
    let rd = &rep.estimators[0];
    let wll = &rep.estimators[1];
    assert!((0.85..=1.15).contains(&rd.bias), "RD bias {}", rd.bias);
    assert!((0.05..=0.40).contains(&wll.bias), "WLL bias {}", wll.bias);
    assert!(rd.coverage <= 0.20, "RD coverage {}", rd.coverage);
    assert!(wll.coverage >= 0.85, "WLL coverage {}", wll.coverage);
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 600.0, "took {elapsed:?}");
    println!(
        "acceptance criterion 6 (unbalanced design: RD bias {:+.4} cov {:.3}, WLL bias {:+.4} cov {:.3}, {elapsed:?}): PASS",
        rd.bias, rd.coverage, wll.bias, wll.coverage
    );
}

#[test]
fn criterion_7_bandwidth_sweep_undersmoothing() {
    let mut cfg = McConfig::new(Setting::S1 { beta: 2.0 }, 1000, 100, 20260809);
    cfg.bandwidth = BandwidthPolicy::Fixed(0.5); // the sweep supplies its own grid
    let grid: Vec<f64> = (0..8).map(|i| 0.15 + 0.1 * i as f64).collect();
    let rows = bandwidth_sweep(&cfg, &grid).unwrap();
    assert_eq!(rows.len(), 8);
    for r in &rows {
        assert!(r.mse_rd > 0.0 && r.mse_wll > 0.0);
    }
    let first = &rows[0];
    assert!(
        first.mse_wll <= first.mse_rd,
        "at h = {}: WLL {} vs RD {}",
        first.h,
        first.mse_wll,
        first.mse_rd
    );
    println!(
        "acceptance criterion 7 (bandwidth sweep: at h = {} WLL MSE {:.4} <= RD MSE {:.4}): PASS",
        first.h, first.mse_wll, first.mse_rd
    );
}

#[test]
fn criterion_8_identification_oracle() {
    // binary covariate whose class probability jumps at the cutoff, with
    // piecewise linear outcome surfaces: the whole-population estimand
    // collapses to a two-term sum
    let n = 20_000;
    let (p_below, p_above) = (0.2, 0.8);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut z = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let p = if x[i] > 0.0 { p_above } else { p_below };
        let zi = f64::from(rng.random::<f64>() < p);
        let e: f64 = StandardNormal.sample(&mut rng);
        // m1(x, z) = 2 + 0.5 x + 2 z ; m0(x, z) = 1 + 0.5 x + 0.5 z
        y.push(if x[i] > 0.0 {
            2.0 + 0.5 * x[i] + 2.0 * zi + 0.5 * e
        } else {
            1.0 + 0.5 * x[i] + 0.5 * zi + 0.5 * e
        });
        z.push(zi);
    }
    let ds = Dataset::new_sharp(y, x, vec![z], 0.0).unwrap();
    // analytic value: sum over z in {0, 1} of [m1(0, z) - m0(0, z)] P(Z = z)
    // with P(Z = 1) = (p_below + p_above)/2 under the symmetric running
    // variable; here 1 + 1.5 * 0.5 = 1.75
    let truth = 1.0 + 1.5 * 0.5 * (p_below + p_above);
    let bw = couple_bandwidths(0.35, false, ds.x_scale());
    let est = EstimateConfig::sharp(WeightScheme::new(Estimand::W1), Kernel::Triangular, bw)
        .point(&ds)
        .unwrap();
    assert!(
        (est.effect - truth).abs() < 0.1,
        "W1 estimate {} vs analytic {truth}",
        est.effect
    );
    println!(
        "acceptance criterion 8 (identification oracle: W1 {:.4} vs analytic {truth}): PASS",
        est.effect
    );
}

#[test]
fn criterion_9_fuzzy_reduction() {
    let mut rng = MixRng(0x5EED_0009);
    let n = 400;
    let mut x = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let xi = rng.range(-1.5, 1.5);
        let zi = rng.range(-1.0, 1.0);
        let t = f64::from(xi > 0.0);
        x.push(xi);
        z.push(zi);
        y.push(0.3 + 1.7 * t + 0.9 * xi + 0.5 * zi + 0.2 * rng.range(-1.0, 1.0));
    }
    let ds = Dataset::new_sharp(y, x, vec![z], 0.0).unwrap();
    let bw = BandwidthSet::uniform(0.8);
    for est in [Estimand::W1, Estimand::W2, Estimand::W3] {
        let scheme = WeightScheme::new(est);
        let sharp = EstimateConfig::sharp(scheme, Kernel::Triangular, bw).point(&ds).unwrap();
        let fuzzy = EstimateConfig::fuzzy(scheme, Kernel::Triangular, bw, FuzzyOptions::default())
            .point(&ds)
            .unwrap();
        assert_eq!(fuzzy.first_stage, Some(1.0), "{est:?} first stage");
        assert!(
            (fuzzy.effect - sharp.effect).abs() < 1e-9,
            "{est:?}: fuzzy {} vs sharp {}",
            fuzzy.effect,
            sharp.effect
        );
    }
    println!("acceptance criterion 9 (perfect compliance: fuzzy equals sharp for w1/w2/w3): PASS");
}

#[test]
fn criterion_10_diagnostics_power() {
    let s2 = generate_setting2(5000, 1.0, 1);
    let j2 = covariate_jump_test(&s2, 0, Kernel::Triangular, 0.5, 200, 99).unwrap();
    assert!((j2.jump - 1.0).abs() <= 0.2, "S2 jump {}", j2.jump);
    assert!(j2.z_score > 5.0, "S2 z {}", j2.z_score);

    let s1 = generate_setting1(5000, 2.0, 1);
    let j1 = covariate_jump_test(&s1, 0, Kernel::Triangular, 0.5, 200, 99).unwrap();
    assert!(j1.z_score.abs() < 4.0, "S1 z {}", j1.z_score);
    println!(
        "acceptance criterion 10 (diagnostics: S2 jump {:+.3} z {:+.1}, S1 z {:+.2}): PASS",
        j2.jump, j2.z_score, j1.z_score
    );
}
