use rdwate::bandwidth::BandwidthSet;
use rdwate::diagnostics::covariate_jump_test;
use rdwate::estimators::EstimateConfig;
use rdwate::inference::{bootstrap_se, InferenceConfig};
use rdwate::kernels::Kernel;
use rdwate::simulation::{generate_setting1, generate_setting2};
use rdwate::weights::{Estimand, WeightScheme};

#[test]
#[ignore]
fn probe_plugin_ratio_n5000() {
    for &(beta, h) in &[(0.5, 0.5), (1.0, 0.5), (0.5, 0.4)] {
        let ds = generate_setting1(5000, beta, 777);
        let scheme = WeightScheme::new(Estimand::W1).pretreatment(true);
        let cfg = EstimateConfig::sharp(scheme, Kernel::Triangular, BandwidthSet::uniform(h));
        let inf = InferenceConfig { b: 200, seed: 4, ..Default::default() };
        let boot = bootstrap_se(&ds, &cfg, &inf).unwrap();
        let (point, artifacts) = cfg.pipeline(&ds).unwrap();
        let pse = rdwate::plugin_se(&ds, &cfg, &point, &artifacts).unwrap();
        println!("|beta={beta} h={h}: plugin {pse:.4} bootstrap {:.4} ratio {:.3}", boot.se, pse / boot.se);
    }
}

#[test]
#[ignore]
fn probe_diag_jump_seeds() {
    for seed in [314u64, 1, 2, 3, 4] {
        let s2 = generate_setting2(5000, 1.0, seed);
        let j2 = covariate_jump_test(&s2, 0, Kernel::Triangular, 0.5, 200, 99).unwrap();
        let s1 = generate_setting1(5000, 2.0, seed);
        let j1 = covariate_jump_test(&s1, 0, Kernel::Triangular, 0.5, 200, 99).unwrap();
        println!("|seed {seed}: s2 jump {:+.4} z {:+.1} | s1 z {:+.2}", j2.jump, j2.z_score, j1.z_score);
    }
}

#[test]
#[ignore]
fn probe_binary_seed99() {
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use rdwate::bandwidth::couple_bandwidths;
    use rdwate::dataset::Dataset;
    for seed in [99u64, 3, 4, 5] {
        let n = 20_000;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut z = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let p = if x[i] > 0.0 { 0.8 } else { 0.2 };
            let zi = f64::from(rng.random::<f64>() < p);
            let e: f64 = StandardNormal.sample(&mut rng);
            y.push(if x[i] > 0.0 { 2.0 + 0.5 * x[i] + 2.0 * zi + 0.5 * e } else { 1.0 + 0.5 * x[i] + 0.5 * zi + 0.5 * e });
            z.push(zi);
        }
        let ds = Dataset::new_sharp(y, x, vec![z], 0.0).unwrap();
        let bw = couple_bandwidths(0.35, false, ds.x_scale());
        let w1 = EstimateConfig::sharp(WeightScheme::new(Estimand::W1), Kernel::Triangular, bw)
            .point(&ds)
            .unwrap();
        println!("|seed {seed}: W1 {:.4} err {:+.4}", w1.effect, w1.effect - 1.75);
    }
}
