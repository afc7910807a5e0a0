//! Batch front end: CSV in, deterministic JSON/CSV reports out.

mod json;
mod load;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use rdwate::bandwidth::{couple_bandwidths, cv_curve, default_grid, select_bandwidth_cv};
use rdwate::dataset::Dataset;
use rdwate::diagnostics::{covariate_jump_test, density_profile};
use rdwate::error::Error;
use rdwate::estimators::{estimate_fuzzy, estimate_sharp, EstimateResult, FuzzyOptions};
use rdwate::inference::{InferenceConfig, InferenceMethod};
use rdwate::kernels::Kernel;
use rdwate::simulation::{
    bandwidth_sweep, run_monte_carlo, BandwidthPolicy, McConfig, McInference, McReport, Setting,
};
use rdwate::weights::{Estimand, WeightScheme, CLIP_WARN_FRACTION, DEFAULT_CLIP_EPSILON};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "rdwate",
    about = "Cutoff-jump treatment effects that stay valid when covariates jump at the cutoff",
    version
)]
struct Cli {
    /// Worker threads (results are identical for any value).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the treatment effect from a CSV dataset.
    Estimate(EstimateArgs),
    /// Covariate-balance diagnostics at the cutoff.
    Diagnose(DiagnoseArgs),
    /// Run the seeded Monte Carlo designs.
    Simulate(SimulateArgs),
    /// Print the bandwidth cross-validation curve as CSV.
    Bandwidth(BandwidthArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with header; columns y, x, optional z/z1..zk, optional t.
    #[arg(long)]
    data: PathBuf,
    /// Cutoff of the running variable.
    #[arg(long, allow_hyphen_values = true)]
    cutoff: f64,
    /// Kernel family: uniform | triangular | epanechnikov.
    #[arg(long, default_value = "triangular")]
    kernel: String,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Estimand: srd | w1 | w2 | w3.
    #[arg(long, default_value = "w1")]
    estimand: String,
    /// Fixed regression bandwidth; omit to cross-validate.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Cross-validate the bandwidth (default when --bandwidth is absent).
    #[arg(long, conflicts_with = "bandwidth")]
    cv: bool,
    /// Override the joint-density bandwidth produced by the coupling rule.
    #[arg(long)]
    h1: Option<f64>,
    /// Treat covariates as pre-treatment (pooled two-sided density).
    #[arg(long)]
    pretreatment: bool,
    /// Fuzzy design: treatment from the t column, ratio estimator.
    #[arg(long)]
    fuzzy: bool,
    /// Smallest acceptable treatment-probability jump in fuzzy mode.
    #[arg(long, default_value_t = 0.05)]
    min_first_stage: f64,
    /// Relative density floor for the inverse weights.
    #[arg(long, default_value_t = DEFAULT_CLIP_EPSILON)]
    clip_eps: f64,
    /// Inference method: bootstrap | plugin.
    #[arg(long, default_value = "bootstrap")]
    inference: String,
    /// Bootstrap replicate count.
    #[arg(long, default_value_t = 500)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Confidence level of the interval.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Re-run bandwidth cross-validation inside every bootstrap replicate.
    #[arg(long)]
    cv_each_replicate: bool,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Fixed jump-test bandwidth; omit to cross-validate on the outcome.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Override the profile density bandwidth.
    #[arg(long)]
    h1: Option<f64>,
    /// Bootstrap replicates for the jump standard errors.
    #[arg(long, default_value_t = 200)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Points in each density-profile grid.
    #[arg(long, default_value_t = 101)]
    grid_points: usize,
    /// Directory for per-covariate profile CSV files.
    #[arg(long)]
    profiles: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Design: 1 (balanced covariate) or 2 (covariate jump).
    #[arg(long)]
    setting: u8,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    /// Covariate loading in setting 1.
    #[arg(long)]
    beta: Option<f64>,
    /// Covariate jump in setting 2.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Kernel family.
    #[arg(long, default_value = "triangular")]
    kernel: String,
    /// Comma-separated estimands to compare.
    #[arg(long, default_value = "srd,w1")]
    estimators: String,
    /// Fixed bandwidth; omit to cross-validate once and freeze.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Interval method inside the Monte Carlo: plugin | bootstrap.
    #[arg(long, default_value = "plugin")]
    inference: String,
    #[arg(long, default_value_t = 200)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value_t = DEFAULT_CLIP_EPSILON)]
    clip_eps: f64,
    /// Emit a bandwidth-sweep CSV over this comma-separated grid instead of
    /// a single report.
    #[arg(long)]
    sweep: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BandwidthArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated candidate grid; omit for the default grid.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        // ignore failure: the pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(&e);
            ExitCode::FAILURE
        }
    }
}

fn report_error(e: &Error) {
    let machine = serde_json::json!({
        "error": { "kind": error_kind(e), "message": e.to_string() }
    });
    eprintln!("{machine}");
    eprintln!("error: {e}");
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::EmptySample => "empty-sample",
        Error::NonPositiveBandwidth(_) => "non-positive-bandwidth",
        Error::EmptySide(_) => "empty-side",
        Error::InsufficientSupport { .. } => "insufficient-support",
        Error::SingularDesign => "singular-design",
        Error::DegenerateMoments => "degenerate-moments",
        Error::MissingDensity(_) => "missing-density",
        Error::MissingCovariates => "missing-covariates",
        Error::WeakFirstStage { .. } => "weak-first-stage",
        Error::NoValidBandwidth => "no-valid-bandwidth",
        Error::SharpContradiction { .. } => "sharp-contradiction",
        Error::MissingColumn(_) => "missing-column",
        Error::NonNumericCell { .. } => "non-numeric-cell",
        Error::ReplicateFailures { .. } => "replicate-failures",
        Error::UnsupportedInference(_) => "unsupported-inference",
        Error::InvalidConfig(_) => "invalid-config",
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Estimate(args) => run_estimate(args),
        Command::Diagnose(args) => run_diagnose(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Bandwidth(args) => run_bandwidth(args),
    }
}

fn parse_kernel(s: &str) -> Result<Kernel, Error> {
    s.parse()
}

fn parse_grid(s: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("bad grid value `{tok}`")))
        })
        .collect()
}

fn write_output(text: &str, out: Option<&Path>) -> Result<(), Error> {
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::InvalidConfig(format!("cannot write {}: {e}", path.display()))),
    }
}

fn to_json<T: Serialize>(doc: &T) -> Result<String, Error> {
    json::to_canonical(doc).map_err(|e| Error::InvalidConfig(format!("serialization failed: {e}")))
}

fn warn_dimension(ds: &Dataset) {
    if ds.n_covariates() >= 2 {
        eprintln!(
            "warning: product-kernel density estimation degrades quickly with dimension (k = {})",
            ds.n_covariates()
        );
    }
}

// ---------------------------------------------------------------- estimate

#[derive(Serialize)]
struct EstimateEcho {
    data: String,
    cutoff: f64,
    estimand: String,
    kernel: String,
    bandwidth_source: &'static str,
    pretreatment: bool,
    fuzzy: bool,
    min_first_stage: f64,
    clip_epsilon: f64,
    inference: String,
    bootstrap: usize,
    seed: u64,
    level: f64,
    cv_each_replicate: bool,
}

#[derive(Serialize)]
struct EstimateDoc {
    schema_version: u32,
    command: &'static str,
    config: EstimateEcho,
    result: EstimateResult,
}

fn run_estimate(args: EstimateArgs) -> Result<(), Error> {
    let kernel = parse_kernel(&args.data.kernel)?;
    let estimand: Estimand = args.estimand.parse()?;
    let method = match args.inference.as_str() {
        "bootstrap" => InferenceMethod::Bootstrap,
        "plugin" => InferenceMethod::Plugin,
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown inference `{other}` (expected bootstrap|plugin)"
            )))
        }
    };

    let ds = load::load_csv(&args.data.data, args.data.cutoff, args.fuzzy)?;
    warn_dimension(&ds);

    let (h, bandwidth_source) = match args.bandwidth {
        Some(h) => (h, "fixed"),
        None => (select_bandwidth_cv(&ds, kernel, &default_grid(&ds))?, "cv"),
    };
    let mut bw = couple_bandwidths(h, args.pretreatment, ds.x_scale());
    if let Some(h1) = args.h1 {
        bw = bw.with_h1(h1);
    }

    let mut scheme = WeightScheme::new(estimand).pretreatment(args.pretreatment);
    scheme.clip_epsilon = args.clip_eps;
    let inf = InferenceConfig {
        method,
        b: args.bootstrap,
        seed: args.seed,
        level: args.level,
        refit_cv: args.cv_each_replicate.then(|| default_grid(&ds)),
    };

    let result = if args.fuzzy {
        estimate_fuzzy(
            &ds,
            scheme,
            kernel,
            bw,
            FuzzyOptions { min_first_stage: args.min_first_stage },
            &inf,
        )?
    } else {
        estimate_sharp(&ds, scheme, kernel, bw, &inf)?
    };

    if result.clip_above > CLIP_WARN_FRACTION || result.clip_below > CLIP_WARN_FRACTION {
        eprintln!(
            "warning: weak overlap at the cutoff; {:.0}%/{:.0}% of side densities were floored",
            result.clip_above * 100.0,
            result.clip_below * 100.0
        );
    }

    let doc = EstimateDoc {
        schema_version: SCHEMA_VERSION,
        command: "estimate",
        config: EstimateEcho {
            data: args.data.data.display().to_string(),
            cutoff: args.data.cutoff,
            estimand: estimand.name().into(),
            kernel: kernel.name().into(),
            bandwidth_source,
            pretreatment: args.pretreatment,
            fuzzy: args.fuzzy,
            min_first_stage: args.min_first_stage,
            clip_epsilon: args.clip_eps,
            inference: args.inference,
            bootstrap: args.bootstrap,
            seed: args.seed,
            level: args.level,
            cv_each_replicate: args.cv_each_replicate,
        },
        result,
    };
    write_output(&to_json(&doc)?, args.out.as_deref())
}

// ---------------------------------------------------------------- diagnose

#[derive(Serialize)]
struct JumpDoc {
    covariate: String,
    jump: f64,
    se: f64,
    z_score: Option<f64>,
}

#[derive(Serialize)]
struct DiagnoseDoc {
    schema_version: u32,
    command: &'static str,
    data: String,
    cutoff: f64,
    kernel: String,
    bandwidth: f64,
    profile_bandwidth: f64,
    bootstrap: usize,
    seed: u64,
    jumps: Vec<JumpDoc>,
    profile_files: Vec<String>,
}

fn run_diagnose(args: DiagnoseArgs) -> Result<(), Error> {
    let kernel = parse_kernel(&args.data.kernel)?;
    let ds = load::load_csv(&args.data.data, args.data.cutoff, false)?;
    if ds.n_covariates() == 0 {
        return Err(Error::MissingCovariates);
    }
    warn_dimension(&ds);

    let h = match args.bandwidth {
        Some(h) => h,
        None => select_bandwidth_cv(&ds, kernel, &default_grid(&ds))?,
    };
    let h1 = args.h1.unwrap_or_else(|| couple_bandwidths(h, false, ds.x_scale()).h1);

    let mut jumps = Vec::new();
    for j in 0..ds.n_covariates() {
        let t = covariate_jump_test(&ds, j, kernel, h, args.bootstrap, args.seed)?;
        jumps.push(JumpDoc {
            covariate: format!("z{}", j + 1),
            jump: t.jump,
            se: t.se,
            z_score: t.z_score.is_finite().then_some(t.z_score),
        });
    }

    let mut profile_files = Vec::new();
    if let Some(dir) = &args.profiles {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::InvalidConfig(format!("cannot create {}: {e}", dir.display())))?;
        for j in 0..ds.n_covariates() {
            let col = ds.covariate(j);
            let (lo, hi) = col
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            let m = args.grid_points.max(2);
            let grid: Vec<f64> =
                (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect();
            let profile = density_profile(&ds, j, &grid, kernel, h1)?;
            let mut csv = String::from("z,below,above\n");
            for i in 0..grid.len() {
                csv.push_str(&format!(
                    "{},{},{}\n",
                    json::csv_float(profile.grid[i]),
                    json::csv_float(profile.below[i]),
                    json::csv_float(profile.above[i])
                ));
            }
            let path = dir.join(format!("profile_z{}.csv", j + 1));
            std::fs::write(&path, csv)
                .map_err(|e| Error::InvalidConfig(format!("cannot write {}: {e}", path.display())))?;
            profile_files.push(path.display().to_string());
        }
    }

    let doc = DiagnoseDoc {
        schema_version: SCHEMA_VERSION,
        command: "diagnose",
        data: args.data.data.display().to_string(),
        cutoff: args.data.cutoff,
        kernel: kernel.name().into(),
        bandwidth: h,
        profile_bandwidth: h1,
        bootstrap: args.bootstrap,
        seed: args.seed,
        jumps,
        profile_files,
    };
    write_output(&to_json(&doc)?, args.out.as_deref())
}

// ---------------------------------------------------------------- simulate

#[derive(Serialize)]
struct SimulateDoc {
    schema_version: u32,
    command: &'static str,
    report: McReport,
}

fn run_simulate(args: SimulateArgs) -> Result<(), Error> {
    let kernel = parse_kernel(&args.kernel)?;
    let setting = match args.setting {
        1 => {
            if args.gamma.is_some() {
                return Err(Error::InvalidConfig("--gamma belongs to setting 2".into()));
            }
            Setting::S1 { beta: args.beta.unwrap_or(0.0) }
        }
        2 => {
            if args.beta.is_some() {
                return Err(Error::InvalidConfig("--beta belongs to setting 1".into()));
            }
            Setting::S2 { gamma: args.gamma.unwrap_or(0.0) }
        }
        other => return Err(Error::InvalidConfig(format!("unknown setting {other} (expected 1|2)"))),
    };
    let estimators: Vec<Estimand> = args
        .estimators
        .split(',')
        .map(|tok| tok.trim().parse())
        .collect::<Result<_, _>>()?;
    let inference = match args.inference.as_str() {
        "plugin" => McInference::Plugin,
        "bootstrap" => McInference::Bootstrap { b: args.bootstrap },
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown inference `{other}` (expected plugin|bootstrap)"
            )))
        }
    };

    let mut cfg = McConfig::new(setting, args.n, args.reps, args.seed);
    cfg.estimators = estimators;
    cfg.kernel = kernel;
    cfg.inference = inference;
    cfg.level = args.level;
    cfg.clip_epsilon = args.clip_eps;
    if let Some(h) = args.bandwidth {
        cfg.bandwidth = BandwidthPolicy::Fixed(h);
    }

    if let Some(grid) = &args.sweep {
        let grid = parse_grid(grid)?;
        let rows = bandwidth_sweep(&cfg, &grid)?;
        let mut csv = String::from("h,mse_rd,mse_wll\n");
        for r in rows {
            csv.push_str(&format!(
                "{},{},{}\n",
                json::csv_float(r.h),
                json::csv_float(r.mse_rd),
                json::csv_float(r.mse_wll)
            ));
        }
        return write_output(&csv, args.out.as_deref());
    }

    let report = run_monte_carlo(&cfg)?;
    let doc = SimulateDoc { schema_version: SCHEMA_VERSION, command: "simulate", report };
    write_output(&to_json(&doc)?, args.out.as_deref())
}

// ---------------------------------------------------------------- bandwidth

fn run_bandwidth(args: BandwidthArgs) -> Result<(), Error> {
    let kernel = parse_kernel(&args.data.kernel)?;
    let ds = load::load_csv(&args.data.data, args.data.cutoff, false)?;
    let grid = match &args.grid {
        Some(g) => parse_grid(g)?,
        None => default_grid(&ds),
    };
    let curve = cv_curve(&ds, kernel, &grid);
    let mut csv = String::from("h,cv_objective,n_points\n");
    for (h, obj) in &curve {
        if let Some((o, m)) = obj {
            csv.push_str(&format!("{},{},{m}\n", json::csv_float(*h), json::csv_float(*o)));
        }
    }
    let selected = select_bandwidth_cv(&ds, kernel, &grid)?;
    eprintln!("selected bandwidth: {selected}");
    write_output(&csv, args.out.as_deref())
}
