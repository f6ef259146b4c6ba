mod args;
mod config;
mod experiment;
mod output;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nodal_core::chaos::{chaos_campaign, ChaosProjector, ISampler, LimitLawSampler, MRoute, DEFAULT_PROCESS_GRID};
use nodal_core::crossings::{
    ks_distance, mean_and_variance, regime_of, run_campaign_unchecked, variance_prediction, CampaignSettings,
    Reference, Regime, MAX_FLAG_RATE, STATIC_TOL,
};
use nodal_core::curve::{build_unit_speed, functionals, UnitSpeedCurve, DEFAULT_NODES};
use nodal_core::kacrice::{moment_integrals, variance_approx_static, variance_numeric, MomentOrder, DEFAULT_C0};
use nodal_core::lattice::{
    enumerate_level, offdiagonal_sums, separation_stats, spectral_correlations, spectral_measure, DEFAULT_TUPLE_CAP,
};
use serde_json::json;

use args::{parse_measure, CurveArgs};
use config::ExperimentConfig;
use output::{counts_csv, histogram_svg, samples_csv, to_json, write_file};

pub const WORKERS_ENV: &str = "NODAL_WORKERS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Module {
        context: String,
        source: nodal_core::Error,
    },
    #[error(transparent)]
    Core(#[from] nodal_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path} was written by config {recorded}, current config is {current} (use --force to replace)")]
    HashMismatch {
        path: PathBuf,
        recorded: String,
        current: String,
    },
    #[error("re-run with the same config did not reproduce {0}")]
    NotReproduced(PathBuf),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub trait Context<T> {
    fn ctx(self, context: impl Into<String>) -> Result<T, CliError>;
}

impl<T> Context<T> for nodal_core::Result<T> {
    fn ctx(self, context: impl Into<String>) -> Result<T, CliError> {
        self.map_err(|source| CliError::Module {
            context: context.into(),
            source,
        })
    }
}

#[derive(Parser)]
#[command(name = "nodal", version, about = "Nodal intersections of random toral eigenfunctions with planar curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LimitChoice {
    #[value(name = "M")]
    M,
    #[value(name = "I")]
    I,
    Circle,
}

#[derive(Subcommand)]
enum Command {
    /// Lattice point set and spectral correlations of one level.
    Lattice {
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        /// Highest tuple order for correlation sums; 6 adds the sixth-order sums.
        #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u8).range(4..=6))]
        order: u8,
    },
    /// Length, staticity and spectral functionals of a curve.
    Curve {
        #[command(flatten)]
        curve: CurveArgs,
        /// uniform, cilleruelo, tilted or level:<n>.
        #[arg(long, default_value = "uniform")]
        measure: String,
    },
    /// Monte Carlo campaign of nodal intersection counts.
    Simulate {
        #[arg(long)]
        n: u64,
        #[command(flatten)]
        curve: CurveArgs,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Grid samples per wavelength.
        #[arg(long, default_value_t = nodal_core::field::DEFAULT_SAMPLES_PER_WAVELENGTH)]
        resolution: f64,
        /// JSON report; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        hist: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Wiener chaos projections and limit-law samplers.
    Chaos {
        #[arg(long)]
        n: u64,
        #[command(flatten)]
        curve: CurveArgs,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "I")]
        limit: LimitChoice,
        /// Use the unreconciled quadratic form for `--limit M`.
        #[arg(long)]
        literal: bool,
        #[arg(long, default_value_t = 200_000)]
        draws: usize,
        /// CSV of limit-law draws.
        #[arg(long)]
        samples: Option<PathBuf>,
    },
    /// Kac–Rice variance and covariance moment integrals.
    Kacrice {
        #[arg(long)]
        n: u64,
        #[command(flatten)]
        curve: CurveArgs,
        #[arg(long, default_value_t = DEFAULT_C0)]
        c0: f64,
        #[arg(long, value_delimiter = ',', default_value = "2,4")]
        orders: Vec<u32>,
    },
    /// Run a configured experiment and write its manifest.
    Run {
        config: PathBuf,
        /// Output directory; overrides the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace a manifest written by a different config.
        #[arg(long)]
        force: bool,
        /// Validate the config and print its hash without running.
        #[arg(long)]
        dry_run: bool,
    },
    /// Cross-level comparison table from run manifests.
    Report {
        #[arg(required = true, num_args = 1..)]
        manifests: Vec<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn build_curve(args: &CurveArgs) -> Result<UnitSpeedCurve, CliError> {
    build_unit_speed(&args.spec(), DEFAULT_NODES).ctx("curve")
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn lattice_cmd(n: u64, delta: f64, order: u8) -> Result<bool, CliError> {
    let level = enumerate_level(n)?;
    let sep = separation_stats(&level, delta);
    let optional = |r: nodal_core::Result<serde_json::Value>| r.unwrap_or(serde_json::Value::Null);
    let s4 = optional(spectral_correlations(&level, 4, DEFAULT_TUPLE_CAP).map(|v| json!(v)));
    let off4 = optional(offdiagonal_sums(&level, 4, DEFAULT_TUPLE_CAP).map(|v| json!(v)));
    let (s6, off6) = if order >= 6 {
        (
            optional(spectral_correlations(&level, 6, DEFAULT_TUPLE_CAP).map(|v| json!(v))),
            optional(offdiagonal_sums(&level, 6, DEFAULT_TUPLE_CAP).map(|v| json!(v))),
        )
    } else {
        (serde_json::Value::Null, serde_json::Value::Null)
    };
    let points: Vec<[i64; 2]> = level.points.iter().map(|p| [p.x, p.y]).collect();
    let out = json!({
        "n": n,
        "N": level.count,
        "points": points,
        "min_sep": sep.min_sep,
        "delta": delta,
        "is_delta_separated": sep.is_delta_separated,
        "mu_hat4": spectral_measure(&level).mu_hat4(),
        "s4": s4,
        "s6": s6,
        "offdiag": { "order4": off4, "order6": off6 },
    });
    print!("{}", to_json(&out));
    Ok(true)
}

fn curve_cmd(args: &CurveArgs, measure: &str) -> Result<bool, CliError> {
    let curve = build_curve(args)?;
    let mu = parse_measure(measure)?;
    let level = match measure.strip_prefix("level:") {
        Some(n) => Some(enumerate_level(n.parse().map_err(|_| CliError::Usage(format!("bad level {n:?}")))?)?),
        None => None,
    };
    let f = functionals(&curve, &mu, level.as_ref(), STATIC_TOL).ctx("curve functionals")?;
    let out = json!({
        "curve": args.spec(),
        "id": curve.id(),
        "measure": mu,
        "functionals": f,
    });
    print!("{}", to_json(&out));
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn simulate_cmd(
    n: u64,
    args: &CurveArgs,
    trials: usize,
    seed: u64,
    resolution: f64,
    out: Option<&Path>,
    hist: Option<&Path>,
    svg: Option<&Path>,
) -> Result<bool, CliError> {
    let level = enumerate_level(n)?;
    let curve = build_curve(args)?;
    let settings = CampaignSettings {
        samples_per_wavelength: resolution,
        ..CampaignSettings::new(trials, seed)
    };
    let summary = run_campaign_unchecked(&level, &curve, &settings).ctx("campaign")?;
    emit(out, &to_json(&summary))?;
    if let Some(p) = hist {
        write_file(p, &counts_csv(&summary.counts))?;
    }
    if let Some(p) = svg {
        let text = match summary.regime {
            Regime::Static => histogram_svg(
                "standardized counts vs 1 - Exp(1)",
                &summary.standardized,
                Some(&|x: f64| if x <= 1.0 { (x - 1.0).exp() } else { 0.0 }),
            ),
            Regime::Generic => histogram_svg(
                "standardized counts vs N(0, 1)",
                &summary.standardized,
                Some(&|x: f64| (-0.5 * x * x).exp() / std::f64::consts::TAU.sqrt()),
            ),
        };
        write_file(p, &text)?;
    }
    Ok(summary.flag_rate <= MAX_FLAG_RATE)
}

#[allow(clippy::too_many_arguments)]
fn chaos_cmd(
    n: u64,
    args: &CurveArgs,
    trials: usize,
    seed: u64,
    limit: LimitChoice,
    literal: bool,
    draws: usize,
    samples: Option<&Path>,
) -> Result<bool, CliError> {
    let level = enumerate_level(n)?;
    let curve = build_curve(args)?;
    let mu = spectral_measure(&level);
    let f = functionals(&curve, &mu, None, STATIC_TOL).ctx("curve functionals")?;
    let projector = ChaosProjector::new(&level, &curve);
    let projections = chaos_campaign(&level, &curve, trials, seed);
    let mc = run_campaign_unchecked(&level, &curve, &CampaignSettings::new(trials, seed)).ctx("campaign")?;

    let column = |g: fn(&nodal_core::chaos::ChaosProjection) -> f64| -> Vec<f64> { projections.iter().map(g).collect() };
    let var = |xs: &[f64]| mean_and_variance(xs).1;
    let z2a = column(|p| p.z2a);
    let z2b = column(|p| p.z2b);
    let z4a = column(|p| p.z4a);
    let w_residual = projections.iter().map(|p| p.w.residual.abs()).fold(0.0, f64::max);
    let route_gap = projections.iter().map(|p| (p.z4a - p.z4a_static).abs()).fold(0.0, f64::max);
    let flagged: std::collections::HashSet<usize> = mc.flagged_trials.iter().copied().collect();
    let residual: Vec<f64> = (0..projections.len())
        .filter(|i| !flagged.contains(i))
        .zip(&mc.counts)
        .map(|(i, &c)| c as f64 - projections[i].z0 - projections[i].z2() - projections[i].z4a)
        .collect();

    let nf = level.count as f64;
    let l = curve.length;
    let denom = 16.0 * f.a - l * l;
    let sampler = match limit {
        LimitChoice::Circle => LimitLawSampler::Circle,
        LimitChoice::I => LimitLawSampler::I(Box::new(ISampler::new(&curve, &mu, DEFAULT_PROCESS_GRID).ctx("limit law kernel")?)),
        LimitChoice::M => LimitLawSampler::M {
            coeffs: if literal { f.limit } else { f.limit_reconciled },
            denom,
            route: if literal { MRoute::Literal } else { MRoute::Reconciled },
        },
    };
    let law = sampler.draw(draws, seed).ctx("limit law")?;
    let (z4_mean, z4_var) = mean_and_variance(&z4a);
    let z4_std: Vec<f64> = z4a.iter().map(|x| (x - z4_mean) / z4_var.sqrt()).collect();
    let static_curve = regime_of(&curve) == Regime::Static;
    let ks = json!({
        "z4a_vs_limit": ks_distance(&z4_std, &Reference::Empirical(&law)).ok(),
        "counts_vs_limit": ks_distance(&mc.standardized, &Reference::Empirical(&law)).ok(),
        "limit_vs_circle_law": ks_distance(&law, &Reference::StaticCircle).ok(),
    });
    if let Some(p) = samples {
        write_file(p, &samples_csv("draw", &law))?;
    }
    let var4 = projector.z4a_variance();
    let out = json!({
        "n": n,
        "N": level.count,
        "curve": curve.id(),
        "static": static_curve,
        "trials": trials,
        "seed": seed,
        "variances": {
            "counts": mc.variance,
            "z2a": var(&z2a),
            "z2a_predicted": (4.0 * f.b - l * l) * n as f64 / nf,
            "z2b": var(&z2b),
            "z4a": z4_var,
            "z4a_asymptotic": var4.asymptotic,
            "z4a_finite": var4.finite,
        },
        "residuals": {
            "w_max_abs": w_residual,
            "z4a_static_route_max_abs": if static_curve { Some(route_gap) } else { None },
            "partial_sum_fraction": var(&residual) / mc.variance,
        },
        "limit": {
            "route": format!("{limit:?}"),
            "literal": literal,
            "draws": draws,
            "denominator": denom,
            "mean": mean_and_variance(&law).0,
            "variance": mean_and_variance(&law).1,
        },
        "ks": ks,
    });
    print!("{}", to_json(&out));
    Ok(true)
}

fn kacrice_cmd(n: u64, args: &CurveArgs, c0: f64, orders: &[u32]) -> Result<bool, CliError> {
    let level = enumerate_level(n)?;
    let curve = build_curve(args)?;
    let orders: Vec<MomentOrder> = orders
        .iter()
        .map(|&p| MomentOrder::from_power(p).ok_or_else(|| CliError::Usage(format!("moment order {p} is not 2, 4 or 6"))))
        .collect::<Result<_, _>>()?;
    let numeric = variance_numeric(&level, &curve, c0).ctx("kac-rice variance")?;
    let regime = regime_of(&curve);
    let prediction = variance_prediction(&level, &curve, regime).ctx("variance prediction")?;
    let approx = match regime {
        Regime::Static => Some(variance_approx_static(&level, &curve).ctx("approximate static variance")?),
        Regime::Generic => None,
    };
    let table = moment_integrals(&level, &curve, &orders).ctx("moment integrals")?;
    let out = json!({
        "n": n,
        "N": level.count,
        "curve": curve.id(),
        "regime": regime,
        "variance": numeric,
        "approx_static": approx,
        "prediction": prediction,
        "ratio": numeric.variance / prediction,
        "moments": table,
    });
    print!("{}", to_json(&out));
    Ok(true)
}

fn run_cmd(path: &Path, out: Option<&Path>, force: bool, dry_run: bool) -> Result<bool, CliError> {
    let config = ExperimentConfig::load(path)?;
    if dry_run {
        let (_, regime) = config.validate()?;
        let out = json!({ "name": config.name, "config_hash": config.hash(), "regime": regime, "config": config });
        print!("{}", to_json(&out));
        return Ok(true);
    }
    let outcome = experiment::run(&config, out, force)?;
    let m = &outcome.manifest;
    for c in &m.checks {
        println!(
            "{} n={} {}: {} ({})",
            if c.passed { "PASS" } else { "FAIL" },
            c.level,
            c.name,
            c.value,
            c.bound
        );
    }
    let note = match outcome.verification {
        experiment::Verification::Fresh => "",
        experiment::Verification::Reproduced => " (reproduced previous manifest)",
        experiment::Verification::Replaced => " (replaced manifest from another config)",
    };
    println!(
        "{}{note}",
        outcome.dir.join(experiment::MANIFEST_FILE).display()
    );
    Ok(m.passed)
}

fn report_cmd(paths: &[PathBuf], csv: Option<&Path>) -> Result<bool, CliError> {
    let manifests = report::load(paths)?;
    let rows = report::rows(&manifests);
    if let Some(p) = csv {
        write_file(p, &report::csv(&rows))?;
    }
    print!("{}", report::text(&rows));
    Ok(true)
}

fn configure_workers() -> Result<(), CliError> {
    let Ok(value) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Usage(format!("{WORKERS_ENV} must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn dispatch(cli: Cli) -> Result<bool, CliError> {
    configure_workers()?;
    match cli.command {
        Command::Lattice { n, delta, order } => lattice_cmd(n, delta, order),
        Command::Curve { curve, measure } => curve_cmd(&curve, &measure),
        Command::Simulate {
            n,
            curve,
            trials,
            seed,
            resolution,
            out,
            hist,
            svg,
        } => simulate_cmd(n, &curve, trials, seed, resolution, out.as_deref(), hist.as_deref(), svg.as_deref()),
        Command::Chaos {
            n,
            curve,
            trials,
            seed,
            limit,
            literal,
            draws,
            samples,
        } => chaos_cmd(n, &curve, trials, seed, limit, literal, draws, samples.as_deref()),
        Command::Kacrice { n, curve, c0, orders } => kacrice_cmd(n, &curve, c0, &orders),
        Command::Run {
            config,
            out,
            force,
            dry_run,
        } => run_cmd(&config, out.as_deref(), force, dry_run),
        Command::Report { manifests, csv } => report_cmd(&manifests, csv.as_deref()),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
