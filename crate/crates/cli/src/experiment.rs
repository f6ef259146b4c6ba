use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use nodal_core::chaos::{chaos_campaign, ISampler, LimitLawSampler, MRoute, DEFAULT_PROCESS_GRID};
use nodal_core::crossings::{
    run_campaign_unchecked, CampaignSettings, MonteCarloSummary, Regime, STATIC_TOL,
};
use nodal_core::curve::{functionals, UnitSpeedCurve};
use nodal_core::kacrice::{variance_numeric, DEFAULT_C0};
use nodal_core::lattice::{enumerate_level, separation_stats, spectral_measure, EnergyLevel};
use serde::{Deserialize, Serialize};

use crate::config::{Checks, ExperimentConfig, LimitRoute};
use crate::output::{counts_csv, histogram_svg, to_json, write_file};
use crate::{CliError, Context};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Timestamps {
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CurveBrief {
    pub id: String,
    pub length: f64,
    pub closed: bool,
    pub abs_i_gamma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChaosBrief {
    pub var_z2a: f64,
    pub var_z2b: f64,
    pub var_z4a: f64,
    pub var_z4a_finite: f64,
    pub var_z4a_asymptotic: f64,
    /// `Var(Z − z0 − z2 − z4a) / Var(Z)`.
    pub residual_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct KacRiceBrief {
    pub variance: f64,
    pub c0: f64,
    pub singular_fraction: f64,
    pub quadrature_rel_change: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LevelSummary {
    pub n: u64,
    pub lattice_count: usize,
    pub min_separation: f64,
    pub mu_hat4: f64,
    pub b: f64,
    pub a: f64,
    pub trials: usize,
    pub accepted: usize,
    pub flag_rate: f64,
    pub odd_counts: usize,
    pub max_refinement_depth: usize,
    pub mean: f64,
    pub theoretical_mean: f64,
    pub standard_error: f64,
    pub variance: f64,
    pub theoretical_variance: f64,
    pub variance_ratio: f64,
    pub ks_normal: f64,
    pub ks_static_circle: f64,
    /// Against draws of the configured limit law (static regime only).
    pub ks_limit: Option<f64>,
    /// Fraction of standardized samples above 1 (static regime only).
    pub fraction_above_one: Option<f64>,
    pub kacrice: Option<KacRiceBrief>,
    pub chaos: Option<ChaosBrief>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CheckOutcome {
    pub level: u64,
    pub name: String,
    pub value: f64,
    pub bound: String,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub schema: u32,
    pub name: String,
    pub config_hash: String,
    pub code_version: String,
    pub timestamps: Timestamps,
    pub config: ExperimentConfig,
    pub regime: Regime,
    pub curve: CurveBrief,
    pub levels: Vec<LevelSummary>,
    pub tolerances: Checks,
    pub checks: Vec<CheckOutcome>,
    pub passed: bool,
}

/// What happened to a manifest already present in the output directory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verification {
    Fresh,
    Reproduced,
    Replaced,
}

pub struct RunOutcome {
    pub manifest: RunManifest,
    pub dir: PathBuf,
    pub verification: Verification,
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

/// Mean and unbiased variance.
fn moments(xs: &[f64]) -> (f64, f64) {
    nodal_core::crossings::mean_and_variance(xs)
}

fn limit_sampler(
    route: LimitRoute,
    curve: &UnitSpeedCurve,
    level: &EnergyLevel,
) -> Result<LimitLawSampler, CliError> {
    let measure = spectral_measure(level);
    let f = functionals(curve, &measure, None, STATIC_TOL).ctx("limit law functionals")?;
    let denom = 16.0 * f.a - f.length * f.length;
    Ok(match route {
        LimitRoute::Circle => LimitLawSampler::Circle,
        LimitRoute::I => LimitLawSampler::I(Box::new(
            ISampler::new(curve, &measure, DEFAULT_PROCESS_GRID).ctx("limit law kernel")?,
        )),
        LimitRoute::Reconciled => LimitLawSampler::M {
            coeffs: f.limit_reconciled,
            denom,
            route: MRoute::Reconciled,
        },
        LimitRoute::Literal => LimitLawSampler::M {
            coeffs: f.limit,
            denom,
            route: MRoute::Literal,
        },
    })
}

fn chaos_brief(level: &EnergyLevel, curve: &UnitSpeedCurve, config: &ExperimentConfig, mc: &MonteCarloSummary) -> ChaosBrief {
    let projections = chaos_campaign(level, curve, config.trials, config.seed);
    let projector = nodal_core::chaos::ChaosProjector::new(level, curve);
    let var4 = projector.z4a_variance();
    let col = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..projections.len()).map(f).collect() };
    let z2a = col(&|i| projections[i].z2a);
    let z2b = col(&|i| projections[i].z2b);
    let z4a = col(&|i| projections[i].z4a);
    let flagged: std::collections::HashSet<usize> = mc.flagged_trials.iter().copied().collect();
    let residual: Vec<f64> = (0..projections.len())
        .filter(|i| !flagged.contains(i))
        .zip(&mc.counts)
        .map(|(i, &c)| {
            let p = &projections[i];
            c as f64 - p.z0 - p.z2() - p.z4a
        })
        .collect();
    ChaosBrief {
        var_z2a: moments(&z2a).1,
        var_z2b: moments(&z2b).1,
        var_z4a: moments(&z4a).1,
        var_z4a_finite: var4.finite,
        var_z4a_asymptotic: var4.asymptotic,
        residual_fraction: moments(&residual).1 / mc.variance,
    }
}

fn check(level: u64, name: &str, value: f64, bound: String, passed: bool) -> CheckOutcome {
    CheckOutcome {
        level,
        name: name.to_string(),
        value,
        bound,
        passed,
    }
}

/// KS distance against the law the regime predicts, with its check name.
pub fn reference_ks(s: &LevelSummary, regime: Regime, route: LimitRoute) -> (&'static str, f64) {
    match (regime, route) {
        (Regime::Generic, _) => ("ks_normal", s.ks_normal),
        (Regime::Static, LimitRoute::Circle) => ("ks_static_circle", s.ks_static_circle),
        (Regime::Static, _) => ("ks_limit", s.ks_limit.unwrap_or(f64::NAN)),
    }
}

fn level_checks(s: &LevelSummary, checks: &Checks, regime: Regime, route: LimitRoute) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    out.push(check(
        s.n,
        "flag_rate",
        s.flag_rate,
        format!("<= {}", checks.flag_rate),
        s.flag_rate <= checks.flag_rate,
    ));
    let z = (s.mean - s.theoretical_mean).abs() / s.standard_error;
    out.push(check(s.n, "mean_sigmas", z, format!("<= {}", checks.mean_sigmas), z <= checks.mean_sigmas));
    if let Some([lo, hi]) = checks.variance_ratio {
        let r = s.variance_ratio;
        out.push(check(s.n, "variance_ratio", r, format!("in [{lo}, {hi}]"), (lo..=hi).contains(&r)));
    }
    if let Some(max) = checks.ks_max {
        let (name, ks) = reference_ks(s, regime, route);
        out.push(check(s.n, name, ks, format!("< {max}"), ks < max));
    }
    if let (Some(tol), Some(kr)) = (checks.kacrice_rel, &s.kacrice) {
        let rel = (kr.variance - s.variance).abs() / s.variance;
        out.push(check(s.n, "kacrice_rel", rel, format!("<= {tol}"), rel <= tol));
    }
    out
}

fn run_level(
    n: u64,
    curve: &UnitSpeedCurve,
    regime: Regime,
    config: &ExperimentConfig,
) -> Result<(LevelSummary, MonteCarloSummary), CliError> {
    let at = |what: &str| format!("level {n}: {what}");
    let level = enumerate_level(n).ctx(at("lattice"))?;
    let measure = spectral_measure(&level);
    let f = functionals(curve, &measure, None, STATIC_TOL).ctx(at("curve functionals"))?;
    let settings = CampaignSettings {
        samples_per_wavelength: config.samples_per_wavelength,
        ..CampaignSettings::new(config.trials, config.seed)
    };
    let mut mc = run_campaign_unchecked(&level, curve, &settings).ctx(at("campaign"))?;
    let mut fraction_above_one = None;
    if regime == Regime::Static {
        let draws = limit_sampler(config.limit_route, curve, &level)?
            .draw(config.limit_draws, config.seed)
            .ctx(at("limit law"))?;
        mc.attach_limit_sample(&draws).ctx(at("limit law KS"))?;
        let above = mc.standardized.iter().filter(|&&x| x > 1.0).count();
        fraction_above_one = Some(above as f64 / mc.standardized.len() as f64);
    }
    let kacrice = if config.kacrice {
        let kr = variance_numeric(&level, curve, DEFAULT_C0).ctx(at("kac-rice"))?;
        Some(KacRiceBrief {
            variance: kr.variance,
            c0: kr.diagnostics.c0,
            singular_fraction: kr.diagnostics.singular_fraction,
            quadrature_rel_change: kr.diagnostics.quadrature_rel_change,
        })
    } else {
        None
    };
    let chaos = config.chaos.then(|| chaos_brief(&level, curve, config, &mc));
    let summary = LevelSummary {
        n,
        lattice_count: level.count,
        min_separation: separation_stats(&level, 0.0).min_sep,
        mu_hat4: f.mu_hat4,
        b: f.b,
        a: f.a,
        trials: mc.trials,
        accepted: mc.counts.len(),
        flag_rate: mc.flag_rate,
        odd_counts: mc.odd_counts,
        max_refinement_depth: mc.max_refinement_depth,
        mean: mc.mean,
        theoretical_mean: mc.theoretical_mean,
        standard_error: mc.standard_error(),
        variance: mc.variance,
        theoretical_variance: mc.theoretical_variance,
        variance_ratio: mc.variance_ratio(),
        ks_normal: mc.ks.normal,
        ks_static_circle: mc.ks.static_circle,
        ks_limit: mc.ks.limit_sample,
        fraction_above_one,
        kacrice,
        chaos,
    };
    Ok((summary, mc))
}

/// Manifest as JSON with the timestamps removed.
pub fn comparable(json: &str) -> Result<serde_json::Value, CliError> {
    let mut v: serde_json::Value =
        serde_json::from_str(json).map_err(|e| CliError::Usage(format!("malformed manifest: {e}")))?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove("timestamps");
    }
    Ok(v)
}

pub fn run(config: &ExperimentConfig, out_dir: Option<&Path>, force: bool) -> Result<RunOutcome, CliError> {
    let started = now_ms();
    let (curve, regime) = config.validate()?;
    let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| config.output.dir.clone());
    let hash = config.hash();
    let manifest_path = dir.join(MANIFEST_FILE);
    let previous = match std::fs::read_to_string(&manifest_path) {
        Ok(text) => {
            let old: RunManifest = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", manifest_path.display())))?;
            if old.config_hash != hash && !force {
                return Err(CliError::HashMismatch {
                    path: manifest_path,
                    recorded: old.config_hash,
                    current: hash,
                });
            }
            (old.config_hash == hash).then_some(text)
        }
        Err(_) => None,
    };

    let mut levels = Vec::with_capacity(config.levels.len());
    let mut checks = Vec::new();
    for &n in &config.levels {
        let (summary, mc) = run_level(n, &curve, regime, config)?;
        checks.extend(level_checks(&summary, &config.checks, regime, config.limit_route));
        if config.output.csv {
            write_file(&dir.join(format!("counts_n{n}.csv")), &counts_csv(&mc.counts))?;
        }
        if config.output.svg {
            let svg = match regime {
                Regime::Static => histogram_svg(
                    &format!("n = {n}, standardized counts vs 1 - Exp(1)"),
                    &mc.standardized,
                    Some(&|x: f64| if x <= 1.0 { (x - 1.0).exp() } else { 0.0 }),
                ),
                Regime::Generic => histogram_svg(
                    &format!("n = {n}, standardized counts vs N(0, 1)"),
                    &mc.standardized,
                    Some(&|x: f64| (-0.5 * x * x).exp() / std::f64::consts::TAU.sqrt()),
                ),
            };
            write_file(&dir.join(format!("hist_n{n}.svg")), &svg)?;
        }
        levels.push(summary);
    }

    let manifest = RunManifest {
        schema: SCHEMA_VERSION,
        name: config.name.clone(),
        config_hash: hash,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamps: Timestamps {
            started_unix_ms: started,
            finished_unix_ms: now_ms(),
        },
        config: config.clone(),
        regime,
        curve: CurveBrief {
            id: curve.id(),
            length: curve.length,
            closed: config.curve.is_closed(),
            abs_i_gamma: nodal_core::curve::I_gamma(&curve).norm(),
        },
        levels,
        tolerances: config.checks.clone(),
        passed: checks.iter().all(|c| c.passed),
        checks,
    };
    let text = to_json(&manifest);
    let verification = match previous {
        Some(old) if comparable(&old)? == comparable(&text)? => Verification::Reproduced,
        Some(_) => {
            return Err(CliError::NotReproduced(manifest_path));
        }
        None if manifest_path.exists() => Verification::Replaced,
        None => Verification::Fresh,
    };
    write_file(&manifest_path, &text)?;
    Ok(RunOutcome {
        manifest,
        dir,
        verification,
    })
}
