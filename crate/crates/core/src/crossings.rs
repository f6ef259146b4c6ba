//! Zero counting of the restricted process, Monte Carlo campaigns and
//! comparison against the predicted mean, variance and limit laws.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::curve::{is_static, A_functional, B_functional, UnitSpeedCurve};
use crate::error::{Error, Result};
use crate::field::{sample_coefficients, ProcessBasis, RestrictedProcess};
use crate::lattice::{spectral_measure, EnergyLevel};
use crate::quadrature::CompensatedSum;

/// Relative near-zero threshold that triggers refinement of a grid cell.
pub const NEAR_ZERO: f64 = 1e-4;
/// Maximum subdivision depth below a grid cell.
pub const MAX_DEPTH: usize = 60;
/// Relative size below which a critical value is treated as a tangency.
const NOISE_FLOOR: f64 = 1e-12;
/// Largest tolerated fraction of flagged trials in a campaign.
pub const MAX_FLAG_RATE: f64 = 1e-3;
/// `|I(γ)| < STATIC_TOL · L` marks a curve as static.
pub const STATIC_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CrossingCount {
    pub count: usize,
    pub suspicious_intervals: Vec<(f64, f64)>,
    pub refinement_depth: usize,
    pub roots: Vec<f64>,
}

impl CrossingCount {
    pub fn is_flagged(&self) -> bool {
        !self.suspicious_intervals.is_empty()
    }

    pub fn checked(&self) -> Result<usize> {
        if self.is_flagged() {
            Err(Error::UnresolvedTangency(self.suspicious_intervals.len()))
        } else {
            Ok(self.count)
        }
    }
}

struct Counter<'p, 'a> {
    process: &'p RestrictedProcess<'a>,
    refine_tol: f64,
    first_margin: f64,
    noise: f64,
    out: CrossingCount,
}

#[derive(Clone, Copy)]
struct Node {
    t: f64,
    f: f64,
    d: f64,
}

fn positive(x: f64) -> bool {
    x >= 0.0
}

/// Interior critical points of the cubic Hermite interpolant on `[0, 1]`.
fn hermite_critical(c: [f64; 4]) -> Vec<f64> {
    // p'(s) = c1 + 2 c2 s + 3 c3 s²
    let (qa, qb, qc) = (3.0 * c[3], 2.0 * c[2], c[1]);
    let mut roots = Vec::with_capacity(2);
    let scale = qa.abs().max(qb.abs()).max(qc.abs());
    if scale == 0.0 {
        return roots;
    }
    if qa.abs() <= 1e-14 * scale {
        if qb != 0.0 {
            roots.push(-qc / qb);
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let q = -0.5 * (qb + qb.signum() * disc.sqrt());
            if q != 0.0 {
                roots.push(q / qa);
                roots.push(qc / q);
            } else {
                roots.push(0.0);
            }
        }
    }
    roots.retain(|s| *s > 0.0 && *s < 1.0);
    roots.sort_by(f64::total_cmp);
    roots
}

fn hermite_coeffs(a: Node, b: Node) -> [f64; 4] {
    let h = b.t - a.t;
    [
        a.f,
        h * a.d,
        3.0 * (b.f - a.f) - h * (2.0 * a.d + b.d),
        2.0 * (a.f - b.f) + h * (a.d + b.d),
    ]
}

fn cubic(c: [f64; 4], s: f64) -> f64 {
    ((c[3] * s + c[2]) * s + c[1]) * s + c[0]
}

impl Counter<'_, '_> {
    fn model_margin(&self, h: f64) -> f64 {
        // Hermite interpolation error h⁴ sup|f⁗| / 384, doubled
        let kh = h * self.process.bandwidth;
        2.0 * self.process.amplitude * kh.powi(4) / 384.0
    }

    fn node(&self, t: f64) -> Node {
        let (f, d) = self.process.eval(t);
        Node { t, f, d }
    }

    fn cell(&mut self, a: Node, b: Node, depth: usize) {
        self.out.refinement_depth = self.out.refinement_depth.max(depth);
        let h = b.t - a.t;
        let c = hermite_coeffs(a, b);
        let crit = hermite_critical(c);
        let mut margin = self.model_margin(h);
        if depth == 0 {
            margin = margin.max(self.first_margin);
        }
        let crit_vals: Vec<f64> = crit.iter().map(|&s| cubic(c, s)).collect();
        let ambiguous = crit_vals.iter().any(|v| v.abs() < margin);
        if ambiguous {
            let tangency = crit_vals.iter().any(|v| v.abs() < self.noise);
            if tangency || depth >= MAX_DEPTH || h < self.refine_tol {
                self.out.suspicious_intervals.push((a.t, b.t));
                self.count_model(a, b, c, &crit);
                return;
            }
            let m = self.node(0.5 * (a.t + b.t));
            self.cell(a, m, depth + 1);
            self.cell(m, b, depth + 1);
            return;
        }
        self.count_model(a, b, c, &crit);
    }

    fn count_model(&mut self, a: Node, b: Node, c: [f64; 4], crit: &[f64]) {
        let h = b.t - a.t;
        // (t, model value, known exact node)
        let mut pts: Vec<(f64, f64, Option<Node>)> = Vec::with_capacity(4);
        pts.push((a.t, a.f, Some(a)));
        for &s in crit {
            pts.push((a.t + s * h, cubic(c, s), None));
        }
        pts.push((b.t, b.f, Some(b)));
        for w in pts.windows(2) {
            if positive(w[0].1) != positive(w[1].1) {
                self.out.count += 1;
                if self.refine_tol > 0.0 {
                    let lo = w[0].2.unwrap_or_else(|| self.node(w[0].0));
                    let hi = w[1].2.unwrap_or_else(|| self.node(w[1].0));
                    let r = self.refine_root(lo, hi);
                    self.out.roots.push(r);
                }
            }
        }
    }

    /// Safeguarded Newton on a sign-change bracket, falling back to bisection.
    fn refine_root(&self, mut a: Node, mut b: Node) -> f64 {
        if positive(a.f) == positive(b.f) {
            return 0.5 * (a.t + b.t);
        }
        let mut x = 0.5 * (a.t + b.t);
        for _ in 0..200 {
            if b.t - a.t < self.refine_tol {
                break;
            }
            let m = self.node(x);
            if positive(m.f) == positive(a.f) {
                a = m;
            } else {
                b = m;
            }
            let newton = if m.d != 0.0 { m.t - m.f / m.d } else { f64::NAN };
            x = if newton > a.t && newton < b.t {
                newton
            } else {
                0.5 * (a.t + b.t)
            };
            if (x - m.t).abs() < 0.5 * self.refine_tol {
                // bracket the Newton iterate tightly and stop
                return x;
            }
        }
        0.5 * (a.t + b.t)
    }
}

/// Count zeros of the restricted process.
///
/// Each grid cell is modelled by the cubic Hermite interpolant of the values
/// and derivatives at its ends. Cells whose model has a critical value within
/// the interpolation error of zero are bisected with exact evaluations. Cells
/// that stay ambiguous are reported in `suspicious_intervals`.
pub fn count_zeros(process: &RestrictedProcess<'_>, refine_tol: f64) -> CrossingCount {
    let max_abs = process
        .values
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let mut counter = Counter {
        process,
        refine_tol,
        first_margin: NEAR_ZERO * max_abs,
        noise: NOISE_FLOOR * max_abs.max(f64::MIN_POSITIVE),
        out: CrossingCount::default(),
    };
    let g = &process.grid;
    let nodes: Vec<Node> = (0..g.len())
        .map(|i| Node {
            t: g[i],
            f: process.values[i],
            d: process.derivatives[i],
        })
        .collect();
    for w in nodes.windows(2) {
        counter.cell(w[0], w[1], 0);
    }
    if process.closed {
        let last = *nodes.last().unwrap();
        let wrap = Node {
            t: process.length,
            ..nodes[0]
        };
        counter.cell(last, wrap, 0);
    }
    let mut out = counter.out;
    if process.closed {
        for r in &mut out.roots {
            *r = r.rem_euclid(process.length);
        }
    }
    out.roots.sort_by(f64::total_cmp);
    out
}

/// `E[Z_n] = √(2n) L`.
pub fn expected_count(n: u64, length: f64) -> f64 {
    (2.0 * n as f64).sqrt() * length
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Generic,
    Static,
}

/// Leading-order variance: `(4B − L²) n/N` or `n/(4N²) (16A − L²)`, with the
/// level's own measure.
pub fn variance_prediction(level: &EnergyLevel, curve: &UnitSpeedCurve, regime: Regime) -> Result<f64> {
    let mu = spectral_measure(level);
    let l = curve.length;
    let n = level.n as f64;
    let nn = level.count as f64;
    match regime {
        Regime::Generic => Ok((4.0 * B_functional(curve, &mu) - l * l) * n / nn),
        Regime::Static => {
            if !is_static(curve, STATIC_TOL) {
                return Err(Error::RegimeMismatch {
                    abs_i: crate::curve::I_gamma(curve).norm(),
                });
            }
            Ok(n / (4.0 * nn * nn) * (16.0 * A_functional(curve, &mu) - l * l))
        }
    }
}

pub fn regime_of(curve: &UnitSpeedCurve) -> Regime {
    if is_static(curve, STATIC_TOL) {
        Regime::Static
    } else {
        Regime::Generic
    }
}

/// Reference laws for Kolmogorov distances.
#[derive(Debug, Clone)]
pub enum Reference<'a> {
    Normal,
    /// Law of `1 − W` with `W` exponential of rate 1.
    StaticCircle,
    Empirical(&'a [f64]),
}

pub fn static_circle_cdf(x: f64) -> f64 {
    if x <= 1.0 {
        (x - 1.0).exp()
    } else {
        1.0
    }
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let s = sorted(samples);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (((i + 1) as f64 / n) - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Kolmogorov distance between the empirical law of `samples` and `reference`.
pub fn ks_distance(samples: &[f64], reference: &Reference<'_>) -> Result<f64> {
    if samples.len() < 100 {
        return Err(Error::TooFewSamples {
            need: 100,
            got: samples.len(),
        });
    }
    Ok(match reference {
        Reference::Normal => {
            let nd = Normal::new(0.0, 1.0).expect("standard normal");
            ks_one_sample(samples, |x| nd.cdf(x))
        }
        Reference::StaticCircle => ks_one_sample(samples, static_circle_cdf),
        Reference::Empirical(r) => ks_two_sample(samples, r),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct KsDistances {
    pub normal: f64,
    pub static_circle: f64,
    pub limit_sample: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloSummary {
    pub n: u64,
    pub lattice_count: usize,
    pub curve_id: String,
    pub length: f64,
    pub trials: usize,
    pub seed: u64,
    pub samples_per_wavelength: f64,
    /// Counts of accepted trials, in trial order.
    pub counts: Vec<usize>,
    pub flagged_trials: Vec<usize>,
    pub flag_rate: f64,
    pub mean: f64,
    pub variance: f64,
    pub theoretical_mean: f64,
    pub regime: Regime,
    pub theoretical_variance: f64,
    /// `(Z − √(2n)L)/sd`.
    pub standardized: Vec<f64>,
    /// `(Z − mean)/sd`.
    pub standardized_empirical: Vec<f64>,
    pub ks: KsDistances,
    pub odd_counts: usize,
    pub max_refinement_depth: usize,
}

impl MonteCarloSummary {
    pub fn standard_error(&self) -> f64 {
        (self.variance / self.counts.len() as f64).sqrt()
    }

    pub fn variance_ratio(&self) -> f64 {
        self.variance / self.theoretical_variance
    }

    pub fn check_flag_rate(&self) -> Result<()> {
        if self.flag_rate > MAX_FLAG_RATE {
            return Err(Error::FlagRateExceeded {
                rate: self.flag_rate,
                limit: MAX_FLAG_RATE,
            });
        }
        Ok(())
    }

    /// Recompute the Kolmogorov distance against a limit-law sample.
    pub fn attach_limit_sample(&mut self, sample: &[f64]) -> Result<()> {
        self.ks.limit_sample = Some(ks_distance(&self.standardized, &Reference::Empirical(sample))?);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize, serde::Deserialize)]
pub struct CampaignSettings {
    pub trials: usize,
    pub seed: u64,
    pub samples_per_wavelength: f64,
    pub refine_tol: f64,
}

impl CampaignSettings {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            trials,
            seed,
            samples_per_wavelength: crate::field::DEFAULT_SAMPLES_PER_WAVELENGTH,
            refine_tol: 1e-12,
        }
    }
}

/// Per-trial crossing counts; trial `i` uses stream `i` of `seed`.
pub fn trial_counts(
    level: &EnergyLevel,
    curve: &UnitSpeedCurve,
    settings: &CampaignSettings,
) -> Vec<CrossingCount> {
    let basis = ProcessBasis::new(level, curve, settings.samples_per_wavelength);
    (0..settings.trials)
        .into_par_iter()
        .map(|i| {
            let sample = sample_coefficients(level, settings.seed, i as u64);
            let process = basis.process(&sample, curve);
            let mut c = count_zeros(&process, settings.refine_tol);
            c.roots = Vec::new();
            c
        })
        .collect()
}

pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().copied().collect::<CompensatedSum>().value() / n;
    let ss = xs
        .iter()
        .map(|x| (x - mean) * (x - mean))
        .collect::<CompensatedSum>()
        .value();
    (mean, ss / (n - 1.0))
}

/// Monte Carlo campaign without the flag-rate check.
pub fn run_campaign_unchecked(
    level: &EnergyLevel,
    curve: &UnitSpeedCurve,
    settings: &CampaignSettings,
) -> Result<MonteCarloSummary> {
    let results = trial_counts(level, curve, settings);
    let mut counts = Vec::with_capacity(results.len());
    let mut flagged = Vec::new();
    let mut depth = 0;
    for (i, c) in results.iter().enumerate() {
        depth = depth.max(c.refinement_depth);
        if c.is_flagged() {
            flagged.push(i);
        } else {
            counts.push(c.count);
        }
    }
    let xs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    if xs.len() < 2 {
        return Err(Error::TooFewSamples {
            need: 2,
            got: xs.len(),
        });
    }
    let (mean, variance) = mean_and_variance(&xs);
    let sd = variance.sqrt();
    let theoretical_mean = expected_count(level.n, curve.length);
    let regime = regime_of(curve);
    let theoretical_variance = variance_prediction(level, curve, regime)?;
    let standardized: Vec<f64> = xs.iter().map(|x| (x - theoretical_mean) / sd).collect();
    let standardized_empirical: Vec<f64> = xs.iter().map(|x| (x - mean) / sd).collect();
    let ks = if standardized.len() >= 100 {
        KsDistances {
            normal: ks_distance(&standardized, &Reference::Normal)?,
            static_circle: ks_distance(&standardized, &Reference::StaticCircle)?,
            limit_sample: None,
        }
    } else {
        KsDistances {
            normal: f64::NAN,
            static_circle: f64::NAN,
            limit_sample: None,
        }
    };
    Ok(MonteCarloSummary {
        n: level.n,
        lattice_count: level.count,
        curve_id: curve.id(),
        length: curve.length,
        trials: settings.trials,
        seed: settings.seed,
        samples_per_wavelength: settings.samples_per_wavelength,
        odd_counts: counts.iter().filter(|c| *c % 2 == 1).count(),
        counts,
        flag_rate: flagged.len() as f64 / settings.trials as f64,
        flagged_trials: flagged,
        mean,
        variance,
        theoretical_mean,
        regime,
        theoretical_variance,
        standardized,
        standardized_empirical,
        ks,
        max_refinement_depth: depth,
    })
}

/// Monte Carlo campaign; fails when more than 0.1% of trials are flagged.
pub fn run_campaign(
    level: &EnergyLevel,
    curve: &UnitSpeedCurve,
    settings: &CampaignSettings,
) -> Result<MonteCarloSummary> {
    let s = run_campaign_unchecked(level, curve, settings)?;
    s.check_flag_rate()?;
    Ok(s)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResolutionStability {
    pub trials: usize,
    pub identical: usize,
    pub flagged: usize,
}

impl ResolutionStability {
    pub fn identical_fraction(&self) -> f64 {
        self.identical as f64 / self.trials as f64
    }

    pub fn flag_rate(&self) -> f64 {
        self.flagged as f64 / self.trials as f64
    }
}

/// Compare counts at the given grid density with counts at twice the density.
pub fn resolution_stability(
    level: &EnergyLevel,
    curve: &UnitSpeedCurve,
    settings: &CampaignSettings,
) -> ResolutionStability {
    let coarse = trial_counts(level, curve, settings);
    let fine_settings = CampaignSettings {
        samples_per_wavelength: 2.0 * settings.samples_per_wavelength,
        ..*settings
    };
    let fine = trial_counts(level, curve, &fine_settings);
    ResolutionStability {
        trials: settings.trials,
        identical: coarse
            .iter()
            .zip(&fine)
            .filter(|(a, b)| a.count == b.count)
            .count(),
        flagged: coarse.iter().filter(|c| c.is_flagged()).count(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{build_unit_speed, CurveSpec, DEFAULT_NODES};
    use crate::field::evaluate_restricted;
    use crate::lattice::enumerate_level;
    use std::f64::consts::TAU;

    fn synthetic<'a>(
        closed: bool,
        m: usize,
        f: impl Fn(f64) -> (f64, f64) + Send + Sync + 'a,
        bw: f64,
    ) -> RestrictedProcess<'a> {
        RestrictedProcess::from_fn(1.0, closed, m, bw, 1.0, f)
    }

    #[test]
    fn constant_sign_has_no_zeros() {
        let p = synthetic(true, 64, |t| (2.0 + (TAU * t).sin(), TAU * (TAU * t).cos()), TAU);
        let c = count_zeros(&p, 1e-12);
        assert_eq!(c.count, 0);
        assert!(!c.is_flagged());
    }

    #[test]
    fn sine_has_fourteen_zeros() {
        let w = TAU * 7.0;
        let p = synthetic(true, 140, move |t| ((w * t).sin(), w * (w * t).cos()), w);
        let c = count_zeros(&p, 1e-13);
        assert_eq!(c.count, 14);
        for r in &c.roots {
            let d = (14.0 * r - (14.0 * r).round()).abs() / 14.0;
            assert!(d < 1e-12, "root {r}");
        }
    }

    #[test]
    fn near_tangency_is_resolved() {
        // double-humped: minimum 1e-7 above zero, and 1e-7 below zero
        for (shift, expected) in [(1e-7, 0), (-1e-7, 2)] {
            let w = TAU;
            let p = synthetic(
                true,
                16,
                move |t| (1.0 - (w * (t - 0.013)).cos() + shift, w * (w * (t - 0.013)).sin()),
                w,
            );
            let c = count_zeros(&p, 1e-14);
            assert_eq!(c.count, expected, "shift {shift}");
            assert!(!c.is_flagged());
            assert!(c.refinement_depth > 0);
        }
    }

    #[test]
    fn exact_tangency_is_flagged() {
        let w = TAU;
        let p = synthetic(true, 16, move |t| (1.0 - (w * (t - 0.013)).cos(), w * (w * (t - 0.013)).sin()), w);
        let c = count_zeros(&p, 1e-14);
        assert!(c.is_flagged());
        assert!(matches!(c.checked(), Err(Error::UnresolvedTangency(_))));
    }

    #[test]
    fn open_curve_counts_inside_interval() {
        let w = TAU * 3.0;
        let p = synthetic(false, 100, move |t| ((w * t + 0.1).sin(), w * (w * t + 0.1).cos()), w);
        // zeros of sin(6πt + 0.1) in [0,1]: 6πt + 0.1 = kπ for k = 1..=6
        assert_eq!(count_zeros(&p, 1e-12).count, 6);
    }

    #[test]
    fn expected_count_values() {
        assert!((expected_count(25, 1.0) - 50f64.sqrt()).abs() < 1e-15);
        assert!((expected_count(1, 1.0) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(expected_count(9, 0.0), 0.0);
    }

    #[test]
    fn ks_examples() {
        let mut rng = crate::field::trial_rng(3, 0);
        let normals: Vec<f64> = (0..100_000)
            .map(|_| rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, &mut rng))
            .collect();
        assert!(ks_distance(&normals, &Reference::Normal).unwrap() < 0.01);
        let circle: Vec<f64> = normals
            .chunks_exact(2)
            .map(|z| 1.0 - 0.5 * (z[0] * z[0] + z[1] * z[1]))
            .collect();
        assert!(ks_distance(&circle, &Reference::StaticCircle).unwrap() < 0.01);
        assert!(ks_distance(&[0.0; 200], &Reference::Normal).unwrap() >= 0.5);
        assert!(ks_distance(&circle[..1000], &Reference::Empirical(&circle[1000..])).unwrap() < 0.06);
        assert!(matches!(
            ks_distance(&[0.0; 10], &Reference::Normal),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn variance_prediction_regimes() {
        let level = enumerate_level(25).unwrap();
        let circle = build_unit_speed(&CurveSpec::circle(0.2), DEFAULT_NODES).unwrap();
        let ellipse = build_unit_speed(&CurveSpec::ellipse(0.25, 0.15), DEFAULT_NODES).unwrap();
        let generic_circle = variance_prediction(&level, &circle, Regime::Generic).unwrap();
        let l = circle.length;
        assert!(generic_circle.abs() < 1e-8 * l * l);
        assert!(matches!(
            variance_prediction(&level, &ellipse, Regime::Static),
            Err(Error::RegimeMismatch { .. })
        ));
        let mu = spectral_measure(&level);
        let le = ellipse.length;
        let expected = (4.0 * B_functional(&ellipse, &mu) - le * le) * 25.0 / 12.0;
        let got = variance_prediction(&level, &ellipse, Regime::Generic).unwrap();
        assert!((got - expected).abs() < 1e-14);
    }

    #[test]
    fn random_process_counts_are_even_and_stable() {
        let level = enumerate_level(65).unwrap();
        let curve = build_unit_speed(&CurveSpec::circle(0.2), DEFAULT_NODES).unwrap();
        for i in 0..20 {
            let s = sample_coefficients(&level, 99, i);
            let a = count_zeros(&evaluate_restricted(&s, &level, &curve, 20.0), 1e-12);
            let b = count_zeros(&evaluate_restricted(&s, &level, &curve, 80.0), 1e-12);
            assert_eq!(a.count % 2, 0);
            assert_eq!(a.count, b.count);
            let p = evaluate_restricted(&s, &level, &curve, 20.0);
            for r in &a.roots {
                assert!(p.eval(*r).0.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn campaign_is_deterministic() {
        let level = enumerate_level(5).unwrap();
        let curve = build_unit_speed(&CurveSpec::circle(0.2), DEFAULT_NODES).unwrap();
        let s = CampaignSettings::new(200, 42);
        let a = run_campaign(&level, &curve, &s).unwrap();
        let b = run_campaign(&level, &curve, &s).unwrap();
        assert_eq!(a.counts, b.counts);
        assert_eq!(a.trials, a.counts.len() + a.flagged_trials.len());
    }
}
