//! Arithmetic random waves, their restriction to a curve and the exact
//! covariance of the restricted process.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::curve::UnitSpeedCurve;
use crate::lattice::{EnergyLevel, LatticePoint};

/// Default grid density in samples per wavelength `1/√E_n`.
pub const DEFAULT_SAMPLES_PER_WAVELENGTH: f64 = 20.0;

/// Random stream keyed by an experiment seed and a trial index.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One draw of the coefficients on `Λ_n⁺`; `a_{−λ} = conj(a_λ)` is implied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveSample {
    pub n: u64,
    pub half_points: Vec<LatticePoint>,
    pub coeffs: Vec<Complex64>,
    pub seed: u64,
    pub stream: u64,
}

/// Standard complex Gaussian: independent real and imaginary parts of variance ½.
pub fn standard_complex_gaussian<R: rand::Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let x: f64 = StandardNormal.sample(rng);
    let y: f64 = StandardNormal.sample(rng);
    Complex64::new(x, y) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn sample_coefficients(level: &EnergyLevel, seed: u64, stream: u64) -> WaveSample {
    let mut rng = trial_rng(seed, stream);
    WaveSample {
        n: level.n,
        half_points: level.half_points.clone(),
        coeffs: level
            .half_points
            .iter()
            .map(|_| standard_complex_gaussian(&mut rng))
            .collect(),
        seed,
        stream,
    }
}

impl WaveSample {
    fn norm(&self) -> f64 {
        // N = 2 |Λ⁺|
        2.0 / ((2 * self.coeffs.len()) as f64).sqrt()
    }

    /// `T_n(x)` from the half-set representation.
    pub fn evaluate(&self, x: [f64; 2]) -> f64 {
        self.norm()
            * self
                .half_points
                .iter()
                .zip(&self.coeffs)
                .map(|(p, a)| {
                    let ph = TAU * (p.x as f64 * x[0] + p.y as f64 * x[1]);
                    (a * Complex64::from_polar(1.0, ph)).re
                })
                .sum::<f64>()
    }

    /// `(1/√N) Σ_{Λ_n} a_λ e_λ(x)` summed over the full set.
    pub fn evaluate_full(&self, x: [f64; 2]) -> Complex64 {
        let nf = (2 * self.coeffs.len()) as f64;
        let mut s = Complex64::new(0.0, 0.0);
        for (p, a) in self.half_points.iter().zip(&self.coeffs) {
            for (q, c) in [(*p, *a), (-*p, a.conj())] {
                let ph = TAU * (q.x as f64 * x[0] + q.y as f64 * x[1]);
                s += c * Complex64::from_polar(1.0, ph);
            }
        }
        s / nf.sqrt()
    }

    /// Value and gradient of `T_n` at `x`.
    pub fn value_and_gradient(&self, x: [f64; 2]) -> (f64, [f64; 2]) {
        let mut v = 0.0;
        let mut g = [0.0; 2];
        for (p, a) in self.half_points.iter().zip(&self.coeffs) {
            let ph = TAU * (p.x as f64 * x[0] + p.y as f64 * x[1]);
            let z = a * Complex64::from_polar(1.0, ph);
            v += z.re;
            // d/dx Re(a e^{iph}) = -Im(a e^{iph}) dph/dx
            g[0] -= TAU * p.x as f64 * z.im;
            g[1] -= TAU * p.y as f64 * z.im;
        }
        let k = self.norm();
        (k * v, [k * g[0], k * g[1]])
    }

    /// `(f_n(t), f′_n(t))` at arc length `t`.
    pub fn restricted_at(&self, curve: &UnitSpeedCurve, t: f64) -> (f64, f64) {
        let (p, v) = curve.frame_at(t);
        let (f, g) = self.value_and_gradient(p);
        (f, g[0] * v[0] + g[1] * v[1])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("wave sample serializes")
    }
}

/// `f_n` and `f′_n` on a grid, together with an oracle for off-grid values.
pub struct RestrictedProcess<'a> {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub derivatives: Vec<f64>,
    pub length: f64,
    pub closed: bool,
    /// Bound on the angular frequency content of `f_n` in `t`.
    pub bandwidth: f64,
    /// Bound on `sup |f_n|`.
    pub amplitude: f64,
    oracle: Box<dyn Fn(f64) -> (f64, f64) + Send + Sync + 'a>,
}

impl<'a> RestrictedProcess<'a> {
    /// Tabulate `f` (returning value and derivative) on `m` equal cells of `[0, length]`.
    pub fn from_fn<F>(length: f64, closed: bool, m: usize, bandwidth: f64, amplitude: f64, f: F) -> Self
    where
        F: Fn(f64) -> (f64, f64) + Send + Sync + 'a,
    {
        let grid = grid_points(length, closed, m);
        let (values, derivatives) = grid.iter().map(|&t| f(t)).unzip();
        Self {
            grid,
            values,
            derivatives,
            length,
            closed,
            bandwidth,
            amplitude,
            oracle: Box::new(f),
        }
    }

    pub fn eval(&self, t: f64) -> (f64, f64) {
        (self.oracle)(t)
    }
}

fn grid_points(length: f64, closed: bool, m: usize) -> Vec<f64> {
    let h = length / m as f64;
    let count = if closed { m } else { m + 1 };
    (0..count).map(|i| i as f64 * h).collect()
}

/// Number of grid cells for a given density.
pub fn grid_cells(level: &EnergyLevel, length: f64, samples_per_wavelength: f64) -> usize {
    (length * level.sqrt_eigenvalue() * samples_per_wavelength).ceil() as usize
}

fn max_curvature(curve: &UnitSpeedCurve) -> f64 {
    curve
        .table
        .curvature
        .iter()
        .fold(0.0f64, |m, k| m.max(k.abs()))
}

/// Phases `e^{2πi⟨λ,γ(t_i)⟩}` and slopes `2π⟨λ,γ̇(t_i)⟩` on a fixed grid,
/// shared by every trial on the same level and curve.
pub struct ProcessBasis {
    pub grid: Vec<f64>,
    pub length: f64,
    pub closed: bool,
    pub bandwidth: f64,
    half: usize,
    norm: f64,
    phases: Vec<Complex64>,
    slopes: Vec<f64>,
}

impl ProcessBasis {
    pub fn new(level: &EnergyLevel, curve: &UnitSpeedCurve, samples_per_wavelength: f64) -> Self {
        let m = grid_cells(level, curve.length, samples_per_wavelength);
        let grid = grid_points(curve.length, curve.closed, m);
        let half = level.half_points.len();
        let mut phases = Vec::with_capacity(grid.len() * half);
        let mut slopes = Vec::with_capacity(grid.len() * half);
        for &t in &grid {
            let (p, v) = curve.frame_at(t);
            for q in &level.half_points {
                let (qx, qy) = (q.x as f64, q.y as f64);
                phases.push(Complex64::from_polar(1.0, TAU * (qx * p[0] + qy * p[1])));
                slopes.push(TAU * (qx * v[0] + qy * v[1]));
            }
        }
        Self {
            grid,
            length: curve.length,
            closed: curve.closed,
            bandwidth: level.sqrt_eigenvalue() + 2.0 * max_curvature(curve),
            half,
            norm: 2.0 / (level.count as f64).sqrt(),
            phases,
            slopes,
        }
    }

    /// Values and derivatives on the grid for one set of coefficients.
    pub fn evaluate(&self, coeffs: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(coeffs.len(), self.half);
        let mut values = Vec::with_capacity(self.grid.len());
        let mut derivs = Vec::with_capacity(self.grid.len());
        for (ph, sl) in self
            .phases
            .chunks_exact(self.half)
            .zip(self.slopes.chunks_exact(self.half))
        {
            let mut v = 0.0;
            let mut d = 0.0;
            for ((e, s), a) in ph.iter().zip(sl).zip(coeffs) {
                let z = a * e;
                v += z.re;
                d -= s * z.im;
            }
            values.push(self.norm * v);
            derivs.push(self.norm * d);
        }
        (values, derivs)
    }

    pub fn process<'a>(&self, sample: &'a WaveSample, curve: &'a UnitSpeedCurve) -> RestrictedProcess<'a> {
        let (values, derivatives) = self.evaluate(&sample.coeffs);
        RestrictedProcess {
            grid: self.grid.clone(),
            values,
            derivatives,
            length: self.length,
            closed: self.closed,
            bandwidth: self.bandwidth,
            amplitude: amplitude_bound(sample),
            oracle: Box::new(move |t| sample.restricted_at(curve, t)),
        }
    }
}

fn amplitude_bound(sample: &WaveSample) -> f64 {
    sample.norm() * sample.coeffs.iter().map(|a| a.norm()).sum::<f64>()
}

/// `f_n` and `f′_n` on a grid with `samples_per_wavelength` points per `1/√E_n`.
pub fn evaluate_restricted<'a>(
    sample: &'a WaveSample,
    level: &EnergyLevel,
    curve: &'a UnitSpeedCurve,
    samples_per_wavelength: f64,
) -> RestrictedProcess<'a> {
    ProcessBasis::new(level, curve, samples_per_wavelength).process(sample, curve)
}

/// `r` and its first derivatives at a pair of curve points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Covariance {
    pub r: f64,
    pub r1: f64,
    pub r2: f64,
    pub r12: f64,
}

/// Covariance data from positions and unit tangents at `t₁`, `t₂`.
pub fn covariance_from_frames(
    level: &EnergyLevel,
    p1: [f64; 2],
    v1: [f64; 2],
    p2: [f64; 2],
    v2: [f64; 2],
) -> Covariance {
    let dx = [p1[0] - p2[0], p1[1] - p2[1]];
    let (mut r, mut r1, mut r2, mut r12) = (0.0, 0.0, 0.0, 0.0);
    for q in &level.half_points {
        let (qx, qy) = (q.x as f64, q.y as f64);
        let (s, c) = (TAU * (qx * dx[0] + qy * dx[1])).sin_cos();
        let d1 = TAU * (qx * v1[0] + qy * v1[1]);
        let d2 = TAU * (qx * v2[0] + qy * v2[1]);
        r += c;
        r1 -= d1 * s;
        r2 += d2 * s;
        r12 += d1 * d2 * c;
    }
    let w = 2.0 / level.count as f64;
    Covariance {
        r: w * r,
        r1: w * r1,
        r2: w * r2,
        r12: w * r12,
    }
}

pub fn covariance_bundle(level: &EnergyLevel, curve: &UnitSpeedCurve, t1: f64, t2: f64) -> Covariance {
    let (p1, v1) = curve.frame_at(t1);
    let (p2, v2) = curve.frame_at(t2);
    covariance_from_frames(level, p1, v1, p2, v2)
}

/// `α = 2π²n`.
pub fn alpha(n: u64) -> f64 {
    2.0 * PI * PI * n as f64
}
