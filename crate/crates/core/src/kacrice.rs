//! Two-point correlation of restricted zeros and the Kac–Rice variance.
//!
//! The double integrals over `[0, L]²` are computed on a tiling by `k × k`
//! squares of side `δ₀ = L/k` with `k = ⌊L√E/c₀⌋ + 1`. Each square carries
//! a tensor Gauss–Legendre rule; squares on the diagonal are split into two
//! triangles mapped to `(t, s = t₂ − t₁)` so the kink of `K₂` along the
//! diagonal sits on the boundary of the rule.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crossings::STATIC_TOL;
use crate::curve::{self, UnitSpeedCurve};
use crate::field::{covariance_from_frames, Covariance};
use crate::lattice::{spectral_measure, EnergyLevel};
use crate::quadrature::{gauss_legendre, CompensatedSum};
use crate::{Error, Result};

pub const DEFAULT_C0: f64 = 0.5;
pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const SINGULAR_THRESHOLD: f64 = 0.5;
pub const QUADRATURE_REL_TOL: f64 = 1e-6;
const RULE_ORDER: usize = 8;
const MAX_HALVINGS: usize = 6;
const MAX_REFINEMENTS: usize = 4;
const BAND_SCALE: f64 = 1e-3;

/// Covariance of the restricted process and its derivatives at `(t₁, t₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPoint {
    pub t1: f64,
    pub t2: f64,
    pub r: f64,
    pub r1: f64,
    pub r2: f64,
    pub r12: f64,
}

impl CorrelationPoint {
    pub fn at(level: &EnergyLevel, curve: &UnitSpeedCurve, t1: f64, t2: f64) -> Self {
        let (p1, v1) = curve.frame_at(t1);
        let (p2, v2) = curve.frame_at(t2);
        Self::from_covariance(t1, t2, covariance_from_frames(level, p1, v1, p2, v2))
    }

    pub fn from_covariance(t1: f64, t2: f64, c: Covariance) -> Self {
        Self {
            t1,
            t2,
            r: c.r,
            r1: c.r1,
            r2: c.r2,
            r12: c.r12,
        }
    }

    /// Point with prescribed normalized covariances `(r, r₁/√α, r₂/√α, r₁₂/α)`.
    pub fn from_normalized(normalized: [f64; 4], alpha: f64) -> Self {
        let sa = alpha.sqrt();
        Self {
            t1: 0.0,
            t2: 0.0,
            r: normalized[0],
            r1: normalized[1] * sa,
            r2: normalized[2] * sa,
            r12: normalized[3] * alpha,
        }
    }

    pub fn normalized(&self, alpha: f64) -> [f64; 4] {
        let sa = alpha.sqrt();
        [self.r, self.r1 / sa, self.r2 / sa, self.r12 / alpha]
    }

    /// The same pair seen from `(t₂, t₁)`.
    pub fn swapped(&self) -> Self {
        Self {
            t1: self.t2,
            t2: self.t1,
            r: self.r,
            r1: self.r2,
            r2: self.r1,
            r12: self.r12,
        }
    }
}

/// One-point density `√(2n)`.
#[allow(non_snake_case)]
pub fn K1(n: u64) -> f64 {
    (2.0 * n as f64).sqrt()
}

fn k2_formula(r: f64, r1: f64, r2: f64, r12: f64, alpha: f64) -> Result<f64> {
    let one_minus = (1.0 - r) * (1.0 + r);
    if one_minus <= 0.0 {
        return Err(Error::NearDiagonal(r));
    }
    let d1 = alpha * one_minus - r1 * r1;
    let d2 = alpha * one_minus - r2 * r2;
    if d1 <= 0.0 || d2 <= 0.0 {
        return Err(Error::NonPositiveDiscriminant);
    }
    let mu = d1.sqrt() * d2.sqrt();
    let rho = ((r12 * one_minus + r * r1 * r2) / mu).clamp(-1.0, 1.0);
    let g = (1.0 - rho * rho).sqrt() + rho * rho.asin();
    Ok(mu * g / (PI * PI * one_minus * one_minus.sqrt()))
}

/// Exact two-point correlation, rejecting `|r| > 1 − ε`.
#[allow(non_snake_case)]
pub fn K2_exact(point: &CorrelationPoint, alpha: f64) -> Result<f64> {
    K2_exact_with(point, alpha, DEFAULT_EPSILON)
}

#[allow(non_snake_case)]
pub fn K2_exact_with(point: &CorrelationPoint, alpha: f64, epsilon: f64) -> Result<f64> {
    if point.r.abs() > 1.0 - epsilon {
        return Err(Error::NearDiagonal(point.r));
    }
    k2_formula(point.r, point.r1, point.r2, point.r12, alpha)
}

/// Fourth-order expansion of `K₂` in the normalized covariances.
#[allow(non_snake_case)]
pub fn K2_taylor(point: &CorrelationPoint, alpha: f64) -> f64 {
    let [x, a, b, c] = point.normalized(alpha);
    let (x2, a2, b2, c2) = (x * x, a * a, b * b, c * c);
    let poly = 1.0 + 0.5 * c2 + 0.5 * x2 - 0.5 * b2 - 0.5 * a2
        + 3.0 / 8.0 * x2 * x2
        + c2 * c2 / 24.0
        - b2 * b2 / 8.0
        - a2 * a2 / 8.0
        + c * x * a * b
        + 0.25 * a2 * b2
        - 0.75 * x2 * b2
        - 0.75 * x2 * a2
        + 0.25 * c2 * x2
        + 0.25 * b2 * c2
        + 0.25 * a2 * c2;
    alpha / (PI * PI) * poly
}

/// Integrand of the approximate variance for static curves, without the factor `n`.
pub fn approx_static_integrand(c: &Covariance, alpha: f64) -> f64 {
    let sa = alpha.sqrt();
    let (x, a, b, d) = (c.r, c.r1 / sa, c.r2 / sa, c.r12 / alpha);
    let (x2, a2, b2, d2) = (x * x, a * a, b * b, d * d);
    0.75 * x2 * x2 + d2 * d2 / 12.0 - 0.25 * b2 * b2 - 0.25 * a2 * a2
        + 2.0 * d * x * a * b
        + 0.5 * a2 * b2
        - 1.5 * x2 * b2
        - 1.5 * x2 * a2
        + 0.5 * d2 * x2
        + 0.5 * b2 * d2
        + 0.5 * a2 * d2
}

/// Per-node phases `2π⟨λ, γ(t)⟩` and slopes `2π⟨λ, γ̇(t)⟩` over the half set.
struct PhaseTable {
    width: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
    slope: Vec<f64>,
}

impl PhaseTable {
    fn new(level: &EnergyLevel, curve: &UnitSpeedCurve, ts: &[f64]) -> Self {
        let width = level.half_points.len();
        let mut cos = Vec::with_capacity(ts.len() * width);
        let mut sin = Vec::with_capacity(ts.len() * width);
        let mut slope = Vec::with_capacity(ts.len() * width);
        for &t in ts {
            let (p, v) = curve.frame_at(t);
            for q in &level.half_points {
                let (qx, qy) = (q.x as f64, q.y as f64);
                let (s, c) = (TAU * (qx * p[0] + qy * p[1])).sin_cos();
                cos.push(c);
                sin.push(s);
                slope.push(TAU * (qx * v[0] + qy * v[1]));
            }
        }
        Self {
            width,
            cos,
            sin,
            slope,
        }
    }

    fn covariance(&self, i: usize, j: usize, scale: f64) -> Covariance {
        let (a, b) = (i * self.width, j * self.width);
        let (mut r, mut r1, mut r2, mut r12) = (0.0, 0.0, 0.0, 0.0);
        for q in 0..self.width {
            let (c1, s1, d1) = (self.cos[a + q], self.sin[a + q], self.slope[a + q]);
            let (c2, s2, d2) = (self.cos[b + q], self.sin[b + q], self.slope[b + q]);
            let c = c1 * c2 + s1 * s2;
            let s = s1 * c2 - c1 * s2;
            r += c;
            r1 -= d1 * s;
            r2 += d2 * s;
            r12 += d1 * d2 * c;
        }
        Covariance {
            r: scale * r,
            r1: scale * r1,
            r2: scale * r2,
            r12: scale * r12,
        }
    }
}

fn square_count(length: f64, sqrt_e: f64, c0: f64) -> usize {
    (length * sqrt_e / c0).floor() as usize + 1
}

/// Tiling of `[0, L]²` into `k × k` squares with singular flags.
///
/// A square is singular when `|r| > 1/2` at one of its quadrature nodes or
/// at a point of a `4 × 4` interior grid. Diagonal squares are always singular.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SquarePartition {
    pub c0: f64,
    pub k: usize,
    pub delta0: f64,
    pub length: f64,
    singular: Vec<bool>,
}

impl SquarePartition {
    pub fn new(level: &EnergyLevel, curve: &UnitSpeedCurve, c0: f64) -> Self {
        let k = square_count(curve.length, level.sqrt_eigenvalue(), c0);
        let delta0 = curve.length / k as f64;
        let (x, _) = gauss_legendre(RULE_ORDER);
        let mut offsets: Vec<f64> = x.iter().map(|u| 0.5 * (u + 1.0)).collect();
        offsets.extend((0..4).map(|q| (q as f64 + 0.5) / 4.0));
        let per = offsets.len();
        let ts: Vec<f64> = (0..k)
            .flat_map(|i| offsets.iter().map(move |o| (i as f64 + o) * delta0))
            .collect();
        let table = PhaseTable::new(level, curve, &ts);
        let scale = 2.0 / level.count as f64;
        let rows: Vec<Vec<bool>> = (0..k)
            .into_par_iter()
            .map(|i| {
                (0..k)
                    .map(|j| {
                        if j <= i {
                            return i == j;
                        }
                        (0..per).any(|p| {
                            (0..per).any(|q| {
                                table.covariance(i * per + p, j * per + q, scale).r.abs()
                                    > SINGULAR_THRESHOLD
                            })
                        })
                    })
                    .collect()
            })
            .collect();
        let mut singular = vec![false; k * k];
        for i in 0..k {
            for j in i..k {
                let flag = rows[i][j];
                singular[i * k + j] = flag;
                singular[j * k + i] = flag;
            }
        }
        Self {
            c0,
            k,
            delta0,
            length: curve.length,
            singular,
        }
    }

    pub fn is_singular(&self, i: usize, j: usize) -> bool {
        self.singular[i * self.k + j]
    }

    pub fn singular_count(&self) -> usize {
        self.singular.iter().filter(|&&s| s).count()
    }

    pub fn singular_area(&self) -> f64 {
        self.singular_count() as f64 * self.delta0 * self.delta0
    }

    pub fn singular_fraction(&self) -> f64 {
        self.singular_area() / (self.length * self.length)
    }
}

/// Largest `|r|` over near-diagonal pairs `0 < |t₁ − t₂| < c₀/√E`.
pub fn near_diagonal_max_abs_r(level: &EnergyLevel, curve: &UnitSpeedCurve, c0: f64) -> f64 {
    const BASES: usize = 64;
    const OFFSETS: usize = 16;
    let reach = c0 / level.sqrt_eigenvalue();
    let mut worst: f64 = 0.0;
    for b in 0..BASES {
        let t1 = curve.length * (b as f64 + 0.5) / BASES as f64;
        for o in 1..=OFFSETS {
            let s = reach * o as f64 / (OFFSETS + 1) as f64;
            let t2 = t1 + s;
            if !curve.closed && t2 > curve.length {
                continue;
            }
            worst = worst.max(CorrelationPoint::at(level, curve, t1, t2).r.abs());
        }
    }
    worst
}

/// Picks `c₀` by halving from `start` until no near-diagonal pair has `r = ±1`.
pub fn validated_partition(level: &EnergyLevel, curve: &UnitSpeedCurve, start: f64) -> Result<(SquarePartition, usize)> {
    let mut c0 = start;
    for halvings in 0..=MAX_HALVINGS {
        if near_diagonal_max_abs_r(level, curve, c0) < 1.0 - 1e-10 {
            return Ok((SquarePartition::new(level, curve, c0), halvings));
        }
        c0 *= 0.5;
    }
    Err(Error::QuadratureNotConverged(format!(
        "no admissible c0 down to {c0:e}"
    )))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum SquareSet {
    All,
    Nonsingular,
}

/// Quadratic extrapolation of the diagonal band from samples at `h, 2h, 3h`.
#[derive(Clone, Copy)]
struct Band {
    h: f64,
}

impl Band {
    fn extrapolate(&self, s: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let h = self.h;
        let (y1, y2, y3) = (f(h), f(2.0 * h), f(3.0 * h));
        let u = s / h;
        y1 * (u - 2.0) * (u - 3.0) / 2.0 - y2 * (u - 1.0) * (u - 3.0) + y3 * (u - 1.0) * (u - 2.0) / 2.0
    }
}

struct Integrator<'a> {
    level: &'a EnergyLevel,
    curve: &'a UnitSpeedCurve,
    scale: f64,
    x: Vec<f64>,
    w: Vec<f64>,
}

impl<'a> Integrator<'a> {
    fn new(level: &'a EnergyLevel, curve: &'a UnitSpeedCurve) -> Self {
        let (x, w) = gauss_legendre(RULE_ORDER);
        Self {
            level,
            curve,
            scale: 2.0 / level.count as f64,
            x,
            w,
        }
    }

    fn pair(&self, t1: f64, t2: f64) -> Covariance {
        let (p1, v1) = self.curve.frame_at(t1);
        let (p2, v2) = self.curve.frame_at(t2);
        covariance_from_frames(self.level, p1, v1, p2, v2)
    }

    /// `∫∫ f` over the chosen squares, each subdivided `m × m`.
    ///
    /// `f` writes `dim` integrand values into its output slice; it returns
    /// `false` when it cannot be evaluated at the given covariance.
    fn integrate<F>(
        &self,
        partition: &SquarePartition,
        m: usize,
        set: SquareSet,
        band: Option<Band>,
        dim: usize,
        f: F,
    ) -> Result<Vec<f64>>
    where
        F: Fn(&Covariance, &mut [f64]) -> bool + Sync,
    {
        let k = partition.k;
        let fine = k * m;
        let h = partition.delta0 / m as f64;
        let ts: Vec<f64> = (0..fine)
            .flat_map(|i| {
                self.x
                    .iter()
                    .map(move |u| (i as f64 + 0.5 * (u + 1.0)) * h)
            })
            .collect();
        let table = PhaseTable::new(self.level, self.curve, &ts);
        let order = RULE_ORDER;
        let rows: Vec<Result<Vec<f64>>> = (0..fine)
            .into_par_iter()
            .map(|fi| {
                let mut acc = vec![CompensatedSum::default(); dim];
                let mut buf = vec![0.0; dim];
                let ci = fi / m;
                for fj in fi..fine {
                    let cj = fj / m;
                    if set == SquareSet::Nonsingular && partition.is_singular(ci, cj) {
                        continue;
                    }
                    if fi == fj {
                        self.diagonal_square(fi as f64 * h, h, band, &f, &mut buf, &mut acc)?;
                        continue;
                    }
                    let jac = 2.0 * 0.25 * h * h;
                    for p in 0..order {
                        for q in 0..order {
                            let c = table.covariance(fi * order + p, fj * order + q, self.scale);
                            if !f(&c, &mut buf) {
                                return Err(nonfinite(fi, fj));
                            }
                            let wq = jac * self.w[p] * self.w[q];
                            for (a, v) in acc.iter_mut().zip(&buf) {
                                a.add(wq * v);
                            }
                        }
                    }
                }
                Ok(acc.iter().map(|a| a.value()).collect())
            })
            .collect();
        let mut total = vec![CompensatedSum::default(); dim];
        for row in rows {
            for (t, v) in total.iter_mut().zip(row?) {
                t.add(v);
            }
        }
        Ok(total.iter().map(|t| t.value()).collect())
    }

    /// Both triangles of the diagonal square `[a, a+h]²`.
    fn diagonal_square<F>(
        &self,
        a: f64,
        h: f64,
        band: Option<Band>,
        f: &F,
        buf: &mut [f64],
        acc: &mut [CompensatedSum],
    ) -> Result<()>
    where
        F: Fn(&Covariance, &mut [f64]) -> bool,
    {
        let dim = buf.len();
        let mut tmp = vec![0.0; dim];
        for (p, &us) in self.x.iter().enumerate() {
            let s = 0.5 * (us + 1.0) * h;
            let span = h - s;
            for (q, &ut) in self.x.iter().enumerate() {
                let t1 = a + 0.5 * (ut + 1.0) * span;
                let weight = 2.0 * 0.25 * h * span * self.w[p] * self.w[q];
                match band {
                    Some(b) if s < b.h => {
                        for d in 0..dim {
                            let mut ok = true;
                            let v = b.extrapolate(s, |sv| {
                                ok &= f(&self.pair(t1, t1 + sv), &mut tmp);
                                tmp[d]
                            });
                            if !ok {
                                return Err(nonfinite(0, 0));
                            }
                            buf[d] = v;
                        }
                    }
                    _ => {
                        if !f(&self.pair(t1, t1 + s), buf) {
                            return Err(nonfinite(0, 0));
                        }
                    }
                }
                for (acc, v) in acc.iter_mut().zip(buf.iter()) {
                    acc.add(weight * v);
                }
            }
        }
        Ok(())
    }

    /// Repeats `integrate` with doubled subdivision until the change is
    /// below `QUADRATURE_REL_TOL` relative to `reference(result)`.
    fn converge<F, R>(
        &self,
        partition: &SquarePartition,
        set: SquareSet,
        band: Option<Band>,
        dim: usize,
        f: F,
        reference: R,
    ) -> Result<(Vec<f64>, usize, f64)>
    where
        F: Fn(&Covariance, &mut [f64]) -> bool + Sync,
        R: Fn(&[f64]) -> f64,
    {
        let mut m = 1;
        let mut prev = self.integrate(partition, m, set, band, dim, &f)?;
        for _ in 0..MAX_REFINEMENTS {
            m *= 2;
            let next = self.integrate(partition, m, set, band, dim, &f)?;
            let change = next
                .iter()
                .zip(&prev)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let rel = change / reference(&next).abs().max(f64::MIN_POSITIVE);
            if rel <= QUADRATURE_REL_TOL {
                return Ok((next, m, rel));
            }
            prev = next;
        }
        Err(Error::QuadratureNotConverged(format!(
            "relative change above {QUADRATURE_REL_TOL:e} after {m}x subdivision"
        )))
    }
}

fn nonfinite(i: usize, j: usize) -> Error {
    Error::QuadratureNotConverged(format!("integrand undefined in square ({i}, {j})"))
}

fn k2_integrand(alpha: f64, k1_sq: f64) -> impl Fn(&Covariance, &mut [f64]) -> bool + Sync {
    move |c, out| match k2_formula(c.r, c.r1, c.r2, c.r12, alpha) {
        Ok(v) => {
            out[0] = v - k1_sq;
            true
        }
        Err(_) => false,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KacRiceDiagnostics {
    pub c0_requested: f64,
    pub c0: f64,
    pub halvings: usize,
    pub k: usize,
    pub delta0: f64,
    pub singular_squares: usize,
    pub singular_fraction: f64,
    /// Singular area times `N²`.
    pub singular_area_scaled: f64,
    pub subdivision: usize,
    pub quadrature_rel_change: f64,
    pub band_width: f64,
    /// Change of the result when the extrapolated band is halved.
    pub band_sensitivity: f64,
    pub pair_integral: f64,
    pub expected_count: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KacRiceVariance {
    pub variance: f64,
    pub singular_area: f64,
    pub diagnostics: KacRiceDiagnostics,
}

/// `Var Z = ∫∫ (K₂ − K₁²) + E Z`, integrated on the square partition.
pub fn variance_numeric(level: &EnergyLevel, curve: &UnitSpeedCurve, c0: f64) -> Result<KacRiceVariance> {
    let (partition, halvings) = validated_partition(level, curve, c0)?;
    let alpha = level.alpha();
    let k1 = K1(level.n);
    let k1_sq = k1 * k1;
    let area = curve.length * curve.length;
    let integrator = Integrator::new(level, curve);
    let band = Band {
        h: BAND_SCALE / level.sqrt_eigenvalue(),
    };
    let reference = |v: &[f64]| v[0] + k1_sq * area;
    let (value, m, rel) = integrator.converge(
        &partition,
        SquareSet::All,
        Some(band),
        1,
        k2_integrand(alpha, k1_sq),
        reference,
    )?;
    let halved = integrator.integrate(
        &partition,
        m,
        SquareSet::All,
        Some(Band { h: 0.5 * band.h }),
        1,
        k2_integrand(alpha, k1_sq),
    )?;
    let expected = k1 * curve.length;
    let n2 = (level.count * level.count) as f64;
    Ok(KacRiceVariance {
        variance: value[0] + expected,
        singular_area: partition.singular_area(),
        diagnostics: KacRiceDiagnostics {
            c0_requested: c0,
            c0: partition.c0,
            halvings,
            k: partition.k,
            delta0: partition.delta0,
            singular_squares: partition.singular_count(),
            singular_fraction: partition.singular_fraction(),
            singular_area_scaled: partition.singular_area() * n2,
            subdivision: m,
            quadrature_rel_change: rel,
            band_width: band.h,
            band_sensitivity: (halved[0] - value[0]).abs(),
            pair_integral: value[0] + k1_sq * area,
            expected_count: expected,
        },
    })
}

/// `n ∫∫` of the fourth-order static integrand over nonsingular squares.
pub fn variance_approx_static(level: &EnergyLevel, curve: &UnitSpeedCurve) -> Result<f64> {
    let i = curve::I_gamma(curve).norm();
    if i >= STATIC_TOL * curve.length {
        return Err(Error::RegimeMismatch { abs_i: i });
    }
    let (partition, _) = validated_partition(level, curve, DEFAULT_C0)?;
    approx_static_on(level, curve, &partition)
}

pub fn approx_static_on(level: &EnergyLevel, curve: &UnitSpeedCurve, partition: &SquarePartition) -> Result<f64> {
    let alpha = level.alpha();
    let integrator = Integrator::new(level, curve);
    let floor = 1e-14 * partition.length * partition.length;
    let (value, _, _) = integrator.converge(
        partition,
        SquareSet::Nonsingular,
        None,
        1,
        |c, out| {
            out[0] = approx_static_integrand(c, alpha);
            out[0].is_finite()
        },
        |v| v[0].abs().max(floor),
    )?;
    Ok(level.n as f64 * value[0])
}

/// Which moment integrals to include.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentOrder {
    Second,
    Fourth,
    Sixth,
}

impl MomentOrder {
    pub fn from_power(p: u32) -> Option<Self> {
        match p {
            2 => Some(Self::Second),
            4 => Some(Self::Fourth),
            6 => Some(Self::Sixth),
            _ => None,
        }
    }

    pub fn power(self) -> u32 {
        match self {
            Self::Second => 2,
            Self::Fourth => 4,
            Self::Sixth => 6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentRow {
    pub name: String,
    pub order: u32,
    pub integral: f64,
    /// Leading-order value; absent for the sixth moments, which are `o(N⁻²)`.
    pub prediction: Option<f64>,
    pub ratio: Option<f64>,
    /// `integral · N^(order/2)`.
    pub scaled: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentTable {
    pub n: u64,
    pub lattice_count: usize,
    pub length: f64,
    pub rows: Vec<MomentRow>,
}

impl MomentTable {
    pub fn row(&self, name: &str) -> Option<&MomentRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

type MomentFn = fn(f64, f64, f64, f64) -> f64;

/// Second moments use `E = 4π²n` for the derivatives, the rest use `α = 2π²n`.
fn moment_catalogue(order: MomentOrder) -> Vec<(&'static str, MomentFn)> {
    match order {
        MomentOrder::Second => vec![
            ("r^2", |x, _, _, _| x * x),
            ("(r1/sqrtE)^2", |_, a, _, _| 0.5 * a * a),
            ("(r12/E)^2", |_, _, _, d| 0.25 * d * d),
        ],
        MomentOrder::Fourth => vec![
            ("r^4", |x, _, _, _| x.powi(4)),
            ("(r1/sqrt_alpha)^4", |_, a, _, _| a.powi(4)),
            ("(r12/alpha)^4", |_, _, _, d| d.powi(4)),
            ("(r12/alpha) r (r1/sqrt_alpha) (r2/sqrt_alpha)", |x, a, b, d| d * x * a * b),
            ("(r1/sqrt_alpha)^2 (r2/sqrt_alpha)^2", |_, a, b, _| a * a * b * b),
            ("r^2 (r2/sqrt_alpha)^2", |x, _, b, _| x * x * b * b),
            ("r^2 (r12/alpha)^2", |x, _, _, d| x * x * d * d),
            ("(r1/sqrt_alpha)^2 (r12/alpha)^2", |_, a, _, d| a * a * d * d),
        ],
        MomentOrder::Sixth => vec![
            ("r^6", |x, _, _, _| x.powi(6)),
            ("(r1/sqrt_alpha)^6", |_, a, _, _| a.powi(6)),
            ("(r12/alpha)^6", |_, _, _, d| d.powi(6)),
        ],
    }
}

/// Numeric `∫∫` over `[0, L]²` of powers of the normalized covariances,
/// paired with their leading-order values.
pub fn moment_integrals(level: &EnergyLevel, curve: &UnitSpeedCurve, orders: &[MomentOrder]) -> Result<MomentTable> {
    let mut entries: Vec<(MomentOrder, &'static str, MomentFn)> = Vec::new();
    for &o in orders {
        if entries.iter().any(|e| e.0 == o) {
            continue;
        }
        entries.extend(moment_catalogue(o).into_iter().map(|(name, f)| (o, name, f)));
    }
    let alpha = level.alpha();
    let sa = alpha.sqrt();
    let partition = SquarePartition::new(level, curve, DEFAULT_C0);
    let integrator = Integrator::new(level, curve);
    let fns: Vec<MomentFn> = entries.iter().map(|e| e.2).collect();
    let floor = 1e-14 * curve.length * curve.length;
    let (values, _, _) = integrator.converge(
        &partition,
        SquareSet::All,
        None,
        fns.len(),
        |c, out| {
            let (x, a, b, d) = (c.r, c.r1 / sa, c.r2 / sa, c.r12 / alpha);
            for (o, f) in out.iter_mut().zip(&fns) {
                *o = f(x, a, b, d);
            }
            out.iter().all(|v| v.is_finite())
        },
        |v| v.iter().fold(floor, |m, x| m.max(x.abs())),
    )?;

    let nn = level.count as f64;
    let l2 = curve.length * curve.length;
    let needs_functionals = entries.iter().any(|e| e.0 != MomentOrder::Sixth);
    let (a_fun, b_fun, f_fun) = if needs_functionals {
        let measure = spectral_measure(level);
        (
            curve::A_functional(curve, &measure),
            curve::B_functional(curve, &measure),
            curve::F_functional(curve, level),
        )
    } else {
        (0.0, 0.0, 0.0)
    };
    let inv2 = 1.0 / (nn * nn);
    let rows = entries
        .iter()
        .zip(values)
        .map(|((o, name, _), integral)| {
            let prediction = match (*o, *name) {
                (MomentOrder::Second, "r^2") => Some(l2 / nn),
                (MomentOrder::Second, "(r1/sqrtE)^2") => Some(l2 / (2.0 * nn)),
                (MomentOrder::Second, _) => Some(b_fun / nn),
                (MomentOrder::Fourth, "r^4") | (MomentOrder::Fourth, "(r1/sqrt_alpha)^4") => Some(3.0 * l2 * inv2),
                (MomentOrder::Fourth, "(r12/alpha)^4") => Some(48.0 * a_fun * inv2),
                (MomentOrder::Fourth, "(r12/alpha) r (r1/sqrt_alpha) (r2/sqrt_alpha)") => Some(-4.0 * f_fun * inv2),
                (MomentOrder::Fourth, "(r1/sqrt_alpha)^2 (r2/sqrt_alpha)^2") => Some((l2 + 8.0 * f_fun) * inv2),
                (MomentOrder::Fourth, "r^2 (r2/sqrt_alpha)^2") => Some(l2 * inv2),
                (MomentOrder::Fourth, "r^2 (r12/alpha)^2") => Some((4.0 * b_fun + 8.0 * f_fun) * inv2),
                (MomentOrder::Fourth, _) => Some(4.0 * b_fun * inv2),
                (MomentOrder::Sixth, _) => None,
            };
            let scale = if *o == MomentOrder::Second { nn } else { nn * nn };
            MomentRow {
                name: (*name).to_string(),
                order: o.power(),
                integral,
                prediction,
                ratio: prediction.map(|p| integral / p),
                scaled: integral * scale,
            }
        })
        .collect();
    Ok(MomentTable {
        n: level.n,
        lattice_count: level.count,
        length: curve.length,
        rows,
    })
}

/// Largest `|∂r/∂t₁| / √E` over a `grid × grid` sample of pairs.
pub fn lipschitz_constant(level: &EnergyLevel, curve: &UnitSpeedCurve, grid: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..grid {
        for j in 0..grid {
            let t1 = curve.length * (i as f64 + 0.5) / grid as f64;
            let t2 = curve.length * (j as f64 + 0.25) / grid as f64;
            let p = CorrelationPoint::at(level, curve, t1, t2);
            worst = worst.max(p.r1.abs());
        }
    }
    worst / level.sqrt_eigenvalue()
}
