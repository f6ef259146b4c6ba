//! Lattice points on circles of radius `√n`, their angular measures and the
//! additive-combinatorics sums that control off-diagonal error terms.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on `N_n` for the tuple-sum diagnostics.
pub const DEFAULT_TUPLE_CAP: usize = 64;

/// Number of equispaced nodes standing in for the uniform measure. Integrals of
/// trigonometric polynomials of degree below this are exact.
pub const UNIFORM_NODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticePoint {
    pub x: i64,
    pub y: i64,
}

impl LatticePoint {
    pub const fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }

    pub fn norm_sq(&self) -> i64 {
        self.x * self.x + self.y * self.y
    }

    /// Angle in `[0, 2π)`.
    pub fn angle(&self) -> f64 {
        let a = (self.y as f64).atan2(self.x as f64);
        if a < 0.0 {
            a + TAU
        } else {
            a
        }
    }

    /// Unit direction `λ/|λ|`.
    pub fn direction(&self) -> [f64; 2] {
        let r = (self.norm_sq() as f64).sqrt();
        [self.x as f64 / r, self.y as f64 / r]
    }
}

impl std::ops::Neg for LatticePoint {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// An admissible energy level `E_n = 4π²n` with its lattice point set.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyLevel {
    pub n: u64,
    pub eigenvalue: f64,
    /// All of `Λ_n`, sorted by angle in `[0, 2π)`.
    pub points: Vec<LatticePoint>,
    /// `Λ_n⁺`: points with `y > 0`, plus `(√n, 0)` when `n` is a perfect square.
    pub half_points: Vec<LatticePoint>,
    pub count: usize,
}

impl EnergyLevel {
    /// `α = 2π²n`, the variance of the derivative of the restricted process.
    pub fn alpha(&self) -> f64 {
        2.0 * PI * PI * self.n as f64
    }

    pub fn sqrt_eigenvalue(&self) -> f64 {
        self.eigenvalue.sqrt()
    }

    /// For every point of `points`: the index of `±λ` in `half_points` and
    /// whether `λ` is the negated representative.
    pub fn half_index_map(&self) -> Vec<(usize, bool)> {
        let index: HashMap<LatticePoint, usize> = self
            .half_points
            .iter()
            .enumerate()
            .map(|(i, p)| (*p, i))
            .collect();
        self.points
            .iter()
            .map(|p| match index.get(p) {
                Some(&i) => (i, false),
                None => (index[&-*p], true),
            })
            .collect()
    }
}

/// True iff `n` is a sum of two squares: every prime `≡ 3 (mod 4)` divides `n`
/// to an even power.
pub fn is_representable(n: u64) -> bool {
    if n == 0 {
        return true;
    }
    let mut m = n;
    while m.is_multiple_of(2) {
        m /= 2;
    }
    let mut p = 3u64;
    while p * p <= m {
        if m.is_multiple_of(p) {
            let mut e = 0;
            while m.is_multiple_of(p) {
                m /= p;
                e += 1;
            }
            if p % 4 == 3 && e % 2 == 1 {
                return false;
            }
        }
        p += 2;
    }
    // leftover m is 1 or a prime
    m % 4 != 3
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// Enumerate `Λ_n` in angular order.
pub fn enumerate_level(n: u64) -> Result<EnergyLevel> {
    if n == 0 || !is_representable(n) {
        return Err(Error::NotRepresentable(n));
    }
    let s = isqrt(n) as i64;
    let mut points = Vec::new();
    for x in -s..=s {
        let rest = n as i64 - x * x;
        let y = isqrt(rest as u64) as i64;
        if y * y == rest {
            points.push(LatticePoint::new(x, y));
            if y != 0 {
                points.push(LatticePoint::new(x, -y));
            }
        }
    }
    points.sort_by(|a, b| a.angle().total_cmp(&b.angle()));
    let half_points = points
        .iter()
        .copied()
        .filter(|p| p.y > 0 || (p.y == 0 && p.x > 0))
        .collect();
    Ok(EnergyLevel {
        n,
        eigenvalue: 4.0 * PI * PI * n as f64,
        count: points.len(),
        points,
        half_points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub angle: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MeasureKind {
    Atomic { atoms: Vec<Atom> },
    Uniform,
    Cilleruelo,
    TiltedCilleruelo,
}

/// A probability measure on the unit circle, invariant under rotation by `π/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMeasure {
    pub kind: MeasureKind,
    pub fourth_coefficient: Complex64,
}

impl SpectralMeasure {
    fn from_kind(kind: MeasureKind) -> Self {
        let mut m = Self {
            kind,
            fourth_coefficient: Complex64::new(0.0, 0.0),
        };
        m.fourth_coefficient = mu_hat(&m, 4);
        m
    }

    pub fn atomic(atoms: Vec<Atom>) -> Self {
        Self::from_kind(MeasureKind::Atomic { atoms })
    }

    pub fn uniform() -> Self {
        Self::from_kind(MeasureKind::Uniform)
    }

    /// `τ₀ = ¼(δ_{±1} + δ_{±i})`.
    pub fn cilleruelo() -> Self {
        Self::from_kind(MeasureKind::Cilleruelo)
    }

    /// `τ₀` rotated by `π/4`.
    pub fn tilted_cilleruelo() -> Self {
        Self::from_kind(MeasureKind::TiltedCilleruelo)
    }

    /// Atoms of the measure; the uniform measure is replaced by
    /// [`UNIFORM_NODES`] equispaced equal-weight atoms.
    pub fn atoms(&self) -> Vec<Atom> {
        let quarter = |offset: f64| {
            (0..4)
                .map(|j| Atom {
                    angle: offset + j as f64 * FRAC_PI_2,
                    weight: 0.25,
                })
                .collect()
        };
        match &self.kind {
            MeasureKind::Atomic { atoms } => atoms.clone(),
            MeasureKind::Uniform => (0..UNIFORM_NODES)
                .map(|j| Atom {
                    angle: TAU * j as f64 / UNIFORM_NODES as f64,
                    weight: 1.0 / UNIFORM_NODES as f64,
                })
                .collect(),
            MeasureKind::Cilleruelo => quarter(0.0),
            MeasureKind::TiltedCilleruelo => quarter(FRAC_PI_4),
        }
    }

    /// Real part of `μ̂(4)`; exact for conjugation-symmetric measures.
    pub fn mu_hat4(&self) -> f64 {
        self.fourth_coefficient.re
    }
}

/// `μ_n = (1/N) Σ δ_{λ/√n}`.
pub fn spectral_measure(level: &EnergyLevel) -> SpectralMeasure {
    let w = 1.0 / level.count as f64;
    SpectralMeasure::atomic(
        level
            .points
            .iter()
            .map(|p| Atom {
                angle: p.angle(),
                weight: w,
            })
            .collect(),
    )
}

/// `μ̂(k) = ∫ z^{-k} dμ(z)`.
pub fn mu_hat(measure: &SpectralMeasure, k: i64) -> Complex64 {
    if k == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if matches!(measure.kind, MeasureKind::Uniform) {
        return Complex64::new(0.0, 0.0);
    }
    measure
        .atoms()
        .iter()
        .map(|a| a.weight * Complex64::from_polar(1.0, -(k as f64) * a.angle))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeparationStats {
    pub min_sep: f64,
    pub is_delta_separated: bool,
}

/// Minimal pairwise distance in `Λ_n` and the `δ`-separation flag
/// `min_sep ≥ n^{1/4+δ}` (implied constant 1).
pub fn separation_stats(level: &EnergyLevel, delta: f64) -> SeparationStats {
    let mut best = i64::MAX;
    for (i, p) in level.points.iter().enumerate() {
        for q in &level.points[i + 1..] {
            let dx = p.x - q.x;
            let dy = p.y - q.y;
            best = best.min(dx * dx + dy * dy);
        }
    }
    let min_sep = (best as f64).sqrt();
    let threshold = (level.n as f64).powf(0.25 + delta);
    SeparationStats {
        min_sep,
        is_delta_separated: min_sep >= threshold,
    }
}

type SumCounts = HashMap<(i64, i64), u64>;

fn pair_sums(level: &EnergyLevel) -> SumCounts {
    let mut c = SumCounts::with_capacity(level.count * level.count);
    for p in &level.points {
        for q in &level.points {
            *c.entry((p.x + q.x, p.y + q.y)).or_default() += 1;
        }
    }
    c
}

fn triple_sums(level: &EnergyLevel, pairs: &SumCounts) -> SumCounts {
    let mut c = SumCounts::with_capacity(pairs.len() * 4);
    for (&(vx, vy), &m) in pairs {
        for p in &level.points {
            *c.entry((vx + p.x, vy + p.y)).or_default() += m;
        }
    }
    c
}

fn partial_sums(level: &EnergyLevel, order: usize, cap: usize) -> Result<SumCounts> {
    if level.count > cap {
        return Err(Error::LevelTooLarge {
            count: level.count,
            cap,
        });
    }
    let pairs = pair_sums(level);
    match order {
        4 => Ok(pairs),
        6 => Ok(triple_sums(level, &pairs)),
        _ => panic!("tuple order must be 4 or 6, got {order}"),
    }
}

/// `|S_order(n)|`: ordered tuples in `Λ_n^order` summing to zero.
pub fn spectral_correlations(level: &EnergyLevel, order: usize, cap: usize) -> Result<u64> {
    let c = partial_sums(level, order, cap)?;
    Ok(c.iter()
        .map(|(&(x, y), &m)| m * c.get(&(-x, -y)).copied().unwrap_or(0))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OffDiagonal {
    pub min_nonzero_norm: f64,
    /// `N^{-2} Σ 1/‖Σλ‖` (order 4) or `N^{-4} Σ 1/‖Σλ‖` (order 6) over
    /// tuples with non-zero sum.
    pub reciprocal_sum: f64,
}

/// Minimal non-zero tuple-sum norm and the normalized reciprocal sum.
pub fn offdiagonal_sums(level: &EnergyLevel, order: usize, cap: usize) -> Result<OffDiagonal> {
    let c: Vec<((i64, i64), u64)> = partial_sums(level, order, cap)?.into_iter().collect();
    let mut min_sq = i64::MAX;
    let mut acc = 0.0f64;
    for (i, &((ax, ay), ma)) in c.iter().enumerate() {
        let mut row = 0.0f64;
        // pairs (i, j) with j > i twice, plus the diagonal j == i once
        for &((bx, by), mb) in &c[i..] {
            let sx = ax + bx;
            let sy = ay + by;
            let sq = sx * sx + sy * sy;
            if sq == 0 {
                continue;
            }
            min_sq = min_sq.min(sq);
            row += (mb as f64) / (sq as f64).sqrt();
        }
        let (dx, dy) = (2 * ax, 2 * ay);
        let diag_sq = dx * dx + dy * dy;
        let diag = if diag_sq == 0 {
            0.0
        } else {
            ma as f64 / (diag_sq as f64).sqrt()
        };
        acc += ma as f64 * (2.0 * row - diag);
    }
    let nf = level.count as f64;
    let norm = match order {
        4 => nf * nf,
        _ => nf.powi(4),
    };
    Ok(OffDiagonal {
        min_nonzero_norm: if min_sq == i64::MAX {
            f64::INFINITY
        } else {
            (min_sq as f64).sqrt()
        },
        reciprocal_sum: acc / norm,
    })
}

/// `(1/N) Σ ⟨z, λ/|λ|⟩² − |z|²/2`; zero for every `z`.
pub fn direction_identity_check(level: &EnergyLevel, z: [f64; 2]) -> f64 {
    let s: f64 = level
        .points
        .iter()
        .map(|p| {
            let d = p.direction();
            let ip = z[0] * d[0] + z[1] * d[1];
            ip * ip
        })
        .sum();
    s / level.count as f64 - 0.5 * (z[0] * z[0] + z[1] * z[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_representable(n: u64) -> bool {
        let s = isqrt(n);
        (0..=s).any(|a| {
            let r = n - a * a;
            let b = isqrt(r);
            b * b == r
        })
    }

    #[test]
    fn representability_small_cases() {
        assert!(!is_representable(3));
        assert!(is_representable(25));
        assert!(is_representable(1105));
        assert!(!is_representable(21));
        assert!(is_representable(2));
        for n in 1..3000 {
            assert_eq!(is_representable(n), brute_force_representable(n), "n = {n}");
        }
    }

    #[test]
    fn level_one_and_two() {
        let l1 = enumerate_level(1).unwrap();
        assert_eq!(
            l1.points,
            vec![
                LatticePoint::new(1, 0),
                LatticePoint::new(0, 1),
                LatticePoint::new(-1, 0),
                LatticePoint::new(0, -1)
            ]
        );
        assert_eq!(l1.half_points, vec![LatticePoint::new(1, 0), LatticePoint::new(0, 1)]);
        let l2 = enumerate_level(2).unwrap();
        assert_eq!(l2.count, 4);
        assert!(l2.points.iter().all(|p| p.x.abs() == 1 && p.y.abs() == 1));
    }

    #[test]
    fn level_25_has_twelve_points() {
        let l = enumerate_level(25).unwrap();
        assert_eq!(l.count, 12);
        for p in [(5, 0), (0, 5), (-5, 0), (0, -5), (3, 4), (4, 3), (-3, 4), (3, -4)] {
            assert!(l.points.contains(&LatticePoint::new(p.0, p.1)));
        }
        assert!(l.half_points.contains(&LatticePoint::new(5, 0)));
        assert!(!l.half_points.contains(&LatticePoint::new(-5, 0)));
        assert_eq!(l.half_points.len(), 6);
    }

    #[test]
    fn not_representable_is_an_error() {
        assert_eq!(enumerate_level(3).unwrap_err(), Error::NotRepresentable(3));
    }

    #[test]
    fn measure_atoms_for_small_levels() {
        let m1 = spectral_measure(&enumerate_level(1).unwrap());
        let angles: Vec<f64> = m1.atoms().iter().map(|a| a.angle).collect();
        for (a, e) in angles.iter().zip([0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2]) {
            assert!((a - e).abs() < 1e-15);
        }
        assert!(m1.atoms().iter().all(|a| a.weight == 0.25));
        let m2 = spectral_measure(&enumerate_level(2).unwrap());
        for (a, j) in m2.atoms().iter().zip([1.0, 3.0, 5.0, 7.0]) {
            assert!((a.angle - j * FRAC_PI_4).abs() < 1e-15);
        }
        let m25 = spectral_measure(&enumerate_level(25).unwrap());
        assert_eq!(m25.atoms().len(), 12);
        assert!(m25.atoms().iter().all(|a| (a.weight - 1.0 / 12.0).abs() < 1e-17));
    }

    #[test]
    fn mu_hat_examples() {
        assert_eq!(mu_hat(&SpectralMeasure::uniform(), 4), Complex64::new(0.0, 0.0));
        let m1 = spectral_measure(&enumerate_level(1).unwrap());
        assert!((mu_hat(&m1, 4) - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        // ((3-4i)/5)^4 = (-527+336i)/625: 8 atoms at (±3,±4),(±4,±3) give
        // -527/625 each, 4 axis atoms give 1 each.
        let m25 = spectral_measure(&enumerate_level(25).unwrap());
        let expected: f64 = (4.0 + 8.0 * (-527.0 / 625.0)) / 12.0;
        assert!((expected - (-1716.0 / 7500.0)).abs() < 1e-15);
        let got = mu_hat(&m25, 4);
        assert!((got.re - expected).abs() < 1e-14);
        assert!(got.im.abs() < 1e-14);
        assert!((SpectralMeasure::cilleruelo().mu_hat4() - 1.0).abs() < 1e-14);
        assert!((SpectralMeasure::tilted_cilleruelo().mu_hat4() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn separation_examples() {
        let s1 = separation_stats(&enumerate_level(1).unwrap(), 0.05);
        assert!((s1.min_sep - 2f64.sqrt()).abs() < 1e-15);
        assert!(s1.is_delta_separated);
        let s25 = separation_stats(&enumerate_level(25).unwrap(), 0.05);
        assert!((s25.min_sep - 2f64.sqrt()).abs() < 1e-15);
        assert!(!s25.is_delta_separated);
    }

    fn exhaustive_s4(level: &EnergyLevel) -> u64 {
        let p = &level.points;
        let mut c = 0;
        for a in p {
            for b in p {
                for d in p {
                    for e in p {
                        if a.x + b.x + d.x + e.x == 0 && a.y + b.y + d.y + e.y == 0 {
                            c += 1;
                        }
                    }
                }
            }
        }
        c
    }

    #[test]
    fn s4_matches_exhaustion_and_formula() {
        for (n, expected) in [(1, 36), (5, 168), (25, 396)] {
            let l = enumerate_level(n).unwrap();
            let hashed = spectral_correlations(&l, 4, DEFAULT_TUPLE_CAP).unwrap();
            assert_eq!(hashed, expected);
            assert_eq!(hashed, exhaustive_s4(&l));
            let nn = l.count as u64;
            assert_eq!(hashed, 3 * nn * (nn - 1));
        }
    }

    #[test]
    fn cap_is_enforced() {
        let l = enumerate_level(25).unwrap();
        assert_eq!(
            spectral_correlations(&l, 4, 8).unwrap_err(),
            Error::LevelTooLarge { count: 12, cap: 8 }
        );
        assert!(offdiagonal_sums(&l, 6, 8).is_err());
    }

    fn exhaustive_offdiag4(level: &EnergyLevel) -> (f64, f64) {
        let p = &level.points;
        let mut min_sq = i64::MAX;
        let mut acc = 0.0;
        for a in p {
            for b in p {
                for d in p {
                    for e in p {
                        let sx = a.x + b.x + d.x + e.x;
                        let sy = a.y + b.y + d.y + e.y;
                        let sq = sx * sx + sy * sy;
                        if sq > 0 {
                            min_sq = min_sq.min(sq);
                            acc += 1.0 / (sq as f64).sqrt();
                        }
                    }
                }
            }
        }
        let nf = p.len() as f64;
        ((min_sq as f64).sqrt(), acc / (nf * nf))
    }

    #[test]
    fn offdiagonal_order4_matches_exhaustion() {
        for n in [1, 2, 5, 25, 65] {
            let l = enumerate_level(n).unwrap();
            let got = offdiagonal_sums(&l, 4, DEFAULT_TUPLE_CAP).unwrap();
            let (min_norm, recip) = exhaustive_offdiag4(&l);
            assert!((got.min_nonzero_norm - min_norm).abs() < 1e-12, "n={n}");
            assert!((got.reciprocal_sum - recip).abs() < 1e-10 * recip, "n={n}");
            assert!(got.reciprocal_sum.is_finite());
        }
        let l1 = enumerate_level(1).unwrap();
        assert!((offdiagonal_sums(&l1, 4, 64).unwrap().min_nonzero_norm - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn offdiagonal_order6_matches_exhaustion_small() {
        let l = enumerate_level(5).unwrap();
        let p = &l.points;
        let mut acc = 0.0;
        let mut min_sq = i64::MAX;
        let idx: Vec<usize> = (0..p.len()).collect();
        for &a in &idx {
            for &b in &idx {
                for &c in &idx {
                    for &d in &idx {
                        for &e in &idx {
                            for &f in &idx {
                                let sx = p[a].x + p[b].x + p[c].x + p[d].x + p[e].x + p[f].x;
                                let sy = p[a].y + p[b].y + p[c].y + p[d].y + p[e].y + p[f].y;
                                let sq = sx * sx + sy * sy;
                                if sq > 0 {
                                    min_sq = min_sq.min(sq);
                                    acc += 1.0 / (sq as f64).sqrt();
                                }
                            }
                        }
                    }
                }
            }
        }
        let got = offdiagonal_sums(&l, 6, 64).unwrap();
        assert!((got.reciprocal_sum - acc / 8f64.powi(4)).abs() < 1e-10);
        assert!((got.min_nonzero_norm - (min_sq as f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn direction_identity_examples() {
        let l1 = enumerate_level(1).unwrap();
        assert!(direction_identity_check(&l1, [1.0, 0.0]).abs() < 1e-15);
        let l25 = enumerate_level(25).unwrap();
        assert!(direction_identity_check(&l25, [0.3, -1.7]).abs() < 1e-12);
        assert_eq!(direction_identity_check(&l25, [0.0, 0.0]), 0.0);
    }

    #[test]
    fn half_index_map_pairs_negatives() {
        let l = enumerate_level(65).unwrap();
        let map = l.half_index_map();
        for (p, &(i, neg)) in l.points.iter().zip(&map) {
            let h = l.half_points[i];
            assert_eq!(if neg { -h } else { h }, *p);
        }
    }
}
