//! Wiener chaos projections of the nodal count and the static limit laws.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, Matrix3, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::crossings::{expected_count, STATIC_TOL};
use crate::curve::{is_static, LimitCoefficients, UnitSpeedCurve};
use crate::error::{Error, Result};
use crate::field::{sample_coefficients, trial_rng, WaveSample};
use crate::lattice::{EnergyLevel, SpectralMeasure};
use crate::quadrature::CompositeRule;

/// Clipping threshold for negative kernel eigenvalues.
pub const EIGEN_CLIP: f64 = 1e-10;
/// Default process grid for the `I(μ)` sampler.
pub const DEFAULT_PROCESS_GRID: usize = 512;

/// Probabilists' Hermite polynomial `H_k(x)`.
pub fn hermite(k: usize, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, x);
    if k == 0 {
        return h0;
    }
    for j in 1..k {
        let h2 = x * h1 - j as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|j| j as f64).product()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChaosCoefficients {
    /// `b_{2q}` indexed by `q`.
    pub b: Vec<f64>,
    /// `a_{2ℓ}` indexed by `ℓ`.
    pub a: Vec<f64>,
}

/// `b_{2q} = H_{2q}(0)/((2q)!√(2π))`, `a_{2ℓ} = √(2/π)(−1)^{ℓ+1}/(2^ℓ ℓ!(2ℓ−1))`.
pub fn chaos_coefficients(max_q: usize) -> ChaosCoefficients {
    let root = (TAU).sqrt();
    let b = (0..=max_q)
        .map(|q| hermite(2 * q, 0.0) / (factorial(2 * q) * root))
        .collect();
    let a = (0..=max_q)
        .map(|l| {
            let sign = if l % 2 == 1 { 1.0 } else { -1.0 };
            (2.0 / PI).sqrt() * sign / (2f64.powi(l as i32) * factorial(l) * (2.0 * l as f64 - 1.0))
        })
        .collect();
    ChaosCoefficients { b, a }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WFunctionals {
    pub w1: f64,
    pub int_w2: f64,
    /// `(1/L)∫W₂ − W₁`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChaosProjection {
    pub z0: f64,
    pub z2a: f64,
    pub z2b: f64,
    /// Fourth-chaos diagonal term via the `X, Y, Z` combination.
    pub z4a: f64,
    /// Same term via the centred-square form; only meaningful for static curves.
    pub z4a_static: f64,
    pub w: WFunctionals,
}

impl ChaosProjection {
    pub fn z2(&self) -> f64 {
        self.z2a + self.z2b
    }
}

/// Precomputed curve and level data shared by all projections.
pub struct ChaosProjector {
    n: u64,
    count: usize,
    length: f64,
    is_static: bool,
    /// `E(γ; λ̂)` per half point.
    energy: Vec<f64>,
    /// `G_hk = 4∫⟨λ̂_h, γ̇⟩²⟨λ̂_k, γ̇⟩² dt` over half points.
    gram: Vec<f64>,
    /// `J(λ, λ′)` over the full set, zero on the diagonal.
    j: Vec<Complex64>,
    half_map: Vec<(usize, bool)>,
    /// `4(1/N)Σ_Λ ∫⟨λ̂, γ̇⟩⁴ dt`.
    quartic: f64,
}

impl ChaosProjector {
    pub fn new(level: &EnergyLevel, curve: &UnitSpeedCurve) -> Self {
        let tb = &curve.table;
        let h = level.half_points.len();
        let sq_rows: Vec<Vec<f64>> = level
            .half_points
            .iter()
            .map(|p| {
                let d = p.direction();
                tb.tangent
                    .iter()
                    .map(|v| (d[0] * v[0] + d[1] * v[1]).powi(2))
                    .collect()
            })
            .collect();
        let energy: Vec<f64> = sq_rows
            .iter()
            .map(|r| tb.integrate(|i| r[i]))
            .collect();
        let mut gram = vec![0.0; h * h];
        for a in 0..h {
            for b in a..h {
                let g = 4.0 * tb.integrate(|i| sq_rows[a][i] * sq_rows[b][i]);
                gram[a * h + b] = g;
                gram[b * h + a] = g;
            }
        }
        let quartic = 2.0 / level.count as f64 * (0..h).map(|a| gram[a * h + a]).sum::<f64>();
        let nn = level.count;
        let dirs: Vec<[f64; 2]> = level.points.iter().map(|p| p.direction()).collect();
        let mut j = vec![Complex64::new(0.0, 0.0); nn * nn];
        for a in 0..nn {
            for b in 0..nn {
                if a == b {
                    continue;
                }
                let (p, q) = (level.points[a], level.points[b]);
                let dv = [(p.x - q.x) as f64, (p.y - q.y) as f64];
                let (da, db) = (dirs[a], dirs[b]);
                let mut s = Complex64::new(0.0, 0.0);
                for i in 0..tb.len() {
                    let v = tb.tangent[i];
                    let x = tb.position[i];
                    let amp = 2.0 * (da[0] * v[0] + da[1] * v[1]) * (db[0] * v[0] + db[1] * v[1]) - 1.0;
                    let ph = TAU * (dv[0] * x[0] + dv[1] * x[1]);
                    s += Complex64::from_polar(tb.weight[i] * amp, ph);
                }
                j[a * nn + b] = s;
            }
        }
        Self {
            n: level.n,
            count: nn,
            length: curve.length,
            is_static: is_static(curve, STATIC_TOL),
            energy,
            gram,
            j,
            half_map: level.half_index_map(),
            quartic,
        }
    }

    fn half(&self) -> usize {
        self.energy.len()
    }

    fn prefactor(&self) -> f64 {
        // √α/(2π)
        (2.0 * PI * PI * self.n as f64).sqrt() / TAU
    }

    pub fn w_functionals(&self, sample: &WaveSample) -> WFunctionals {
        let scale = 1.0 / (self.count as f64 / 2.0).sqrt();
        let mut w1 = 0.0;
        let mut int_w2 = 0.0;
        for (a, e) in sample.coeffs.iter().zip(&self.energy) {
            let c = a.norm_sqr() - 1.0;
            w1 += c;
            int_w2 += 2.0 * c * e;
        }
        let (w1, int_w2) = (scale * w1, scale * int_w2);
        WFunctionals {
            w1,
            int_w2,
            residual: int_w2 / self.length - w1,
        }
    }

    /// `(z2a, z2b)`.
    pub fn project_2(&self, sample: &WaveSample) -> (f64, f64) {
        let k = self.prefactor();
        let nf = self.count as f64;
        let l = self.length;
        let z2a: f64 = sample
            .coeffs
            .iter()
            .zip(&self.energy)
            .map(|(a, e)| (a.norm_sqr() - 1.0) * (2.0 * e - l))
            .sum::<f64>()
            * 2.0
            / nf;
        let full: Vec<Complex64> = self
            .half_map
            .iter()
            .map(|&(i, neg)| {
                let a = sample.coeffs[i];
                if neg {
                    a.conj()
                } else {
                    a
                }
            })
            .collect();
        let mut z2b = Complex64::new(0.0, 0.0);
        for (x, ax) in full.iter().enumerate() {
            let row = &self.j[x * self.count..(x + 1) * self.count];
            let inner: Complex64 = row.iter().zip(&full).map(|(jv, b)| jv * b.conj()).sum();
            z2b += ax * inner;
        }
        (k * z2a, k * z2b.re / nf)
    }

    /// `(z4a, z4a_static)`.
    pub fn project_4(&self, sample: &WaveSample) -> (f64, f64) {
        let h = self.half();
        let nf = self.count as f64;
        let l = self.length;
        let scale = 1.0 / (nf / 2.0).sqrt();
        let c: Vec<f64> = sample
            .coeffs
            .iter()
            .map(|a| scale * (a.norm_sqr() - 1.0))
            .collect();
        let mut int_w2_sq = 0.0;
        for a in 0..h {
            let row = &self.gram[a * h..(a + 1) * h];
            int_w2_sq += c[a] * row.iter().zip(&c).map(|(g, cb)| g * cb).sum::<f64>();
        }
        let w = self.w_functionals(sample);
        let x = 6.0 * l / nf * (w.w1 * w.w1 - 1.0);
        let y = 6.0 / nf * (int_w2_sq - self.quartic);
        let z = 2.0 / nf * (w.w1 * w.int_w2 - l);
        let root = (2.0 * self.n as f64).sqrt();
        let z4a = root / 24.0 * (3.0 * x - y - 6.0 * z);
        let mean_w2 = w.int_w2 / l;
        let centred = int_w2_sq - l * mean_w2 * mean_w2;
        let z4a_static = root / (4.0 * nf) * (-centred + self.quartic - l);
        (z4a, z4a_static)
    }

    pub fn project(&self, sample: &WaveSample) -> ChaosProjection {
        let (z2a, z2b) = self.project_2(sample);
        let (z4a, z4a_static) = self.project_4(sample);
        ChaosProjection {
            z0: expected_count(self.n, self.length),
            z2a,
            z2b,
            z4a,
            z4a_static,
            w: self.w_functionals(sample),
        }
    }

    /// Projection with the route-agreement check for static curves.
    pub fn project_checked(&self, sample: &WaveSample, tol: f64) -> Result<ChaosProjection> {
        let p = self.project(sample);
        if self.is_static {
            let delta = (p.z4a - p.z4a_static).abs();
            if delta > tol * (1.0 + p.z4a.abs()) {
                return Err(Error::RouteDisagreement { delta, tol });
            }
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FourthChaosVariance {
    /// `(n/4N²)(16A + 24B − 7L²)`.
    pub asymptotic: f64,
    /// Exact value for exponential `|a_λ|²`, including the diagonal
    /// fourth-cumulant term.
    pub finite: f64,
}

impl ChaosProjector {
    /// Variance of `z4a`, asymptotic and exact at this level.
    pub fn z4a_variance(&self) -> FourthChaosVariance {
        let h = self.half();
        let l = self.length;
        let nf = self.count as f64;
        // K(λ, λ′) = ∫(3 − 4⟨λ̂,γ̇⟩² − 4⟨λ̂,γ̇⟩²⟨λ̂′,γ̇⟩²) dt
        let k = |a: usize, b: usize| 3.0 * l - 4.0 * self.energy[a] - self.gram[a * h + b];
        let (mut pair, mut diag) = (0.0, 0.0);
        for a in 0..h {
            for b in 0..h {
                pair += k(a, b) * (k(a, b) + k(b, a));
            }
            diag += k(a, a).powi(2);
        }
        let s = nf * nf / 4.0;
        let scale = 2.0 * self.n as f64 / 576.0 * 36.0 / (nf * nf);
        FourthChaosVariance {
            asymptotic: scale * pair / s,
            finite: scale * (pair + 6.0 * diag) / s,
        }
    }
}

pub fn project_2(sample: &WaveSample, level: &EnergyLevel, curve: &UnitSpeedCurve) -> (f64, f64) {
    ChaosProjector::new(level, curve).project_2(sample)
}

pub fn project_4(sample: &WaveSample, level: &EnergyLevel, curve: &UnitSpeedCurve) -> Result<f64> {
    ChaosProjector::new(level, curve)
        .project_checked(sample, 1e-8)
        .map(|p| p.z4a)
}

#[allow(non_snake_case)]
pub fn W_functionals(sample: &WaveSample, level: &EnergyLevel, curve: &UnitSpeedCurve) -> WFunctionals {
    ChaosProjector::new(level, curve).w_functionals(sample)
}

/// `W₂ᵗ` at the table nodes of the curve.
pub fn w2_profile(sample: &WaveSample, level: &EnergyLevel, curve: &UnitSpeedCurve) -> Vec<f64> {
    let scale = 1.0 / (level.count as f64 / 2.0).sqrt();
    curve
        .table
        .tangent
        .iter()
        .map(|v| {
            level
                .half_points
                .iter()
                .zip(&sample.coeffs)
                .map(|(p, a)| {
                    let d = p.direction();
                    2.0 * (a.norm_sqr() - 1.0) * (d[0] * v[0] + d[1] * v[1]).powi(2)
                })
                .sum::<f64>()
                * scale
        })
        .collect()
}

/// Projections for trials `0..trials`, on the same streams as the crossing campaign.
pub fn chaos_campaign(
    level: &EnergyLevel,
    curve: &UnitSpeedCurve,
    trials: usize,
    seed: u64,
) -> Vec<ChaosProjection> {
    let projector = ChaosProjector::new(level, curve);
    (0..trials)
        .into_par_iter()
        .map(|i| projector.project(&sample_coefficients(level, seed, i as u64)))
        .collect()
}

/// How the quadratic-form limit is normalised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MRoute {
    /// `(a₁(Z₁²−1) + a₂(Z₂²−1) + a₃Z₁Z₂)/√(16A − L²)`.
    Literal,
    /// `−(a₁(Z₁²−1) + a₂(Z₂²−1) + a₃Z₁Z₂)/√(2(16A − L²))`, the law of the
    /// standardised fourth chaos.
    Reconciled,
}

/// One draw of the quadratic-form limit `M(μ)`.
#[allow(non_snake_case)]
pub fn sample_limit_M<R: Rng + ?Sized>(
    coeffs: LimitCoefficients,
    denom: f64,
    route: MRoute,
    rng: &mut R,
) -> Result<f64> {
    if !(denom > 0.0) {
        return Err(Error::DegenerateDenominator(denom));
    }
    let z1: f64 = StandardNormal.sample(rng);
    let z2: f64 = StandardNormal.sample(rng);
    let q = coeffs.a1 * (z1 * z1 - 1.0) + coeffs.a2 * (z2 * z2 - 1.0) + coeffs.a3 * z1 * z2;
    Ok(match route {
        MRoute::Literal => q / denom.sqrt(),
        MRoute::Reconciled => -q / (2.0 * denom).sqrt(),
    })
}

/// Gaussian process `W₂(μ)` on a quadrature grid, factorised once.
pub struct ISampler {
    weights: Vec<f64>,
    length: f64,
    /// Columns `√λ_k v_k` of the retained eigenpairs.
    factors: Vec<Vec<f64>>,
    deterministic: f64,
    denom: f64,
    pub grid_size: usize,
    pub clipped: usize,
}

fn kernel_rule(curve: &UnitSpeedCurve, grid_size: usize) -> CompositeRule {
    CompositeRule::new(0.0, curve.length, grid_size.div_ceil(8).max(1), 8)
}

fn kernel_matrix(curve: &UnitSpeedCurve, measure: &SpectralMeasure, rule: &CompositeRule) -> DMatrix<f64> {
    let atoms = measure.atoms();
    let tangents: Vec<[f64; 2]> = rule.nodes.iter().map(|&t| curve.frame_at(t).1).collect();
    let m = tangents.len();
    let proj: Vec<Vec<f64>> = atoms
        .iter()
        .map(|a| {
            let (s, c) = a.angle.sin_cos();
            tangents.iter().map(|v| (c * v[0] + s * v[1]).powi(2)).collect()
        })
        .collect();
    DMatrix::from_fn(m, m, |i, j| {
        4.0 * atoms
            .iter()
            .zip(&proj)
            .map(|(a, p)| a.weight * p[i] * p[j])
            .sum::<f64>()
    })
}

/// `E ∫(W₂ − mean)²` on a grid, from the kernel.
fn expected_centred_square(k: &DMatrix<f64>, w: &[f64], length: f64) -> f64 {
    let m = w.len();
    let diag: f64 = (0..m).map(|i| w[i] * k[(i, i)]).sum();
    let mut cross = 0.0;
    for i in 0..m {
        for j in 0..m {
            cross += w[i] * w[j] * k[(i, j)];
        }
    }
    diag - cross / length
}

impl ISampler {
    /// Factorise the kernel on `grid_size` nodes, doubling until the mean of
    /// the centred square shifts by less than 1e-3.
    pub fn new(curve: &UnitSpeedCurve, measure: &SpectralMeasure, grid_size: usize) -> Result<Self> {
        let l = curve.length;
        let a = crate::curve::A_functional(curve, measure);
        let denom = 16.0 * a - l * l;
        if !(denom > 0.0) {
            return Err(Error::DegenerateDenominator(denom));
        }
        let mut size = grid_size.max(8);
        let mut rule = kernel_rule(curve, size);
        let mut k = kernel_matrix(curve, measure, &rule);
        let mut mean = expected_centred_square(&k, &rule.weights, l);
        for _ in 0..4 {
            let r2 = kernel_rule(curve, 2 * size);
            let k2 = kernel_matrix(curve, measure, &r2);
            let m2 = expected_centred_square(&k2, &r2.weights, l);
            if (m2 - mean).abs() < 1e-3 {
                break;
            }
            size *= 2;
            rule = r2;
            k = k2;
            mean = m2;
        }
        let eig = SymmetricEigen::new(k);
        let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(*v));
        let mut factors = Vec::new();
        let mut clipped = 0;
        for (idx, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam < -EIGEN_CLIP * top.max(1.0) {
                return Err(Error::KernelNotPsd(lam));
            }
            if lam <= 1e-12 * top {
                clipped += 1;
                continue;
            }
            let v = eig.eigenvectors.column(idx);
            factors.push(v.iter().map(|x| x * lam.sqrt()).collect());
        }
        let tb = &curve.table;
        let deterministic = measure
            .atoms()
            .iter()
            .map(|at| {
                let (s, c) = at.angle.sin_cos();
                at.weight
                    * 4.0
                    * tb.integrate(|i| {
                        let v = tb.tangent[i];
                        (c * v[0] + s * v[1]).powi(4)
                    })
            })
            .sum::<f64>()
            - l;
        Ok(Self {
            weights: rule.weights,
            length: l,
            factors,
            deterministic,
            denom,
            grid_size: size,
            clipped,
        })
    }

    /// `E ∫(W₂ − mean)²` minus the deterministic term; zero when the
    /// functional is centred.
    pub fn mean_offset(&self) -> f64 {
        let mut e = 0.0;
        let mut mean_sq = 0.0;
        for f in &self.factors {
            let m: f64 = f.iter().zip(&self.weights).map(|(x, w)| x * w).sum::<f64>() / self.length;
            e += f.iter().zip(&self.weights).map(|(x, w)| w * (x - m).powi(2)).sum::<f64>();
            mean_sq += m * m;
        }
        let _ = mean_sq;
        e - self.deterministic
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let m = self.weights.len();
        let mut w = vec![0.0; m];
        for f in &self.factors {
            let xi: f64 = StandardNormal.sample(rng);
            for (wi, fi) in w.iter_mut().zip(f) {
                *wi += xi * fi;
            }
        }
        let mean: f64 = w.iter().zip(&self.weights).map(|(x, q)| x * q).sum::<f64>() / self.length;
        let sq: f64 = w
            .iter()
            .zip(&self.weights)
            .map(|(x, q)| q * (x - mean).powi(2))
            .sum();
        (-sq + self.deterministic) / (2.0 * self.denom).sqrt()
    }
}

/// One draw of `I(μ)`.
#[allow(non_snake_case)]
pub fn sample_limit_I<R: Rng + ?Sized>(
    curve: &UnitSpeedCurve,
    measure: &SpectralMeasure,
    grid_size: usize,
    rng: &mut R,
) -> Result<f64> {
    Ok(ISampler::new(curve, measure, grid_size)?.sample(rng))
}

/// A limit-law sampler with its inputs fixed.
pub enum LimitLawSampler {
    M {
        coeffs: LimitCoefficients,
        denom: f64,
        route: MRoute,
    },
    I(Box<ISampler>),
    /// `1 − (Z₁² + Z₂²)/2`.
    Circle,
}

impl LimitLawSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        match self {
            Self::M {
                coeffs,
                denom,
                route,
            } => sample_limit_M(*coeffs, *denom, *route, rng),
            Self::I(s) => Ok(s.sample(rng)),
            Self::Circle => {
                let z1: f64 = StandardNormal.sample(rng);
                let z2: f64 = StandardNormal.sample(rng);
                Ok(1.0 - 0.5 * (z1 * z1 + z2 * z2))
            }
        }
    }

    /// `count` draws; chunk `c` of 4096 draws uses stream `c` of `seed`.
    pub fn draw(&self, count: usize, seed: u64) -> Result<Vec<f64>> {
        const CHUNK: usize = 4096;
        let chunks: Vec<Result<Vec<f64>>> = (0..count.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut rng = trial_rng(seed, c as u64);
                let len = CHUNK.min(count - c * CHUNK);
                (0..len).map(|_| self.sample(&mut rng)).collect()
            })
            .collect();
        let mut out = Vec::with_capacity(count);
        for c in chunks {
            out.extend(c?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NDiagonalization {
    pub matrix: [[f64; 3]; 3],
    /// Ascending.
    pub eigenvalues: [f64; 3],
    /// `(1+μ̂)/4`, `1/2`, `(1−μ̂)/8`, ascending.
    pub closed_form: [f64; 3],
}

/// Covariance of `(N₁, N₂, N₃)` and its spectrum.
#[allow(non_snake_case)]
pub fn diagonalize_N(mu_hat4: f64) -> Result<NDiagonalization> {
    if !(-1.0..=1.0).contains(&mu_hat4) {
        return Err(Error::FourthCoefficientOutOfRange(mu_hat4));
    }
    let (p, q, r) = ((3.0 + mu_hat4) / 8.0, (1.0 - mu_hat4) / 8.0, (1.0 - mu_hat4) / 8.0);
    let m = Matrix3::new(p, q, 0.0, q, p, 0.0, 0.0, 0.0, r);
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    let mut cf = [(1.0 + mu_hat4) / 4.0, 0.5, (1.0 - mu_hat4) / 8.0];
    cf.sort_by(f64::total_cmp);
    Ok(NDiagonalization {
        matrix: [[p, q, 0.0], [q, p, 0.0], [0.0, 0.0, r]],
        eigenvalues: [ev[0], ev[1], ev[2]],
        closed_form: cf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{build_unit_speed, limit_coefficients_reconciled, A_functional, CurveSpec, DEFAULT_NODES};
    use crate::crossings::{ks_distance, mean_and_variance, Reference};
    use crate::field::{evaluate_restricted, ProcessBasis};
    use crate::lattice::{enumerate_level, spectral_measure};
    use crate::quadrature::gauss_legendre;

    #[test]
    fn hermite_values() {
        assert_eq!(hermite(2, 0.0), -1.0);
        assert_eq!(hermite(4, 2.0), -5.0);
        assert_eq!(hermite(0, 3.0), 1.0);
        assert_eq!(hermite(1, 3.0), 3.0);
    }

    #[test]
    fn hermite_orthogonality() {
        // Gauss–Hermite via Legendre on a wide interval
        let (x, w) = gauss_legendre(200);
        let r = 12.0;
        let inner: f64 = x
            .iter()
            .zip(&w)
            .map(|(xi, wi)| {
                let t = r * xi;
                r * wi * hermite(3, t) * hermite(5, t) * (-0.5 * t * t).exp()
            })
            .sum();
        assert!(inner.abs() < 1e-10);
        let norm: f64 = x
            .iter()
            .zip(&w)
            .map(|(xi, wi)| {
                let t = r * xi;
                r * wi * hermite(4, t).powi(2) * (-0.5 * t * t).exp()
            })
            .sum::<f64>()
            / TAU.sqrt();
        assert!((norm - 24.0).abs() < 1e-9);
    }

    #[test]
    fn coefficient_closed_forms() {
        let c = chaos_coefficients(3);
        let r = TAU.sqrt();
        assert!((c.b[0] - 1.0 / r).abs() < 1e-15);
        assert!((c.a[0] - (2.0 / PI).sqrt()).abs() < 1e-15);
        assert!((c.b[1] + 1.0 / (2.0 * r)).abs() < 1e-15);
        assert!((c.b[2] - 3.0 / (24.0 * r)).abs() < 1e-15);
        assert!((c.a[1] - 0.5 * (2.0 / PI).sqrt()).abs() < 1e-15);
        assert!((c.a[2] + (2.0 / PI).sqrt() / 24.0).abs() < 1e-15);
        assert!((c.b[0] * c.a[0] - 1.0 / PI).abs() < 1e-15);
        assert!((c.b[1] * c.a[0] + 1.0 / TAU).abs() < 1e-15);
        assert!((c.b[0] * c.a[1] - 1.0 / TAU).abs() < 1e-15);
        for l in 1..3 {
            assert!(c.a[l] * c.a[l + 1] < 0.0);
        }
    }

    #[test]
    fn second_chaos_matches_hermite_integral() {
        let level = enumerate_level(25).unwrap();
        let curve = build_unit_speed(&CurveSpec::ellipse(0.25, 0.15), DEFAULT_NODES).unwrap();
        let proj = ChaosProjector::new(&level, &curve);
        let alpha = 2.0 * PI * PI * 25.0;
        let tb = &curve.table;
        for i in 0..5 {
            let s = sample_coefficients(&level, 8, i);
            let (z2a, z2b) = proj.project_2(&s);
            // √α/(2π) ∫ (H₂(f′/√α) − H₂(f)) dt on the curve table
            let direct = alpha.sqrt() / TAU
                * tb.integrate(|k| {
                    let (f, d) = s.restricted_at(&curve, tb.t[k]);
                    hermite(2, d / alpha.sqrt()) - hermite(2, f)
                });
            assert!((z2a + z2b - direct).abs() < 1e-9 * (1.0 + direct.abs()), "{i}");
        }
    }

    #[test]
    fn static_circle_identities() {
        let level = enumerate_level(65).unwrap();
        let curve = build_unit_speed(&CurveSpec::circle(0.2), DEFAULT_NODES).unwrap();
        let proj = ChaosProjector::new(&level, &curve);
        for i in 0..20 {
            let s = sample_coefficients(&level, 1, i);
            let p = proj.project_checked(&s, 1e-8).unwrap();
            assert!(p.z2a.abs() < 1e-12);
            assert!(p.w.residual.abs() < 1e-10);
            assert!((p.z4a - p.z4a_static).abs() < 1e-8 * (1.0 + p.z4a.abs()));
            assert_eq!(p.z0, (130f64).sqrt() * curve.length);
        }
    }

    #[test]
    fn w2_profile_integrates_to_int_w2() {
        let level = enumerate_level(65).unwrap();
        let curve = build_unit_speed(&CurveSpec::flower(0.2, 0.03, 3), DEFAULT_NODES).unwrap();
        let s = sample_coefficients(&level, 2, 5);
        let prof = w2_profile(&s, &level, &curve);
        let w = W_functionals(&s, &level, &curve);
        assert!((curve.table.integrate(|i| prof[i]) - w.int_w2).abs() < 1e-10);
        assert!(w.residual.abs() < 1e-8);
    }

    #[test]
    fn z2_accounts_for_the_fluctuation_of_the_count() {
        // the second chaos alone correlates strongly with the count
        let level = enumerate_level(65).unwrap();
        let curve = build_unit_speed(&CurveSpec::circle(0.2), DEFAULT_NODES).unwrap();
        let proj = ChaosProjector::new(&level, &curve);
        let basis = ProcessBasis::new(&level, &curve, 20.0);
        let (mut zs, mut z2s) = (Vec::new(), Vec::new());
        for i in 0..400 {
            let s = sample_coefficients(&level, 3, i);
            let c = crate::crossings::count_zeros(&basis.process(&s, &curve), 0.0);
            zs.push(c.count as f64);
            z2s.push(proj.project(&s).z2());
        }
        let (mz, vz) = mean_and_variance(&zs);
        let (m2, v2) = mean_and_variance(&z2s);
        let cov: f64 = zs.iter().zip(&z2s).map(|(a, b)| (a - mz) * (b - m2)).sum::<f64>() / 399.0;
        assert!(cov / (vz * v2).sqrt() > 0.5);
        let _ = evaluate_restricted;
    }

    #[test]
    fn fourth_chaos_variance_forms() {
        let level = enumerate_level(65).unwrap();
        let curve = build_unit_speed(&CurveSpec::circle(0.2), DEFAULT_NODES).unwrap();
        let proj = ChaosProjector::new(&level, &curve);
        let v = proj.z4a_variance();
        let mu = spectral_measure(&level);
        let l = curve.length;
        let nf = 16.0;
        let asym = 65.0 / (4.0 * nf * nf)
            * (16.0 * A_functional(&curve, &mu) + 24.0 * crate::curve::B_functional(&curve, &mu) - 7.0 * l * l);
        assert!((v.asymptotic - asym).abs() < 1e-12 * asym);
        let z4: Vec<f64> = (0..20_000)
            .map(|i| proj.project(&sample_coefficients(&level, 12, i)).z4a)
            .collect();
        let (_, var) = mean_and_variance(&z4);
        assert!((var - v.finite).abs() < 0.1 * v.finite, "{var} vs {}", v.finite);
    }

    #[test]
    fn n_diagonalization() {
        for (mu, want) in [(0.0, [0.125, 0.25, 0.5]), (1.0, [0.0, 0.5, 0.5]), (-1.0, [0.0, 0.25, 0.5])] {
            let d = diagonalize_N(mu).unwrap();
            for k in 0..3 {
                assert!((d.eigenvalues[k] - want[k]).abs() < 1e-12);
                assert!((d.closed_form[k] - want[k]).abs() < 1e-15);
            }
        }
        assert!(diagonalize_N(1.2).is_err());
    }

    #[test]
    fn m_route_examples() {
        let mut rng = trial_rng(5, 0);
        let lc = LimitCoefficients { a1: 1.0, a2: 1.0, a3: 0.0 };
        assert!(matches!(
            sample_limit_M(lc, 0.0, MRoute::Literal, &mut rng),
            Err(Error::DegenerateDenominator(_))
        ));
        let s = LimitLawSampler::M { coeffs: lc, denom: 2.0, route: MRoute::Literal };
        let draws = s.draw(200_000, 1).unwrap();
        let (m, _) = mean_and_variance(&draws);
        assert!(m.abs() < 0.01);
        assert!(draws.iter().all(|x| *x >= -2.0 / 2f64.sqrt() - 1e-12));
    }

    #[test]
    fn circle_limit_routes_agree() {
        let curve = build_unit_speed(&CurveSpec::circle(0.2), DEFAULT_NODES).unwrap();
        let uni = SpectralMeasure::uniform();
        let isamp = ISampler::new(&curve, &uni, DEFAULT_PROCESS_GRID).unwrap();
        assert!(isamp.mean_offset().abs() < 1e-10);
        let draws = LimitLawSampler::I(Box::new(isamp)).draw(50_000, 3).unwrap();
        let (m, v) = mean_and_variance(&draws);
        assert!(m.abs() < 0.03 && (v - 1.0).abs() < 0.05);
        assert!(ks_distance(&draws, &Reference::StaticCircle).unwrap() < 0.02);
        let l = curve.length;
        let denom = 16.0 * A_functional(&curve, &uni) - l * l;
        let lc = limit_coefficients_reconciled(&curve, 0.0).unwrap();
        let m = LimitLawSampler::M { coeffs: lc, denom, route: MRoute::Reconciled }
            .draw(50_000, 4)
            .unwrap();
        assert!(ks_distance(&m, &Reference::StaticCircle).unwrap() < 0.02);
    }

    #[test]
    fn reconciled_variance_identity() {
        for spec in [CurveSpec::flower(0.2, 0.03, 4), CurveSpec::flower(0.2, 0.04, 3)] {
            let curve = build_unit_speed(&spec, DEFAULT_NODES).unwrap();
            let l = curve.length;
            for mu in [
                spectral_measure(&enumerate_level(25).unwrap()),
                SpectralMeasure::cilleruelo(),
                SpectralMeasure::uniform(),
            ] {
                let c = limit_coefficients_reconciled(&curve, mu.mu_hat4()).unwrap();
                let denom = 16.0 * A_functional(&curve, &mu) - l * l;
                let lhs = 2.0 * c.a1 * c.a1 + 2.0 * c.a2 * c.a2 + c.a3 * c.a3;
                assert!((lhs - 2.0 * denom).abs() < 1e-10 * l * l, "{lhs} vs {}", 2.0 * denom);
            }
        }
    }
}
