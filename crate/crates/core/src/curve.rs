//! Smooth reference curves in unit-speed parametrization and the geometric
//! functionals attached to them.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Atom, EnergyLevel, SpectralMeasure};
use crate::quadrature::{gauss_legendre, CompositeRule};

/// Default number of table nodes.
pub const DEFAULT_NODES: usize = 4096;
const GL_ORDER: usize = 8;
const ARC_PANELS: usize = 2048;
const ARC_ORDER: usize = 16;
const CURVATURE_SCAN: usize = 8192;
const MAX_DOUBLINGS: usize = 4;

fn full_turn() -> f64 {
    TAU
}

fn centre() -> [f64; 2] {
    [0.5, 0.5]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum CurveSpec {
    /// Circle or circular arc starting at polar angle `start`.
    Circle {
        #[serde(default = "centre")]
        center: [f64; 2],
        radius: f64,
        #[serde(default)]
        start: f64,
        #[serde(default = "full_turn")]
        sweep: f64,
    },
    Ellipse {
        #[serde(default = "centre")]
        center: [f64; 2],
        a: f64,
        b: f64,
        #[serde(default)]
        rotation: f64,
    },
    /// Radial graph `ρ(θ) = r0 (1 + eps cos(kθ + phase))`.
    Flower {
        #[serde(default = "centre")]
        center: [f64; 2],
        r0: f64,
        eps: f64,
        k: u32,
        #[serde(default)]
        phase: f64,
    },
}

impl CurveSpec {
    pub fn circle(radius: f64) -> Self {
        Self::Circle {
            center: centre(),
            radius,
            start: 0.0,
            sweep: TAU,
        }
    }

    pub fn arc(radius: f64, start: f64, sweep: f64) -> Self {
        Self::Circle {
            center: centre(),
            radius,
            start,
            sweep,
        }
    }

    pub fn ellipse(a: f64, b: f64) -> Self {
        Self::Ellipse {
            center: centre(),
            a,
            b,
            rotation: 0.0,
        }
    }

    pub fn flower(r0: f64, eps: f64, k: u32) -> Self {
        Self::Flower {
            center: centre(),
            r0,
            eps,
            k,
            phase: 0.0,
        }
    }

    /// Short human-readable identifier.
    pub fn id(&self) -> String {
        match self {
            Self::Circle { radius, sweep, .. } if (*sweep - TAU).abs() < 1e-15 => {
                format!("circle(r={radius})")
            }
            Self::Circle { radius, sweep, .. } => format!("arc(r={radius},sweep={sweep})"),
            Self::Ellipse { a, b, .. } => format!("ellipse(a={a},b={b})"),
            Self::Flower { r0, eps, k, .. } => format!("flower(k={k},r0={r0},eps={eps})"),
        }
    }

    pub fn is_closed(&self) -> bool {
        match self {
            Self::Circle { sweep, .. } => *sweep >= TAU,
            _ => true,
        }
    }

    fn parameter_range(&self) -> (f64, f64) {
        match self {
            Self::Circle { start, sweep, .. } => (*start, start + sweep),
            _ => (0.0, TAU),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidCurve(m.to_string()));
        match *self {
            Self::Circle { radius, sweep, .. } => {
                if !(radius > 0.0) {
                    return bad("radius must be positive");
                }
                if !(sweep > 0.0 && sweep <= TAU) {
                    return bad("sweep must lie in (0, 2π]");
                }
            }
            Self::Ellipse { a, b, .. } => {
                if !(a > 0.0 && b > 0.0) {
                    return bad("semi-axes must be positive");
                }
            }
            Self::Flower { r0, eps, k, .. } => {
                if !(r0 > 0.0) {
                    return bad("r0 must be positive");
                }
                if !(0.0..1.0).contains(&eps) {
                    return bad("eps must lie in [0, 1)");
                }
                if k == 0 {
                    return bad("k must be positive");
                }
            }
        }
        Ok(())
    }

    /// Position, first and second derivative at parameter `u`.
    pub fn param(&self, u: f64) -> ([f64; 2], [f64; 2], [f64; 2]) {
        match *self {
            Self::Circle { center, radius, .. } => {
                let (s, c) = u.sin_cos();
                (
                    [center[0] + radius * c, center[1] + radius * s],
                    [-radius * s, radius * c],
                    [-radius * c, -radius * s],
                )
            }
            Self::Ellipse {
                center,
                a,
                b,
                rotation,
            } => {
                let (s, c) = u.sin_cos();
                let (sr, cr) = rotation.sin_cos();
                let rot = |v: [f64; 2]| [cr * v[0] - sr * v[1], sr * v[0] + cr * v[1]];
                let p = rot([a * c, b * s]);
                (
                    [center[0] + p[0], center[1] + p[1]],
                    rot([-a * s, b * c]),
                    rot([-a * c, -b * s]),
                )
            }
            Self::Flower {
                center,
                r0,
                eps,
                k,
                phase,
            } => {
                let kf = k as f64;
                let arg = kf * u + phase;
                let rho = r0 * (1.0 + eps * arg.cos());
                let drho = -r0 * eps * kf * arg.sin();
                let ddrho = -r0 * eps * kf * kf * arg.cos();
                let (s, c) = u.sin_cos();
                (
                    [center[0] + rho * c, center[1] + rho * s],
                    [drho * c - rho * s, drho * s + rho * c],
                    [
                        ddrho * c - 2.0 * drho * s - rho * c,
                        ddrho * s + 2.0 * drho * c - rho * s,
                    ],
                )
            }
        }
    }

    fn speed(&self, u: f64) -> f64 {
        let (_, d, _) = self.param(u);
        d[0].hypot(d[1])
    }

    fn curvature(&self, u: f64) -> f64 {
        let (_, d, dd) = self.param(u);
        let sp = d[0].hypot(d[1]);
        (d[0] * dd[1] - d[1] * dd[0]) / (sp * sp * sp)
    }
}

/// Cumulative arc length on fixed parameter panels.
#[derive(Debug, Clone)]
struct ArcLength {
    u0: f64,
    du: f64,
    cumulative: Vec<f64>,
    x: Vec<f64>,
    w: Vec<f64>,
}

impl ArcLength {
    fn new(spec: &CurveSpec) -> Self {
        let (u0, u1) = spec.parameter_range();
        let du = (u1 - u0) / ARC_PANELS as f64;
        let (x, w) = gauss_legendre(ARC_ORDER);
        let mut cumulative = Vec::with_capacity(ARC_PANELS + 1);
        let mut s = 0.0;
        cumulative.push(0.0);
        for j in 0..ARC_PANELS {
            let a = u0 + j as f64 * du;
            s += Self::panel(spec, a, a + du, &x, &w);
            cumulative.push(s);
        }
        Self {
            u0,
            du,
            cumulative,
            x,
            w,
        }
    }

    fn panel(spec: &CurveSpec, a: f64, b: f64, x: &[f64], w: &[f64]) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        x.iter()
            .zip(w)
            .map(|(&xi, &wi)| wi * spec.speed(c + h * xi))
            .sum::<f64>()
            * h
    }

    fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Parameter `u` with arc length `s` from the start.
    fn invert(&self, spec: &CurveSpec, s: f64) -> f64 {
        let total = self.total();
        let s = s.clamp(0.0, total);
        let j = match self
            .cumulative
            .binary_search_by(|c| c.total_cmp(&s))
        {
            Ok(j) => return self.u0 + j as f64 * self.du,
            Err(j) => j.saturating_sub(1).min(ARC_PANELS - 1),
        };
        let ua = self.u0 + j as f64 * self.du;
        let (sa, sb) = (self.cumulative[j], self.cumulative[j + 1]);
        let mut u = ua + self.du * (s - sa) / (sb - sa);
        for _ in 0..8 {
            let err = sa + Self::panel(spec, ua, u, &self.x, &self.w) - s;
            let step = err / spec.speed(u);
            u -= step;
            if step.abs() < 1e-15 * (1.0 + u.abs()) {
                break;
            }
        }
        u
    }
}

/// Values of the curve at the quadrature nodes.
#[derive(Debug, Clone, Serialize)]
pub struct CurveTable {
    pub t: Vec<f64>,
    pub weight: Vec<f64>,
    pub position: Vec<[f64; 2]>,
    /// Unit tangent `γ̇ = (cos φ, sin φ)`.
    pub tangent: Vec<[f64; 2]>,
    /// Continuous lift of the tangent angle.
    pub phi: Vec<f64>,
    pub curvature: Vec<f64>,
}

impl CurveTable {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn integrate<F: Fn(usize) -> f64>(&self, f: F) -> f64 {
        self.weight.iter().enumerate().map(|(i, w)| w * f(i)).sum()
    }
}

/// Arc-length parametrized curve `γ : [0, L] → T`.
#[derive(Debug, Clone)]
pub struct UnitSpeedCurve {
    pub spec: CurveSpec,
    pub length: f64,
    pub closed: bool,
    pub table: CurveTable,
    /// Table nodes per unit arc length.
    pub resolution: f64,
    arc: ArcLength,
}

fn build_table(spec: &CurveSpec, arc: &ArcLength, length: f64, nodes: usize) -> CurveTable {
    let panels = nodes.div_ceil(GL_ORDER).max(1);
    let rule = CompositeRule::new(0.0, length, panels, GL_ORDER);
    let mut position = Vec::with_capacity(rule.len());
    let mut tangent = Vec::with_capacity(rule.len());
    let mut curvature = Vec::with_capacity(rule.len());
    for &t in &rule.nodes {
        let u = arc.invert(spec, t);
        let (p, d, _) = spec.param(u);
        let sp = d[0].hypot(d[1]);
        position.push(p);
        tangent.push([d[0] / sp, d[1] / sp]);
        curvature.push(spec.curvature(u));
    }
    let mut phi = Vec::with_capacity(rule.len());
    for (i, v) in tangent.iter().enumerate() {
        let raw = v[1].atan2(v[0]);
        if i == 0 {
            phi.push(raw);
        } else {
            let prev: f64 = phi[i - 1];
            let mut d = raw - prev.rem_euclid(TAU);
            d = (d + PI).rem_euclid(TAU) - PI;
            phi.push(prev + d);
        }
    }
    CurveTable {
        t: rule.nodes,
        weight: rule.weights,
        position,
        tangent,
        phi,
        curvature,
    }
}

fn table_moments(table: &CurveTable) -> [f64; 2] {
    [
        table.integrate(|i| table.tangent[i][0].powi(2)),
        table.integrate(|i| table.tangent[i][0] * table.tangent[i][1]),
    ]
}

/// Arc-length reparametrization of `spec` with at least `nodes` table nodes.
///
/// The node count is doubled until the tangent moments stabilise to 1e-10
/// relative to the length.
pub fn build_unit_speed(spec: &CurveSpec, nodes: usize) -> Result<UnitSpeedCurve> {
    spec.validate()?;
    let (u0, u1) = spec.parameter_range();
    let mut min_abs = f64::INFINITY;
    let mut min_signed = f64::INFINITY;
    let mut max_signed = f64::NEG_INFINITY;
    for j in 0..=CURVATURE_SCAN {
        let u = u0 + (u1 - u0) * j as f64 / CURVATURE_SCAN as f64;
        let k = spec.curvature(u);
        min_abs = min_abs.min(k.abs());
        min_signed = min_signed.min(k);
        max_signed = max_signed.max(k);
    }
    if min_abs < 1e-9 || min_signed * max_signed <= 0.0 {
        return Err(Error::CurvatureVanishes { min_abs });
    }
    let arc = ArcLength::new(spec);
    let length = arc.total();
    let mut nodes = nodes.max(GL_ORDER);
    let mut table = build_table(spec, &arc, length, nodes);
    let mut moments = table_moments(&table);
    for _ in 0..MAX_DOUBLINGS {
        let finer = build_table(spec, &arc, length, 2 * nodes);
        let m = table_moments(&finer);
        let shift = (m[0] - moments[0]).abs().max((m[1] - moments[1]).abs());
        if shift < 1e-10 * length {
            break;
        }
        nodes *= 2;
        table = finer;
        moments = m;
    }
    let inside = table
        .position
        .iter()
        .all(|p| p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 1.0);
    if !inside {
        return Err(Error::CurveExceedsDomain);
    }
    Ok(UnitSpeedCurve {
        spec: spec.clone(),
        length,
        closed: spec.is_closed(),
        resolution: table.len() as f64 / length,
        table,
        arc,
    })
}

impl UnitSpeedCurve {
    fn parameter_at(&self, t: f64) -> f64 {
        let t = if self.closed {
            t.rem_euclid(self.length)
        } else {
            t
        };
        if let CurveSpec::Circle { start, radius, .. } = self.spec {
            return start + t / radius;
        }
        self.arc.invert(&self.spec, t)
    }

    /// Position and unit tangent at arc length `t`.
    pub fn frame_at(&self, t: f64) -> ([f64; 2], [f64; 2]) {
        let (p, d, _) = self.spec.param(self.parameter_at(t));
        let sp = d[0].hypot(d[1]);
        (p, [d[0] / sp, d[1] / sp])
    }

    pub fn point_at(&self, t: f64) -> [f64; 2] {
        self.frame_at(t).0
    }

    pub fn curvature_at(&self, t: f64) -> f64 {
        self.spec.curvature(self.parameter_at(t))
    }

    pub fn id(&self) -> String {
        self.spec.id()
    }
}

/// `I(γ) = ∫ e^{2iφ(t)} dt`.
#[allow(non_snake_case)]
pub fn I_gamma(curve: &UnitSpeedCurve) -> Complex64 {
    let tb = &curve.table;
    let re = tb.integrate(|i| {
        let [c, s] = tb.tangent[i];
        c * c - s * s
    });
    let im = tb.integrate(|i| {
        let [c, s] = tb.tangent[i];
        2.0 * c * s
    });
    Complex64::new(re, im)
}

pub fn is_static(curve: &UnitSpeedCurve, tol: f64) -> bool {
    I_gamma(curve).norm() < tol * curve.length
}

/// `E(γ; θ) = ∫ ⟨θ, γ̇(t)⟩² dt` for the unit direction at angle `theta`.
pub fn directional_energy(curve: &UnitSpeedCurve, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let tb = &curve.table;
    tb.integrate(|i| {
        let v = tb.tangent[i];
        let ip = c * v[0] + s * v[1];
        ip * ip
    })
}

/// Squared projections `⟨θ_j, γ̇(t_i)⟩²` for every atom `j` and table node `i`.
fn projection_rows(curve: &UnitSpeedCurve, atoms: &[Atom]) -> Vec<Vec<f64>> {
    let tb = &curve.table;
    atoms
        .iter()
        .map(|a| {
            let (s, c) = a.angle.sin_cos();
            tb.tangent
                .iter()
                .map(|v| {
                    let ip = c * v[0] + s * v[1];
                    ip * ip
                })
                .collect()
        })
        .collect()
}

/// `B = ∫ E(γ; θ)² dμ(θ)`.
#[allow(non_snake_case)]
pub fn B_functional(curve: &UnitSpeedCurve, measure: &SpectralMeasure) -> f64 {
    measure
        .atoms()
        .iter()
        .map(|a| a.weight * directional_energy(curve, a.angle).powi(2))
        .sum()
}

/// `A = ∫∫ (∫ ⟨θ, γ̇⟩² ⟨θ′, γ̇⟩² dt)² dμ(θ) dμ(θ′)`.
#[allow(non_snake_case)]
pub fn A_functional(curve: &UnitSpeedCurve, measure: &SpectralMeasure) -> f64 {
    let atoms = measure.atoms();
    let rows = projection_rows(curve, &atoms);
    let w = &curve.table.weight;
    let mut total = 0.0;
    for (j, rj) in rows.iter().enumerate() {
        let weighted: Vec<f64> = rj.iter().zip(w).map(|(a, b)| a * b).collect();
        for (k, rk) in rows.iter().enumerate().skip(j) {
            let inner: f64 = weighted.iter().zip(rk).map(|(a, b)| a * b).sum();
            let mult = if k == j { 1.0 } else { 2.0 };
            total += mult * atoms[j].weight * atoms[k].weight * inner * inner;
        }
    }
    total
}

/// `F = N⁻² Σ_{λ,λ′} (∫ ⟨λ̂, γ̇⟩⟨λ̂′, γ̇⟩ dt)²`.
#[allow(non_snake_case)]
pub fn F_functional(curve: &UnitSpeedCurve, level: &EnergyLevel) -> f64 {
    let tb = &curve.table;
    let rows: Vec<Vec<f64>> = level
        .points
        .iter()
        .map(|p| {
            let d = p.direction();
            tb.tangent
                .iter()
                .zip(&tb.weight)
                .map(|(v, w)| (d[0] * v[0] + d[1] * v[1]) * w.sqrt())
                .collect()
        })
        .collect();
    let mut total = 0.0;
    for (j, rj) in rows.iter().enumerate() {
        for (k, rk) in rows.iter().enumerate().skip(j) {
            let inner: f64 = rj.iter().zip(rk).map(|(a, b)| a * b).sum();
            total += if k == j { 1.0 } else { 2.0 } * inner * inner;
        }
    }
    total / (level.count as f64).powi(2)
}

#[derive(Debug, Clone, Serialize)]
pub struct FgProfiles {
    /// `f = γ̇₁² − mean` at the table nodes.
    pub f: Vec<f64>,
    /// `g = γ̇₁γ̇₂ − mean` at the table nodes.
    pub g: Vec<f64>,
    pub int_f2: f64,
    pub int_g2: f64,
    pub int_fg: f64,
}

pub fn fg_profiles(curve: &UnitSpeedCurve) -> FgProfiles {
    let tb = &curve.table;
    let l = curve.length;
    let raw_f: Vec<f64> = tb.tangent.iter().map(|v| v[0] * v[0]).collect();
    let raw_g: Vec<f64> = tb.tangent.iter().map(|v| v[0] * v[1]).collect();
    let mf = tb.integrate(|i| raw_f[i]) / l;
    let mg = tb.integrate(|i| raw_g[i]) / l;
    let f: Vec<f64> = raw_f.iter().map(|x| x - mf).collect();
    let g: Vec<f64> = raw_g.iter().map(|x| x - mg).collect();
    FgProfiles {
        int_f2: tb.integrate(|i| f[i] * f[i]),
        int_g2: tb.integrate(|i| g[i] * g[i]),
        int_fg: tb.integrate(|i| f[i] * g[i]),
        f,
        g,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitCoefficients {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

fn check_mu4(mu_hat4: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&mu_hat4) {
        return Err(Error::FourthCoefficientOutOfRange(mu_hat4));
    }
    Ok(())
}

/// `a₁ = 2(1+μ̂)∫f²`, `a₂ = 2(1−μ̂)∫f²`, `a₃ = 4√(1−μ̂²)∫fg`.
pub fn limit_coefficients(curve: &UnitSpeedCurve, mu_hat4: f64) -> Result<LimitCoefficients> {
    check_mu4(mu_hat4)?;
    let p = fg_profiles(curve);
    Ok(LimitCoefficients {
        a1: 2.0 * (1.0 + mu_hat4) * p.int_f2,
        a2: 2.0 * (1.0 - mu_hat4) * p.int_f2,
        a3: 4.0 * (1.0 - mu_hat4 * mu_hat4).sqrt() * p.int_fg,
    })
}

/// Coefficients of the quadratic form of the static limit law.
///
/// The centred projection process `W₂ᵗ − mean` equals
/// `2f(t)(N₁ − N₂) + 4g(t)N₃`, so the `Z₂²` coefficient carries `∫g²`.
/// The two versions coincide whenever `∫f² = ∫g²`, e.g. for circles.
pub fn limit_coefficients_reconciled(
    curve: &UnitSpeedCurve,
    mu_hat4: f64,
) -> Result<LimitCoefficients> {
    check_mu4(mu_hat4)?;
    let p = fg_profiles(curve);
    Ok(LimitCoefficients {
        a1: 2.0 * (1.0 + mu_hat4) * p.int_f2,
        a2: 2.0 * (1.0 - mu_hat4) * p.int_g2,
        a3: 4.0 * (1.0 - mu_hat4 * mu_hat4).sqrt() * p.int_fg,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveFunctionals {
    pub length: f64,
    pub i_gamma: [f64; 2],
    pub is_static: bool,
    pub b: f64,
    pub a: f64,
    pub f: Option<f64>,
    pub mu_hat4: f64,
    pub int_f2: f64,
    pub int_g2: f64,
    pub int_fg: f64,
    pub limit: LimitCoefficients,
    pub limit_reconciled: LimitCoefficients,
}

/// Every functional of `curve` against `measure`; `F` needs a level.
pub fn functionals(
    curve: &UnitSpeedCurve,
    measure: &SpectralMeasure,
    level: Option<&EnergyLevel>,
    static_tol: f64,
) -> Result<CurveFunctionals> {
    let i = I_gamma(curve);
    let p = fg_profiles(curve);
    let mu4 = measure.mu_hat4().clamp(-1.0, 1.0);
    Ok(CurveFunctionals {
        length: curve.length,
        i_gamma: [i.re, i.im],
        is_static: is_static(curve, static_tol),
        b: B_functional(curve, measure),
        a: A_functional(curve, measure),
        f: level.map(|l| F_functional(curve, l)),
        mu_hat4: mu4,
        int_f2: p.int_f2,
        int_g2: p.int_g2,
        int_fg: p.int_fg,
        limit: limit_coefficients(curve, mu4)?,
        limit_reconciled: limit_coefficients_reconciled(curve, mu4)?,
    })
}
