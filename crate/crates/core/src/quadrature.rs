//! Gauss–Legendre rules, composite panels and a small adaptive integrator.
//!
//! Every curve functional in the crate goes through [`CompositeRule`], so a
//! single set of nodes and weights controls the quadrature error.

use std::f64::consts::PI;

/// Nodes and weights of the `order`-point Gauss–Legendre rule on `[-1, 1]`.
///
/// Nodes are returned in increasing order.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "Gauss-Legendre order must be positive");
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    let half = order.div_ceil(2);
    for i in 0..half {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(order, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(order, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    if order % 2 == 1 {
        nodes[order / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=order {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if order == 0 {
        return (1.0, 0.0);
    }
    let n = order as f64;
    let d = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre rule on `[a, b]` with equal panels.
#[derive(Debug, Clone)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    pub fn new(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let lo = a + p as f64 * h;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(lo + 0.5 * h * (xi + 1.0));
                weights.push(0.5 * h * wi);
            }
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Fixed-order Gauss–Legendre integral of `f` over `[a, b]`.
pub fn gl_integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, x: &[f64], w: &[f64]) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    x.iter().zip(w).map(|(&xi, &wi)| wi * f(c + h * xi)).sum::<f64>() * h
}

/// Adaptive bisection on a 15-point Gauss–Legendre rule.
///
/// Stops refining a panel once the panel estimate and the sum of its two
/// halves agree to `rel_tol` relative to the running total (or `abs_floor`).
pub fn adaptive_integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    max_depth: usize,
) -> f64 {
    let (x, w) = gauss_legendre(15);
    let coarse = gl_integrate(&f, a, b, &x, &w);
    let scale = coarse.abs().max(f64::MIN_POSITIVE);
    adaptive_rec(&f, a, b, coarse, rel_tol * scale, &x, &w, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    abs_tol: f64,
    x: &[f64],
    w: &[f64],
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let left = gl_integrate(f, a, m, x, w);
    let right = gl_integrate(f, m, b, x, w);
    let refined = left + right;
    if depth == 0 || (refined - whole).abs() <= abs_tol {
        return refined;
    }
    adaptive_rec(f, a, m, left, 0.5 * abs_tol, x, w, depth - 1)
        + adaptive_rec(f, m, b, right, 0.5 * abs_tol, x, w, depth - 1)
}

/// Kahan–Babuška (Neumaier) compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}
