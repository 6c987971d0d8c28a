//! Gauss-Legendre rules and adaptive composite node sets.
//!
//! The spectral integrals in this crate all run over the same truncation
//! window with the same density `F(ω)` as weight, so instead of adapting each
//! integral separately we adapt one composite node set to `F` once and reuse
//! it for every lag or frequency.

use std::ops::{Add, Mul};

use crate::{Error, Result};

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi's initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate<T, F>(&self, a: f64, b: f64, f: F) -> T
    where
        T: Default + Add<Output = T> + Mul<f64, Output = T>,
        F: Fn(f64) -> T,
    {
        self.mapped(a, b)
            .fold(T::default(), |acc, (x, w)| acc + f(x) * w)
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Debug, Clone)]
pub struct NodeSetOptions {
    /// Points per panel.
    pub order: usize,
    /// Upper bound on the panel width.
    pub max_width: f64,
    /// Absolute tolerance on the integral of the adapted function.
    pub abs_tol: f64,
    /// Panels narrower than this are accepted regardless of the error.
    pub min_width: f64,
    /// Points that must be panel edges (narrow features, kinks).
    pub breakpoints: Vec<f64>,
}

impl Default for NodeSetOptions {
    fn default() -> Self {
        Self {
            order: 12,
            max_width: f64::INFINITY,
            abs_tol: 1e-12,
            min_width: 1e-9,
            breakpoints: Vec::new(),
        }
    }
}

/// A composite Gauss-Legendre rule over `[a, b]`, refined where the adapted
/// function needs it.
#[derive(Debug, Clone)]
pub struct NodeSet {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub panels: Vec<(f64, f64)>,
    /// Sum of the per-panel error estimates for the adapted function.
    pub error_estimate: f64,
}

impl NodeSet {
    pub fn adaptive<F: Fn(f64) -> f64>(
        f: F,
        a: f64,
        b: f64,
        opts: &NodeSetOptions,
    ) -> Result<Self> {
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(Error::param(format!("bad integration interval [{a}, {b}]")));
        }
        let rule = GaussLegendre::new(opts.order);

        let mut edges = vec![a, b];
        edges.extend(opts.breakpoints.iter().copied().filter(|&x| x > a && x < b));
        edges.sort_by(f64::total_cmp);
        edges.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * (1.0 + y.abs()));

        let mut stack = Vec::new();
        for pair in edges.windows(2).rev() {
            let (l, r) = (pair[0], pair[1]);
            let pieces = ((r - l) / opts.max_width).ceil().max(1.0) as usize;
            let w = (r - l) / pieces as f64;
            for k in (0..pieces).rev() {
                let lo = l + k as f64 * w;
                let hi = if k + 1 == pieces { r } else { lo + w };
                stack.push((lo, hi));
            }
        }

        let total = b - a;
        let mut panels = Vec::new();
        let mut error_estimate = 0.0;
        let mut unresolved = 0.0;
        while let Some((l, r)) = stack.pop() {
            let m = 0.5 * (l + r);
            let whole = rule.integrate(l, r, &f);
            let halves = rule.integrate(l, m, &f) + rule.integrate(m, r, &f);
            let err = (whole - halves).abs();
            let allowed = opts.abs_tol * (r - l) / total;
            if err <= allowed {
                panels.push((l, r));
                error_estimate += err;
            } else if r - l <= opts.min_width {
                panels.push((l, r));
                error_estimate += err;
                unresolved += err;
            } else {
                stack.push((m, r));
                stack.push((l, m));
            }
        }
        if unresolved > opts.abs_tol {
            return Err(Error::Accuracy {
                achieved: error_estimate,
                requested: opts.abs_tol,
            });
        }

        let mut nodes = Vec::with_capacity(panels.len() * rule.len());
        let mut weights = Vec::with_capacity(panels.len() * rule.len());
        for &(l, r) in &panels {
            for (x, w) in rule.mapped(l, r) {
                nodes.push(x);
                weights.push(w);
            }
        }
        Ok(Self {
            nodes,
            weights,
            panels,
            error_estimate,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<T, F>(&self, f: F) -> T
    where
        T: Default + Add<Output = T> + Mul<f64, Output = T>,
        F: Fn(f64) -> T,
    {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::default(), |acc, (&x, &w)| acc + f(x) * w)
    }
}

/// Adaptive integral of a scalar function to absolute tolerance `abs_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    let opts = NodeSetOptions {
        abs_tol,
        ..Default::default()
    };
    let set = NodeSet::adaptive(&f, a, b, &opts)?;
    Ok(set.integrate(f))
}
