//! The discrete calculus on weighted graphs: difference operator, gradient
//! squared, the weighted Laplacian, and the algebraic identities (product
//! rule, integration by parts, convexity, Laplacian of a product) exposed as
//! residual-returning verifiers.
//!
//! On truncations the Laplacian takes a declared exterior value (default 0,
//! i.e. Dirichlet) for the missing neighbors of boundary-layer vertices. The
//! identities are exact only for functions supported in the interior, so the
//! verifiers reject or flag support that touches the boundary layer.

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

/// Relative tolerance of the identity contracts.
pub const IDENTITY_TOL: f64 = 1e-12;

/// A real function on the vertices of one graph.
pub type VertexFunction = Vec<f64>;

/// A real function on `G x [0, T]`, sampled on a strictly increasing grid.
#[derive(Debug, Clone)]
pub struct SpaceTimeFunction {
    pub times: Vec<f64>,
    /// `values[k][x]` is the value at vertex `x`, time `times[k]`.
    pub values: Vec<Vec<f64>>,
}

impl SpaceTimeFunction {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Parse(
                "time grid and value rows disagree in length".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parse("time grid is not strictly increasing".into()));
        }
        let n = values.first().map(Vec::len).unwrap_or(0);
        if values.iter().any(|row| row.len() != n) {
            return Err(Error::Parse("vertex sets differ across samples".into()));
        }
        Ok(SpaceTimeFunction { times, values })
    }
}

/// `f(y) - f(x)`.
pub fn difference(f: &[f64], x: usize, y: usize) -> f64 {
    f[y] - f[x]
}

/// `|grad f|^2(x) = (1/mu(x)) sum_y omega(x,y) (f(y)-f(x))^2`, with exterior
/// neighbors of the truncation contributing through the declared value.
pub fn gradient_squared(g: &WeightedGraph, f: &[f64], x: usize) -> f64 {
    gradient_squared_with_exterior(g, f, x, 0.0)
}

pub fn gradient_squared_with_exterior(g: &WeightedGraph, f: &[f64], x: usize, ext: f64) -> f64 {
    let inner: f64 = g
        .neighbors(x)
        .iter()
        .map(|&(y, w)| w * (f[y] - f[x]).powi(2))
        .sum();
    (inner + g.exterior_weight(x) * (ext - f[x]).powi(2)) / g.mu(x)
}

/// Weighted Laplacian `(1/mu(x)) sum_y [f(y)-f(x)] omega(x,y)` with Dirichlet
/// (zero) exterior by default.
pub fn laplacian(g: &WeightedGraph, f: &[f64], x: usize) -> f64 {
    laplacian_with_exterior(g, f, x, 0.0)
}

pub fn laplacian_with_exterior(g: &WeightedGraph, f: &[f64], x: usize, ext: f64) -> f64 {
    let inner: f64 = g
        .neighbors(x)
        .iter()
        .map(|&(y, w)| w * (f[y] - f[x]))
        .sum();
    (inner + g.exterior_weight(x) * (ext - f[x])) / g.mu(x)
}

pub fn laplacian_all(g: &WeightedGraph, f: &[f64]) -> Vec<f64> {
    (0..g.n()).map(|x| laplacian(g, f, x)).collect()
}

/// True when `f` vanishes on the truncation's boundary layer.
pub fn interior_supported(g: &WeightedGraph, f: &[f64]) -> bool {
    (0..g.n()).all(|x| g.is_interior(x) || f[x] == 0.0)
}

/// Residual of the integration-by-parts identity
/// `sum_x Delta f(x) h(x) mu(x) = -(1/2) sum_{x,y} (f(y)-f(x))(h(y)-h(x)) omega(x,y)`.
///
/// Requires at least one of `f`, `h` to be supported in the interior,
/// otherwise the truncation pollutes the identity and the call is rejected.
pub fn integration_by_parts_residual(g: &WeightedGraph, f: &[f64], h: &[f64]) -> Result<f64> {
    if !interior_supported(g, f) && !interior_supported(g, h) {
        let witness = (0..g.n())
            .find(|&x| !g.is_interior(x) && (f[x] != 0.0 || h[x] != 0.0))
            .unwrap_or(0);
        return Err(Error::BoundarySupport(g.label(witness).to_string()));
    }
    let lhs: f64 = (0..g.n())
        .map(|x| laplacian(g, f, x) * h[x] * g.mu(x))
        .sum();
    let mut rhs = 0.0;
    for x in 0..g.n() {
        for &(y, w) in g.neighbors(x) {
            rhs += (f[y] - f[x]) * (h[y] - h[x]) * w;
        }
    }
    rhs *= -0.5;
    Ok((lhs - rhs).abs())
}

/// Residual of the product rule
/// `(fh)(y) - (fh)(x) = f(x)[h(y)-h(x)] + [f(y)-f(x)]h(y)`.
pub fn product_rule_residual(f: &[f64], h: &[f64], x: usize, y: usize) -> f64 {
    let lhs = f[y] * h[y] - f[x] * h[x];
    let rhs = f[x] * (h[y] - h[x]) + (f[y] - f[x]) * h[y];
    (lhs - rhs).abs()
}

/// Residual of the Laplacian-of-product identity at an interior vertex:
/// `Delta(fh)(x) = f(x) Delta h(x) + h(x) Delta f(x)
///   + (1/mu(x)) sum_y (f(y)-f(x))(h(y)-h(x)) omega(x,y)`.
pub fn laplacian_product_residual(
    g: &WeightedGraph,
    f: &[f64],
    h: &[f64],
    x: usize,
) -> Result<f64> {
    if !g.is_interior(x) {
        return Err(Error::Precondition(format!(
            "vertex `{}` lies in the boundary layer",
            g.label(x)
        )));
    }
    let fh: Vec<f64> = f.iter().zip(h).map(|(a, b)| a * b).collect();
    let lhs = laplacian(g, &fh, x);
    let cross: f64 = g
        .neighbors(x)
        .iter()
        .map(|&(y, w)| (f[y] - f[x]) * (h[y] - h[x]) * w)
        .sum::<f64>()
        / g.mu(x);
    let rhs = f[x] * laplacian(g, h, x) + h[x] * laplacian(g, f, x) + cross;
    Ok((lhs - rhs).abs())
}

/// A convex, continuously differentiable scalar map.
pub trait ConvexC1 {
    fn value(&self, s: f64) -> f64;
    fn deriv(&self, s: f64) -> f64;
}

/// `s -> (s^2 + alpha)^{p/4}`, convex for `p >= 2`. The regularization used by
/// the single integration-by-parts route.
#[derive(Debug, Clone, Copy)]
pub struct PiQuarter {
    pub p: f64,
    pub alpha: f64,
}

impl PiQuarter {
    pub fn new(p: f64, alpha: f64) -> Result<Self> {
        if p < 2.0 {
            return Err(Error::range("p", p, "[2, inf) for the quarter-power map"));
        }
        if !(alpha > 0.0) {
            return Err(Error::range("alpha", alpha, "(0, inf)"));
        }
        Ok(PiQuarter { p, alpha })
    }
}

impl ConvexC1 for PiQuarter {
    fn value(&self, s: f64) -> f64 {
        (s * s + self.alpha).powf(self.p / 4.0)
    }

    fn deriv(&self, s: f64) -> f64 {
        (self.p / 2.0) * s * (s * s + self.alpha).powf(self.p / 4.0 - 1.0)
    }
}

/// `s -> (s^2 + alpha)^{p/2}`, convex for `p >= 1`. The regularization used by
/// the double integration-by-parts route.
#[derive(Debug, Clone, Copy)]
pub struct PiHalf {
    pub p: f64,
    pub alpha: f64,
}

impl PiHalf {
    pub fn new(p: f64, alpha: f64) -> Result<Self> {
        if p < 1.0 {
            return Err(Error::range("p", p, "[1, inf) for the half-power map"));
        }
        if !(alpha > 0.0) {
            return Err(Error::range("alpha", alpha, "(0, inf)"));
        }
        Ok(PiHalf { p, alpha })
    }
}

impl ConvexC1 for PiHalf {
    fn value(&self, s: f64) -> f64 {
        (s * s + self.alpha).powf(self.p / 2.0)
    }

    fn deriv(&self, s: f64) -> f64 {
        self.p * s * (s * s + self.alpha).powf(self.p / 2.0 - 1.0)
    }
}

pub struct CustomC1<F, G> {
    pub f: F,
    pub df: G,
}

impl<F: Fn(f64) -> f64, G: Fn(f64) -> f64> ConvexC1 for CustomC1<F, G> {
    fn value(&self, s: f64) -> f64 {
        (self.f)(s)
    }

    fn deriv(&self, s: f64) -> f64 {
        (self.df)(s)
    }
}

/// Margin of the convexity inequality `Delta psi(u)(x) >= psi'(u(x)) Delta u(x)`
/// at `x`: returns LHS - RHS, nonnegative for convex `psi`. Non-convexity is
/// rejected when a sampled second difference over the range of `u` detects it.
pub fn convexity_margin(
    g: &WeightedGraph,
    u: &[f64],
    psi: &impl ConvexC1,
    x: usize,
) -> Result<f64> {
    let lo = u.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if detect_nonconvex(psi, lo, hi) {
        return Err(Error::Precondition(
            "psi is not convex on the range of u (second difference sampling)".into(),
        ));
    }
    let psi_u: Vec<f64> = u.iter().map(|&s| psi.value(s)).collect();
    // The exterior value 0 maps to psi(0), so the convexity inequality keeps
    // its pointwise form on boundary vertices as well.
    let lhs = laplacian_with_exterior(g, &psi_u, x, psi.value(0.0));
    let rhs = psi.deriv(u[x]) * laplacian(g, u, x);
    Ok(lhs - rhs)
}

fn detect_nonconvex(psi: &impl ConvexC1, lo: f64, hi: f64) -> bool {
    let span = (hi - lo).max(1.0);
    let a = lo - 0.1 * span;
    let h = span * 1.2 / 64.0;
    for i in 0..=64 {
        let s = a + h * i as f64;
        let second = psi.value(s - h) - 2.0 * psi.value(s) + psi.value(s + h);
        if second < -1e-9 * (1.0 + psi.value(s).abs()) {
            return true;
        }
    }
    false
}
