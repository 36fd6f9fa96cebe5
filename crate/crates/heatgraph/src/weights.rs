//! Cut-off and test weights and their verified inequalities.
//!
//! The cut-off `eta` is a radial bump that equals 1 on an inner ball and
//! vanishes past `R - s`; the exponential weight `zeta = exp(xi)` and the
//! polynomial weight `theta = e^{-gamma t} (d + k)^{-alpha}` are engineered so
//! that the parabolic operator acting on them is nonpositive once `gamma`
//! clears an explicit threshold. Every inequality is exposed as a margin
//! computation over a finite truncation: the caller learns by how much the
//! bound holds (or fails, in exploratory mode).
//!
//! All weights are time-separable (`e^{-gamma t}` times a radial profile), so
//! margins are evaluated on the spatial profile once; the time factor is
//! strictly positive and cannot change a sign.

use crate::calculus::laplacian;
use crate::density::DensityField;
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::metric::{intrinsic_bound, PseudoMetric};

/// Parameters of the radial cut-off: center, outer radius `R` and transition
/// fraction `delta` in `(0, 1/2)`.
#[derive(Debug, Clone, Copy)]
pub struct CutoffParams {
    pub x0: usize,
    pub radius: f64,
    pub delta: f64,
}

impl CutoffParams {
    pub fn new(x0: usize, radius: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::range("delta", delta, "(0, 1/2)"));
        }
        if !(radius > 0.0) {
            return Err(Error::range("radius", radius, "(0, inf)"));
        }
        Ok(CutoffParams { x0, radius, delta })
    }

    /// The decay pipelines additionally need the plateau to cover `B_{delta R}`,
    /// which requires `R > 2s/(1 - 2 delta)`.
    pub fn require_plateau(&self, s: f64) -> Result<()> {
        let min_r = 2.0 * s / (1.0 - 2.0 * self.delta);
        if self.radius <= min_r {
            return Err(Error::range(
                "radius",
                self.radius,
                format!("({min_r}, inf) so the cut-off plateau covers the inner ball"),
            ));
        }
        Ok(())
    }
}

/// `eta(x) = min{ [R - s - d(x,x0)]_+ / (delta R), 1 }` evaluated on a
/// distance row.
pub fn cutoff_values(dists: &[f64], params: &CutoffParams, s: f64) -> Vec<f64> {
    dists
        .iter()
        .map(|&d| ((params.radius - s - d).max(0.0) / (params.delta * params.radius)).min(1.0))
        .collect()
}

/// The annulus `{(1-delta)R - 2s <= d <= R}` outside of which the cut-off
/// differences vanish.
pub fn cutoff_annulus(d: f64, params: &CutoffParams, s: f64) -> bool {
    let lo = (1.0 - params.delta) * params.radius - 2.0 * s;
    d >= lo && d <= params.radius
}

/// A time-separable test weight `w(x, t) = e^{-gamma t} * spatial(d(x, x0))`.
pub trait RadialWeight {
    fn spatial(&self, d: f64) -> f64;
    fn gamma(&self) -> f64;

    fn value(&self, d: f64, t: f64) -> f64 {
        (-self.gamma() * t).exp() * self.spatial(d)
    }

    /// Analytic time derivative; never a finite difference.
    fn time_deriv(&self, d: f64, t: f64) -> f64 {
        -self.gamma() * self.value(d, t)
    }
}

/// Exponential weight `zeta = exp(xi)` with
/// `xi(x,t) = -gamma t - alpha [d(x,x0) - delta R]_+`.
#[derive(Debug, Clone, Copy)]
pub struct ExpWeight {
    pub alpha: f64,
    pub gamma: f64,
    pub delta: f64,
    pub radius: f64,
}

impl ExpWeight {
    pub fn new(alpha: f64, gamma: f64, delta: f64, radius: f64) -> Result<Self> {
        if alpha < 0.0 {
            return Err(Error::range("alpha", alpha, "[0, inf)"));
        }
        if gamma < 0.0 {
            return Err(Error::range("gamma", gamma, "[0, inf)"));
        }
        Ok(ExpWeight {
            alpha,
            gamma,
            delta,
            radius,
        })
    }

    pub fn xi(&self, d: f64, t: f64) -> f64 {
        -self.gamma * t - self.alpha * (d - self.delta * self.radius).max(0.0)
    }

    /// Threshold on `gamma` that makes the bracket inequality hold when the
    /// metric is intrinsic: `alpha^2 e^{2 alpha s} / (2 rho0)`.
    pub fn bracket_threshold(alpha: f64, s: f64, rho0: f64) -> f64 {
        alpha * alpha * (2.0 * alpha * s).exp() / (2.0 * rho0)
    }

    /// Threshold for `rho dw/dt + Delta w <= 0` with a 1-intrinsic metric:
    /// `alpha C0 e^{alpha s} / rho0`.
    pub fn heat_threshold(alpha: f64, s: f64, c0: f64, rho0: f64) -> f64 {
        alpha * c0 * (alpha * s).exp() / rho0
    }
}

impl RadialWeight for ExpWeight {
    fn spatial(&self, d: f64) -> f64 {
        (-self.alpha * (d - self.delta * self.radius).max(0.0)).exp()
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// Polynomial weight `theta(x,t) = e^{-gamma t} (d(x,x0) + k)^{-alpha}` with
/// `k` strictly above the jump size.
#[derive(Debug, Clone, Copy)]
pub struct PolyWeight {
    pub alpha: f64,
    pub gamma: f64,
    pub k: f64,
}

impl PolyWeight {
    pub fn new(alpha: f64, gamma: f64, k: f64, s: f64) -> Result<Self> {
        if alpha < 0.0 {
            return Err(Error::range("alpha", alpha, "[0, inf)"));
        }
        if gamma < 0.0 {
            return Err(Error::range("gamma", gamma, "[0, inf)"));
        }
        if k <= s {
            return Err(Error::range("k", k, format!("({s}, inf), above the jump size")));
        }
        Ok(PolyWeight { alpha, gamma, k })
    }

    pub fn bracket_threshold(alpha: f64, constants: &ProfileConstants, rho0: f64) -> f64 {
        (alpha * constants.c1).powi(2) / (2.0 * rho0)
    }

    pub fn heat_threshold(alpha: f64, c0: f64, constants: &ProfileConstants, rho0: f64) -> f64 {
        alpha * c0 * constants.c1 / rho0
    }
}

impl RadialWeight for PolyWeight {
    fn spatial(&self, d: f64) -> f64 {
        (d + self.k).powf(-self.alpha)
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// The constants `C1 = k^{alpha+1}/(k-s)^{alpha+1}`, `C2 = (k/(k-s))^{alpha}`
/// and `C3 = k^{alpha}/(k-s)^{alpha+1}` controlling how shifting the radial
/// argument by one jump changes the polynomial weight.
#[derive(Debug, Clone, Copy)]
pub struct ProfileConstants {
    pub alpha: f64,
    pub k: f64,
    pub s: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl ProfileConstants {
    pub fn new(alpha: f64, k: f64, s: f64) -> Result<Self> {
        if alpha < 0.0 {
            return Err(Error::range("alpha", alpha, "[0, inf)"));
        }
        if !(k > s) {
            return Err(Error::range("k", k, format!("({s}, inf)")));
        }
        let ratio = k / (k - s);
        Ok(ProfileConstants {
            alpha,
            k,
            s,
            c1: ratio.powf(alpha + 1.0),
            c2: ratio.powf(alpha),
            c3: k.powf(alpha) / (k - s).powf(alpha + 1.0),
        })
    }

    /// Vertexwise check of `(d + k - s)^{-alpha-1} <= C1 (d + k)^{-alpha-1}`:
    /// returns the minimum slack over the supplied distances (nonnegative when
    /// the bound holds).
    pub fn shift_bound_margin(&self, dists: &[f64]) -> f64 {
        dists
            .iter()
            .map(|&d| {
                self.c1 * (d + self.k).powf(-self.alpha - 1.0)
                    - (d + self.k - self.s).powf(-self.alpha - 1.0)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// The ratio `(z+k-s)^{-alpha-1} / (z+k)^{-alpha-1}` is nonincreasing in
    /// `z >= 0`; returns the worst consecutive increase over a sample grid
    /// (nonpositive when monotonicity holds).
    pub fn ratio_monotonicity_defect(&self, z_max: f64, samples: usize) -> f64 {
        let ratio = |z: f64| {
            (z + self.k - self.s).powf(-self.alpha - 1.0) / (z + self.k).powf(-self.alpha - 1.0)
        };
        let mut worst = f64::NEG_INFINITY;
        let mut prev = ratio(0.0);
        for i in 1..=samples {
            let z = z_max * i as f64 / samples as f64;
            let cur = ratio(z);
            worst = worst.max(cur - prev);
            prev = cur;
        }
        worst
    }
}

/// Which side of zero a margin is expected to land on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginOrientation {
    /// Value is a maximum of left-hand sides; expected `<= 0`.
    UpperZero,
    /// Value is a minimum of (bound - quantity); expected `>= 0`.
    LowerZero,
}

#[derive(Debug, Clone)]
pub struct MarginReport {
    pub name: &'static str,
    pub value: f64,
    /// Largest magnitude among the individual summands entering the margin,
    /// making tolerance checks size-independent.
    pub scale: f64,
    pub orientation: MarginOrientation,
    pub witness: Option<String>,
    pub exploratory: bool,
    pub evaluated: usize,
}

impl MarginReport {
    pub fn passed(&self, tol: f64) -> bool {
        let budget = tol * self.scale.max(1e-300);
        match self.orientation {
            MarginOrientation::UpperZero => self.value <= budget,
            MarginOrientation::LowerZero => self.value >= -budget,
        }
    }
}

/// Margins of the cut-off bounds: the edgewise Lipschitz bound
/// `|eta(y)-eta(x)| <= d(x,y)/(delta R)` on the annulus (and zero difference
/// off it), the vertexwise square-sum bound, and — when a 1-intrinsic bound
/// `C0` is supplied — the Laplacian bound `|Delta eta| <= C0/(delta R)`.
#[derive(Debug, Clone)]
pub struct CutoffMargins {
    pub gradient: MarginReport,
    pub gradient_sum: MarginReport,
    pub laplacian: Option<MarginReport>,
    /// Whether the cut-off vanishes on the truncation boundary layer, so the
    /// vertexwise checks are free of truncation effects.
    pub supported_in_interior: bool,
}

pub fn cutoff_margins(
    g: &WeightedGraph,
    d: &PseudoMetric,
    params: &CutoffParams,
    c0_one_intrinsic: Option<f64>,
) -> Result<CutoffMargins> {
    let s = d.jump_size();
    let row = d.distances_from(params.x0);
    let eta = cutoff_values(&row, params, s);
    let dr = params.delta * params.radius;
    // The square-sum bound folds in the 2-intrinsic constant; it reduces to
    // the bare mu/(delta R)^2 form when the metric is intrinsic.
    let bound2 = intrinsic_bound(g, d, 2.0)?;

    let mut grad = f64::INFINITY;
    let mut grad_scale: f64 = 0.0;
    let mut grad_witness = None;
    let mut edges = 0usize;
    for x in 0..g.n() {
        for &(y, _) in g.neighbors(x) {
            let lhs = (eta[y] - eta[x]).abs();
            let rhs = if cutoff_annulus(row[x], params, s) {
                d.dist(x, y) / dr
            } else {
                0.0
            };
            grad_scale = grad_scale.max(lhs).max(rhs);
            if rhs - lhs < grad {
                grad = rhs - lhs;
                grad_witness = Some(format!("({},{})", g.label(x), g.label(y)));
            }
            edges += 1;
        }
    }

    let mut sum = f64::INFINITY;
    let mut sum_scale: f64 = 0.0;
    let mut sum_witness = None;
    let mut lap = f64::INFINITY;
    let mut lap_scale: f64 = 0.0;
    let mut lap_witness = None;
    let mut vertices = 0usize;
    for x in g.interior_vertices() {
        let chi = cutoff_annulus(row[x], params, s);
        let lhs: f64 = g
            .neighbors(x)
            .iter()
            .map(|&(y, w)| w * (eta[y] - eta[x]).powi(2))
            .sum();
        let rhs = if chi { bound2 * g.mu(x) / (dr * dr) } else { 0.0 };
        sum_scale = sum_scale.max(lhs).max(rhs);
        if rhs - lhs < sum {
            sum = rhs - lhs;
            sum_witness = Some(g.label(x).to_string());
        }
        if let Some(c0) = c0_one_intrinsic {
            let lhs = laplacian(g, &eta, x).abs();
            let rhs = if chi { c0 / dr } else { 0.0 };
            lap_scale = lap_scale.max(lhs).max(rhs);
            if rhs - lhs < lap {
                lap = rhs - lhs;
                lap_witness = Some(g.label(x).to_string());
            }
        }
        vertices += 1;
    }

    let supported_in_interior = (0..g.n()).all(|x| g.is_interior(x) || eta[x] == 0.0);
    Ok(CutoffMargins {
        gradient: MarginReport {
            name: "cutoff-gradient",
            value: grad,
            scale: grad_scale,
            orientation: MarginOrientation::LowerZero,
            witness: grad_witness,
            exploratory: false,
            evaluated: edges,
        },
        gradient_sum: MarginReport {
            name: "cutoff-gradient-sum",
            value: sum,
            scale: sum_scale,
            orientation: MarginOrientation::LowerZero,
            witness: sum_witness,
            exploratory: false,
            evaluated: vertices,
        },
        laplacian: c0_one_intrinsic.map(|_| MarginReport {
            name: "cutoff-laplacian",
            value: lap,
            scale: lap_scale,
            orientation: MarginOrientation::LowerZero,
            witness: lap_witness,
            exploratory: false,
            evaluated: vertices,
        }),
        supported_in_interior,
    })
}

fn effective_rho0_bounded(rho: &DensityField) -> f64 {
    rho.rho0_bounded()
}

/// Measured constant of the vanishing lower bound for the requested
/// `(sigma, k, x0)`: the largest `rho0` with
/// `rho(x) >= rho0 (d(x,x0)+k)^{-sigma}` on the truncation.
fn effective_rho0_vanishing(
    rho: &DensityField,
    dists: &[f64],
    sigma: f64,
    k: f64,
) -> f64 {
    rho.rho
        .iter()
        .zip(dists)
        .map(|(&r, &d)| r * (d + k).powf(sigma))
        .fold(f64::INFINITY, f64::min)
}

fn require_intrinsic(g: &WeightedGraph, d: &PseudoMetric) -> Result<()> {
    let b = intrinsic_bound(g, d, 2.0)?;
    if b > 1.0 + 1e-9 {
        return Err(Error::Precondition(format!(
            "metric is not intrinsic: 2-intrinsic bound {b} > 1"
        )));
    }
    Ok(())
}

/// Maximum over interior vertices of
/// `rho dxi/dt mu + (1/2) sum_y omega [1 - e^{xi(y)-xi(x)}]^2`;
/// nonpositive at or above the bracket threshold on an intrinsic metric.
pub fn exp_weight_bracket_margin(
    g: &WeightedGraph,
    d: &PseudoMetric,
    rho: &DensityField,
    w: &ExpWeight,
    x0: usize,
    force: bool,
) -> Result<MarginReport> {
    let s = d.jump_size();
    let rho0 = effective_rho0_bounded(rho);
    let threshold = ExpWeight::bracket_threshold(w.alpha, s, rho0);
    if !force {
        require_intrinsic(g, d)?;
        if w.gamma < threshold * (1.0 - 1e-12) {
            return Err(Error::range(
                "gamma",
                w.gamma,
                format!("[{threshold}, inf) = [alpha^2 e^(2 alpha s) / (2 rho0), inf)"),
            ));
        }
    }
    let row = d.distances_from(x0);
    let xi0: Vec<f64> = row
        .iter()
        .map(|&dd| -w.alpha * (dd - w.delta * w.radius).max(0.0))
        .collect();
    let mut value = f64::NEG_INFINITY;
    let mut scale: f64 = 0.0;
    let mut witness = None;
    let mut evaluated = 0;
    for x in g.interior_vertices() {
        let term1 = -w.gamma * rho.rho[x] * g.mu(x);
        let term2: f64 = 0.5
            * g.neighbors(x)
                .iter()
                .map(|&(y, wt)| wt * (1.0 - (xi0[y] - xi0[x]).exp()).powi(2))
                .sum::<f64>();
        scale = scale.max(term1.abs()).max(term2.abs());
        if term1 + term2 > value {
            value = term1 + term2;
            witness = Some(g.label(x).to_string());
        }
        evaluated += 1;
    }
    Ok(MarginReport {
        name: "exp-weight-bracket",
        value,
        scale,
        orientation: MarginOrientation::UpperZero,
        witness,
        exploratory: force,
        evaluated,
    })
}

/// Maximum over interior vertices of `rho dzeta/dt + Delta zeta`; nonpositive
/// at or above the heat threshold when the metric is 1-intrinsic with `C0`.
pub fn exp_weight_heat_margin(
    g: &WeightedGraph,
    d: &PseudoMetric,
    rho: &DensityField,
    w: &ExpWeight,
    x0: usize,
    force: bool,
) -> Result<MarginReport> {
    let s = d.jump_size();
    let c0 = intrinsic_bound(g, d, 1.0)?;
    let rho0 = effective_rho0_bounded(rho);
    let threshold = ExpWeight::heat_threshold(w.alpha, s, c0, rho0);
    if !force && w.gamma < threshold * (1.0 - 1e-12) {
        return Err(Error::range(
            "gamma",
            w.gamma,
            format!("[{threshold}, inf) = [alpha C0 e^(alpha s) / rho0, inf)"),
        ));
    }
    let row = d.distances_from(x0);
    let zeta0: Vec<f64> = row.iter().map(|&dd| w.spatial(dd)).collect();
    margin_heat_operator(g, rho, &zeta0, w.gamma, "exp-weight-heat", force)
}

/// Maximum over interior vertices of
/// `rho dtheta/dt mu + (theta/2) sum_y omega [1 - theta(y)/theta(x)]^2`.
pub fn poly_weight_bracket_margin(
    g: &WeightedGraph,
    d: &PseudoMetric,
    rho: &DensityField,
    w: &PolyWeight,
    x0: usize,
    sigma: f64,
    force: bool,
) -> Result<MarginReport> {
    let s = d.jump_size();
    let row = d.distances_from(x0);
    let constants = ProfileConstants::new(w.alpha, w.k, s)?;
    let rho0 = effective_rho0_vanishing(rho, &row, sigma, w.k);
    if !force {
        if !(sigma > 0.0 && sigma <= 2.0) {
            return Err(Error::range("sigma", sigma, "(0, 2]"));
        }
        require_intrinsic(g, d)?;
        let threshold = PolyWeight::bracket_threshold(w.alpha, &constants, rho0);
        if w.gamma < threshold * (1.0 - 1e-12) {
            return Err(Error::range(
                "gamma",
                w.gamma,
                format!("[{threshold}, inf) = [alpha^2 C1^2 / (2 rho0), inf)"),
            ));
        }
    }
    let theta0: Vec<f64> = row.iter().map(|&dd| w.spatial(dd)).collect();
    let mut value = f64::NEG_INFINITY;
    let mut scale: f64 = 0.0;
    let mut witness = None;
    let mut evaluated = 0;
    for x in g.interior_vertices() {
        let term1 = -w.gamma * rho.rho[x] * g.mu(x) * theta0[x];
        let term2: f64 = 0.5
            * theta0[x]
            * g.neighbors(x)
                .iter()
                .map(|&(y, wt)| wt * (1.0 - theta0[y] / theta0[x]).powi(2))
                .sum::<f64>();
        scale = scale.max(term1.abs()).max(term2.abs());
        if term1 + term2 > value {
            value = term1 + term2;
            witness = Some(g.label(x).to_string());
        }
        evaluated += 1;
    }
    Ok(MarginReport {
        name: "poly-weight-bracket",
        value,
        scale,
        orientation: MarginOrientation::UpperZero,
        witness,
        exploratory: force,
        evaluated,
    })
}

/// Maximum over interior vertices of `rho dtheta/dt + Delta theta`.
pub fn poly_weight_heat_margin(
    g: &WeightedGraph,
    d: &PseudoMetric,
    rho: &DensityField,
    w: &PolyWeight,
    x0: usize,
    sigma: f64,
    force: bool,
) -> Result<MarginReport> {
    let s = d.jump_size();
    let row = d.distances_from(x0);
    let constants = ProfileConstants::new(w.alpha, w.k, s)?;
    let rho0 = effective_rho0_vanishing(rho, &row, sigma, w.k);
    let c0 = intrinsic_bound(g, d, 1.0)?;
    if !force {
        if !(sigma > 0.0 && sigma <= 1.0) {
            return Err(Error::range("sigma", sigma, "(0, 1]"));
        }
        let threshold = PolyWeight::heat_threshold(w.alpha, c0, &constants, rho0);
        if w.gamma < threshold * (1.0 - 1e-12) {
            return Err(Error::range(
                "gamma",
                w.gamma,
                format!("[{threshold}, inf) = [alpha C0 C1 / rho0, inf)"),
            ));
        }
    }
    let theta0: Vec<f64> = row.iter().map(|&dd| w.spatial(dd)).collect();
    margin_heat_operator(g, rho, &theta0, w.gamma, "poly-weight-heat", force)
}

fn margin_heat_operator(
    g: &WeightedGraph,
    rho: &DensityField,
    spatial: &[f64],
    gamma: f64,
    name: &'static str,
    exploratory: bool,
) -> Result<MarginReport> {
    let mut value = f64::NEG_INFINITY;
    let mut scale: f64 = 0.0;
    let mut witness = None;
    let mut evaluated = 0;
    for x in g.interior_vertices() {
        let dt_term = -gamma * rho.rho[x] * spatial[x];
        let lap = laplacian(g, spatial, x);
        scale = scale.max(dt_term.abs()).max(lap.abs());
        if dt_term + lap > value {
            value = dt_term + lap;
            witness = Some(g.label(x).to_string());
        }
        evaluated += 1;
    }
    Ok(MarginReport {
        name,
        value,
        scale,
        orientation: MarginOrientation::UpperZero,
        witness,
        exploratory,
        evaluated,
    })
}

/// Margin of the polynomial-weight difference bound on one adjacent pair:
/// `alpha d(x,y) [d(x,x0)+k-s]^{-alpha-1} - |(d(y,x0)+k)^{-alpha} - (d(x,x0)+k)^{-alpha}|`.
pub fn poly_weight_gradient_margin_pair(
    g: &WeightedGraph,
    d: &PseudoMetric,
    x: usize,
    y: usize,
    x0: usize,
    alpha: f64,
    k: f64,
) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::range("alpha", alpha, "(0, inf)"));
    }
    let s = d.jump_size();
    if k <= s {
        return Err(Error::range("k", k, format!("({s}, inf)")));
    }
    if x != y && g.weight(x, y) == 0.0 {
        return Err(Error::NotAdjacent(
            g.label(x).to_string(),
            g.label(y).to_string(),
        ));
    }
    let dx = d.dist(x, x0);
    let dy = d.dist(y, x0);
    let lhs = ((dy + k).powf(-alpha) - (dx + k).powf(-alpha)).abs();
    let rhs = alpha * d.dist(x, y) * (dx + k - s).powf(-alpha - 1.0);
    Ok(rhs - lhs)
}

/// Minimum of the pairwise difference-bound margin over all ordered edges.
pub fn poly_weight_gradient_margin(
    g: &WeightedGraph,
    d: &PseudoMetric,
    x0: usize,
    alpha: f64,
    k: f64,
) -> Result<MarginReport> {
    let mut value = f64::INFINITY;
    let mut scale: f64 = 0.0;
    let mut witness = None;
    let mut evaluated = 0;
    let row = d.distances_from(x0);
    let s = d.jump_size();
    if !(alpha > 0.0) {
        return Err(Error::range("alpha", alpha, "(0, inf)"));
    }
    if k <= s {
        return Err(Error::range("k", k, format!("({s}, inf)")));
    }
    for x in 0..g.n() {
        for &(y, _) in g.neighbors(x) {
            let lhs = ((row[y] + k).powf(-alpha) - (row[x] + k).powf(-alpha)).abs();
            let rhs = alpha * d.dist(x, y) * (row[x] + k - s).powf(-alpha - 1.0);
            scale = scale.max(lhs).max(rhs);
            if rhs - lhs < value {
                value = rhs - lhs;
                witness = Some(format!("({},{})", g.label(x), g.label(y)));
            }
            evaluated += 1;
        }
    }
    Ok(MarginReport {
        name: "poly-weight-gradient",
        value,
        scale,
        orientation: MarginOrientation::LowerZero,
        witness,
        exploratory: false,
        evaluated,
    })
}

/// Admissibility pairing of a cut-off with a radial weight: the minimum over
/// adjacent ordered pairs of `[eta^2(y) - eta^2(x)] [w(y) - w(x)]`, which is
/// nonnegative when both are nonincreasing in the distance from `x0`. The
/// time factor `e^{-gamma t} > 0` cannot change the sign, so the spatial
/// profile decides.
pub fn admissibility_margin(g: &WeightedGraph, eta: &[f64], spatial: &[f64]) -> MarginReport {
    let mut value = f64::INFINITY;
    let mut scale: f64 = 0.0;
    let mut witness = None;
    let mut evaluated = 0;
    for x in 0..g.n() {
        for &(y, _) in g.neighbors(x) {
            let a = eta[y] * eta[y] - eta[x] * eta[x];
            let b = spatial[y] - spatial[x];
            scale = scale.max((a * b).abs());
            if a * b < value {
                value = a * b;
                witness = Some(format!("({},{})", g.label(x), g.label(y)));
            }
            evaluated += 1;
        }
    }
    if !value.is_finite() {
        value = 0.0;
    }
    MarginReport {
        name: "admissibility",
        value,
        scale,
        orientation: MarginOrientation::LowerZero,
        witness,
        exploratory: false,
        evaluated,
    }
}

/// Parameter set of the decay exponents driving the bounded-density gates.
#[derive(Debug, Clone, Copy)]
pub struct DecayParams {
    /// Tuning exponent; the exponential weight uses `alpha ~ kappa log(R)`.
    pub kappa: f64,
    pub s: f64,
    pub rho0: f64,
    pub beta: f64,
    pub delta: f64,
    pub tau: f64,
}

/// Exponent of the single-integration-by-parts decay estimate:
/// `f(R) = (kappa^2/(8 s^2 rho0)) tau R^kappa ln^2 R + (3/2) kappa ln R
///        - [(1-2 delta) kappa/(2s) - beta] R ln R`.
/// For in-range parameters `f(R) -> -inf` as `R -> inf`.
pub fn decay_exponent_f(r: f64, p: &DecayParams) -> Result<f64> {
    if !(p.beta > 0.0 && p.beta < 0.5 / p.s) {
        return Err(Error::range("beta", p.beta, format!("(0, {})", 0.5 / p.s)));
    }
    let delta_hi = 0.5 - p.beta * p.s;
    if !(p.delta > 0.0 && p.delta < delta_hi) {
        return Err(Error::range("delta", p.delta, format!("(0, {delta_hi})")));
    }
    let k_lo = 2.0 * p.beta * p.s / (1.0 - 2.0 * p.delta);
    if !(p.kappa > k_lo && p.kappa < 1.0) {
        return Err(Error::range("kappa", p.kappa, format!("({k_lo}, 1)")));
    }
    if !(r > 1.0) {
        return Err(Error::range("R", r, "(1, inf)"));
    }
    let ln = r.ln();
    Ok(
        (p.kappa * p.kappa / (8.0 * p.s * p.s * p.rho0)) * p.tau * r.powf(p.kappa) * ln * ln
            + 1.5 * p.kappa * ln
            - ((1.0 - 2.0 * p.delta) * p.kappa / (2.0 * p.s) - p.beta) * r * ln,
    )
}

/// Exponent of the double-integration-by-parts decay estimate:
/// `g(R) = (C0 kappa/(rho0 s)) tau R^kappa ln R + 2 kappa ln R
///        - [(1-2 delta) kappa/s - beta] R ln R`.
/// Preconditions use the stated gate range `beta in (0, 1/(2s))`; the wider
/// proof-text range `beta in (0, 1/s)` is intentionally not the gate.
pub fn decay_exponent_g(r: f64, p: &DecayParams, c0: f64) -> Result<f64> {
    if !(p.beta > 0.0 && p.beta < 0.5 / p.s) {
        return Err(Error::range("beta", p.beta, format!("(0, {})", 0.5 / p.s)));
    }
    let delta_hi = (1.0 - p.beta * p.s).min(0.5);
    if !(p.delta > 0.0 && p.delta < delta_hi) {
        return Err(Error::range("delta", p.delta, format!("(0, {delta_hi})")));
    }
    let k_lo = p.beta * p.s / (1.0 - 2.0 * p.delta);
    if !(p.kappa > k_lo && p.kappa < 1.0) {
        return Err(Error::range("kappa", p.kappa, format!("({k_lo}, 1)")));
    }
    if !(r > 1.0) {
        return Err(Error::range("R", r, "(1, inf)"));
    }
    let ln = r.ln();
    Ok((c0 * p.kappa / (p.rho0 * p.s)) * p.tau * r.powf(p.kappa) * ln
        + 2.0 * p.kappa * ln
        - ((1.0 - 2.0 * p.delta) * p.kappa / p.s - p.beta) * r * ln)
}

/// First radius in the sampled sequence past which the exponent stays below
/// `threshold_log` (e.g. `ln(1e-6)`), assuming the tail is decreasing.
pub fn crossover_radius(samples: &[(f64, f64)], threshold_log: f64) -> Option<f64> {
    let mut crossing = None;
    for &(r, v) in samples {
        if v < threshold_log {
            crossing.get_or_insert(r);
        } else {
            crossing = None;
        }
    }
    crossing
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::families::*;
    use proptest::prelude::*;

    fn seg_comb(hw: i64) -> (WeightedGraph, PseudoMetric) {
        let g = z_segment(hw);
        let d = PseudoMetric::combinatorial(&g);
        (g, d)
    }

    #[test]
    fn cutoff_profile_on_the_line() {
        let (g, d) = seg_comb(20);
        let x0 = g.vertex("0").unwrap();
        let params = CutoffParams::new(x0, 10.0, 0.2).unwrap();
        let row = d.distances_from(x0);
        let eta = cutoff_values(&row, &params, d.jump_size());
        for i in -7..=7i64 {
            assert_eq!(eta[g.vertex(&i.to_string()).unwrap()], 1.0, "at {i}");
        }
        assert_eq!(eta[g.vertex("8").unwrap()], 0.5);
        assert_eq!(eta[g.vertex("9").unwrap()], 0.0);
        assert_eq!(eta[g.vertex("-9").unwrap()], 0.0);
        assert_eq!(eta[x0], 1.0);
    }

    #[test]
    fn cutoff_margins_tight_on_the_line() {
        let (g, d) = seg_comb(20);
        let x0 = g.vertex("0").unwrap();
        let params = CutoffParams::new(x0, 10.0, 0.2).unwrap();
        let c0 = intrinsic_bound(&g, &d, 1.0).unwrap();
        let m = cutoff_margins(&g, &d, &params, Some(c0)).unwrap();
        assert!(m.supported_in_interior);
        // |eta(8)-eta(7)| = 0.5 = d/(delta R): tight
        assert!(m.gradient.value.abs() < 1e-12, "{:?}", m.gradient);
        assert!(m.gradient.passed(1e-12));
        assert!(m.gradient_sum.passed(1e-12));
        assert!(m.laplacian.unwrap().passed(1e-12));
    }

    #[test]
    fn cutoff_plateau_edges_have_zero_difference() {
        let (g, d) = seg_comb(30);
        let x0 = g.vertex("0").unwrap();
        let params = CutoffParams::new(x0, 12.0, 0.25).unwrap();
        let row = d.distances_from(x0);
        let eta = cutoff_values(&row, &params, d.jump_size());
        let a = g.vertex("0").unwrap();
        let b = g.vertex("1").unwrap();
        assert_eq!(eta[a], eta[b]);
        // and differences vanish outside the annulus
        let s = d.jump_size();
        for x in 0..g.n() {
            for &(y, _) in g.neighbors(x) {
                if !cutoff_annulus(row[x], &params, s) {
                    assert_eq!(eta[y] - eta[x], 0.0);
                }
            }
        }
    }

    #[test]
    fn exp_weight_values() {
        let w = ExpWeight::new(0.0, 0.7, 0.2, 10.0).unwrap();
        assert!((w.value(3.0, 1.0) - (-0.7f64).exp()).abs() < 1e-15);
        let w = ExpWeight::new(1.0, 0.0, 0.2, 10.0).unwrap();
        assert!((w.value(4.0, 5.0) - (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(w.value(0.0, 0.0), 1.0);
        assert_eq!(w.xi(0.0, 0.0), 0.0);
    }

    #[test]
    fn poly_weight_values() {
        let s = 0.5;
        let w = PolyWeight::new(0.0, 0.3, 2.0, s).unwrap();
        assert!((w.value(7.0, 2.0) - (-0.6f64).exp()).abs() < 1e-15);
        let w = PolyWeight::new(1.0, 0.0, 2.0, s).unwrap();
        assert_eq!(w.value(0.0, 0.0), 0.5);
        assert_eq!(w.value(3.0, 0.0), 0.2);
        assert!(PolyWeight::new(1.0, 0.0, 0.4, s).is_err());
    }

    #[test]
    fn profile_constants_hand_values() {
        let c = ProfileConstants::new(1.0, 2.0, 1.0).unwrap();
        assert_eq!(c.c1, 4.0);
        assert_eq!(c.c2, 2.0);
        assert_eq!(c.c3, 2.0);
        let c = ProfileConstants::new(0.0, 2.0, 1.0).unwrap();
        assert_eq!(c.c1, 2.0);
        assert_eq!(c.c2, 1.0);
        let c = ProfileConstants::new(1.5, 2.0, 1e-12).unwrap();
        assert!((c.c1 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn profile_shift_bound_holds_vertexwise() {
        let dists: Vec<f64> = (0..500).map(|i| i as f64 * 0.37).collect();
        let c = ProfileConstants::new(1.7, 1.9, 1.2).unwrap();
        assert!(c.shift_bound_margin(&dists) >= -1e-12);
        assert!(c.ratio_monotonicity_defect(100.0, 1000) <= 1e-12);
    }

    #[test]
    fn exp_bracket_margin_on_the_line() {
        let g = z_segment(40);
        let d = PseudoMetric::canonical_intrinsic(&g);
        let rho = DensityField::constant(&g, 1.0).unwrap();
        let x0 = g.vertex("0").unwrap();
        let s = d.jump_size();
        for alpha in [0.0, 0.1, 1.0, 5.0] {
            let gamma = ExpWeight::bracket_threshold(alpha, s, 1.0);
            let w = ExpWeight::new(alpha, gamma, 0.2, 10.0).unwrap();
            let m = exp_weight_bracket_margin(&g, &d, &rho, &w, x0, false).unwrap();
            assert!(m.passed(1e-12), "alpha {alpha}: {m:?}");
        }
    }

    #[test]
    fn exp_bracket_zero_parameters_give_zero_margin() {
        let g = z_segment(10);
        let d = PseudoMetric::canonical_intrinsic(&g);
        let rho = DensityField::constant(&g, 1.0).unwrap();
        let w = ExpWeight::new(0.0, 0.0, 0.2, 5.0).unwrap();
        let m = exp_weight_bracket_margin(&g, &d, &rho, &w, 0, false).unwrap();
        assert_eq!(m.value, 0.0);
    }

    #[test]
    fn exp_bracket_below_threshold_rejected_but_forceable() {
        let g = z_segment(20);
        let d = PseudoMetric::canonical_intrinsic(&g);
        let rho = DensityField::constant(&g, 1.0).unwrap();
        let x0 = g.vertex("0").unwrap();
        let w = ExpWeight::new(5.0, 0.0, 0.2, 10.0).unwrap();
        assert!(exp_weight_bracket_margin(&g, &d, &rho, &w, x0, false).is_err());
        let m = exp_weight_bracket_margin(&g, &d, &rho, &w, x0, true).unwrap();
        assert!(m.exploratory);
        assert!(m.value > 0.0, "no negative time term, margin {}", m.value);
    }

    #[test]
    fn exp_heat_margin_on_the_line() {
        let g = z_segment(40);
        let d = PseudoMetric::canonical_intrinsic(&g);
        let rho = DensityField::constant(&g, 1.0).unwrap();
        let x0 = g.vertex("0").unwrap();
        let s = d.jump_size();
        let c0 = intrinsic_bound(&g, &d, 1.0).unwrap();
        for alpha in [0.0, 0.5, 1.0, 5.0] {
            let gamma = ExpWeight::heat_threshold(alpha, s, c0, 1.0);
            let w = ExpWeight::new(alpha, gamma, 0.2, 10.0).unwrap();
            let m = exp_weight_heat_margin(&g, &d, &rho, &w, x0, false).unwrap();
            assert!(m.passed(1e-12), "alpha {alpha}: {m:?}");
        }
    }

    #[test]
    fn poly_margins_on_the_line() {
        let g = z_segment(40);
        let d = PseudoMetric::canonical_intrinsic(&g);
        let s = d.jump_size();
        let k = s + 1.0;
        let x0 = g.vertex("0").unwrap();
        let c0 = intrinsic_bound(&g, &d, 1.0).unwrap();
        for sigma in [0.5, 1.0] {
            let rho = DensityField::vanishing(&g, &d, x0, 1.0, sigma, k).unwrap();
            for alpha in [0.1, 1.0, 5.0] {
                let c = ProfileConstants::new(alpha, k, s).unwrap();
                let gb = PolyWeight::bracket_threshold(alpha, &c, 1.0);
                let wb = PolyWeight::new(alpha, gb, k, s).unwrap();
                let m =
                    poly_weight_bracket_margin(&g, &d, &rho, &wb, x0, sigma, false).unwrap();
                assert!(m.passed(1e-12), "bracket sigma {sigma} alpha {alpha}: {m:?}");
                let gh = PolyWeight::heat_threshold(alpha, c0, &c, 1.0);
                let wh = PolyWeight::new(alpha, gh, k, s).unwrap();
                let m = poly_weight_heat_margin(&g, &d, &rho, &wh, x0, sigma, false).unwrap();
                assert!(m.passed(1e-12), "heat sigma {sigma} alpha {alpha}: {m:?}");
            }
        }
        // sigma = 2 applies to the bracket inequality only
        let rho = DensityField::vanishing(&g, &d, x0, 1.0, 2.0, k).unwrap();
        let c = ProfileConstants::new(1.0, k, s).unwrap();
        let w = PolyWeight::new(1.0, PolyWeight::bracket_threshold(1.0, &c, 1.0), k, s).unwrap();
        assert!(poly_weight_bracket_margin(&g, &d, &rho, &w, x0, 2.0, false)
            .unwrap()
            .passed(1e-12));
        assert!(poly_weight_heat_margin(&g, &d, &rho, &w, x0, 2.0, false).is_err());
    }

    #[test]
    fn poly_gradient_margin_hand_example() {
        // d(x,x0)=3, d(y,x0)=4, d(x,y)=1, k=2, s=1, alpha=1:
        // lhs = 1/5 - 1/6 = 1/30, rhs = (3+2-1)^{-2} = 1/16
        let g = z_segment(10);
        let d = PseudoMetric::combinatorial(&g);
        let x0 = g.vertex("0").unwrap();
        let x = g.vertex("3").unwrap();
        let y = g.vertex("4").unwrap();
        let m = poly_weight_gradient_margin_pair(&g, &d, x, y, x0, 1.0, 2.0).unwrap();
        assert!((m - (1.0 / 16.0 - 1.0 / 30.0)).abs() < 1e-15);
        let zero = poly_weight_gradient_margin_pair(&g, &d, x, x, x0, 1.0, 2.0).unwrap();
        assert_eq!(zero, 0.0); // lhs and rhs both vanish when x = y
        let err = poly_weight_gradient_margin_pair(&g, &d, x0, y, x0, 1.0, 2.0);
        assert!(err.is_err(), "non-adjacent pair must be rejected");
    }

    #[test]
    fn poly_gradient_margin_all_edges() {
        let g = z_segment(250);
        let d = PseudoMetric::canonical_intrinsic(&g);
        let x0 = g.vertex("0").unwrap();
        let s = d.jump_size();
        for alpha in [0.1, 1.0, 5.0] {
            let m = poly_weight_gradient_margin(&g, &d, x0, alpha, s + 1.0).unwrap();
            assert!(m.passed(1e-12), "alpha {alpha}: {m:?}");
        }
    }

    #[test]
    fn admissibility_of_cutoff_with_both_weights() {
        let g = z_segment(30);
        let d = PseudoMetric::canonical_intrinsic(&g);
        let x0 = g.vertex("0").unwrap();
        let s = d.jump_size();
        let params = CutoffParams::new(x0, 12.0, 0.2).unwrap();
        let row = d.distances_from(x0);
        let eta = cutoff_values(&row, &params, s);
        let zeta = ExpWeight::new(1.0, 0.0, 0.2, 12.0).unwrap();
        let sp: Vec<f64> = row.iter().map(|&dd| zeta.spatial(dd)).collect();
        assert!(admissibility_margin(&g, &eta, &sp).passed(1e-12));
        let theta = PolyWeight::new(1.5, 0.0, s + 1.0, s).unwrap();
        let sp: Vec<f64> = row.iter().map(|&dd| theta.spatial(dd)).collect();
        assert!(admissibility_margin(&g, &eta, &sp).passed(1e-12));
        // a constant weight pairs with margin exactly zero
        let m = admissibility_margin(&g, &eta, &vec![1.0; g.n()]);
        assert_eq!(m.value, 0.0);
    }

    #[test]
    fn margins_nonincreasing_in_gamma() {
        let g = z_segment(30);
        let d = PseudoMetric::canonical_intrinsic(&g);
        let rho = DensityField::constant(&g, 1.0).unwrap();
        let x0 = g.vertex("0").unwrap();
        let s = d.jump_size();
        let base = ExpWeight::bracket_threshold(1.0, s, 1.0);
        let mut prev = f64::INFINITY;
        for mult in [1.0, 1.5, 2.0, 4.0] {
            let w = ExpWeight::new(1.0, base * mult, 0.2, 10.0).unwrap();
            let m = exp_weight_bracket_margin(&g, &d, &rho, &w, x0, false).unwrap();
            assert!(m.value <= prev + 1e-15);
            prev = m.value;
        }
    }

    #[test]
    fn decay_f_hand_coefficients() {
        let p = DecayParams {
            kappa: 0.8,
            s: 1.0,
            rho0: 1.0,
            beta: 0.25,
            delta: 0.1,
            tau: 1.0,
        };
        let r: f64 = 100.0;
        let ln = r.ln();
        let expect = 0.08 * r.powf(0.8) * ln * ln + 1.2 * ln - 0.07 * r * ln;
        assert!((decay_exponent_f(r, &p).unwrap() - expect).abs() < 1e-10);
        assert!(decay_exponent_f(1e6, &p).unwrap() < 0.0);
        // leading negative coefficient positive for in-range parameters
        assert!((1.0 - 2.0 * p.delta) * p.kappa / (2.0 * p.s) - p.beta > 0.0);
    }

    #[test]
    fn decay_f_eventually_strictly_decreasing_on_doubling() {
        let p = DecayParams {
            kappa: 0.8,
            s: 1.0,
            rho0: 1.0,
            beta: 0.25,
            delta: 0.1,
            tau: 1.0,
        };
        let vals: Vec<f64> = (1..45)
            .map(|n| decay_exponent_f(2f64.powi(n), &p).unwrap())
            .collect();
        let tail = &vals[vals.len() - 8..];
        assert!(tail.windows(2).all(|w| w[1] < w[0]), "tail {tail:?}");
    }

    #[test]
    fn decay_g_in_range_and_rejections() {
        let p = DecayParams {
            kappa: 0.8,
            s: 1.0,
            rho0: 1.0,
            beta: 0.25,
            delta: 0.1,
            tau: 1.0,
        };
        assert!(decay_exponent_g(1e6, &p, 1.0).unwrap() < 0.0);
        let vals: Vec<f64> = (1..40)
            .map(|n| decay_exponent_g(2f64.powi(n), &p, 1.0).unwrap())
            .collect();
        let tail = &vals[vals.len() - 8..];
        assert!(tail.windows(2).all(|w| w[1] < w[0]));
        // boundary beta rejected, with the interval named
        let bad = DecayParams { beta: 0.5, ..p };
        let err = decay_exponent_g(10.0, &bad, 1.0).unwrap_err();
        assert!(err.to_string().contains("beta"), "{err}");
        let bad = DecayParams { kappa: 0.2, ..p };
        let err = decay_exponent_f(10.0, &bad).unwrap_err();
        assert!(err.to_string().contains("kappa"), "{err}");
    }

    #[test]
    fn crossover_detection() {
        let samples: Vec<(f64, f64)> = vec![(1.0, 5.0), (2.0, -20.0), (4.0, -30.0)];
        assert_eq!(crossover_radius(&samples, -13.8), Some(2.0));
        let none: Vec<(f64, f64)> = vec![(1.0, 5.0), (2.0, -1.0)];
        assert_eq!(crossover_radius(&none, -13.8), None);
    }

    proptest! {
        // (e^a - 1)^2 <= e^{2|a|} a^2
        #[test]
        fn elementary_exp_inequality(a in -50.0f64..50.0) {
            let lhs = (a.exp() - 1.0).powi(2);
            let rhs = (2.0 * a.abs()).exp() * a * a;
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-300);
        }

        #[test]
        fn cutoff_is_lipschitz_on_random_radii(r in 3.0f64..30.0, delta in 0.05f64..0.45) {
            let g = z_segment(40);
            let d = PseudoMetric::combinatorial(&g);
            let x0 = g.vertex("0").unwrap();
            let params = CutoffParams::new(x0, r, delta).unwrap();
            let m = cutoff_margins(&g, &d, &params, None).unwrap();
            prop_assert!(m.gradient.passed(1e-12));
            prop_assert!(m.gradient_sum.passed(1e-12));
        }
    }

    #[test]
    fn random_graph_cutoff_margins() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for _ in 0..50 {
            let n = rng.gen_range(5..50);
            let g = random_connected(&mut rng, n);
            let d = PseudoMetric::canonical_intrinsic(&g);
            let s = d.jump_size();
            let x0 = rng.gen_range(0..g.n());
            let diam = (0..g.n())
                .map(|x| d.dist(x0, x))
                .fold(0.0f64, f64::max);
            let delta = 0.2;
            let r = (2.0 * s / (1.0 - 2.0 * delta) * 1.2).max(0.6 * diam).max(1e-6);
            let params = CutoffParams::new(x0, r, delta).unwrap();
            let c0 = intrinsic_bound(&g, &d, 1.0).unwrap();
            let m = cutoff_margins(&g, &d, &params, Some(c0)).unwrap();
            assert!(m.gradient.passed(1e-12), "{:?}", m.gradient);
            assert!(m.gradient_sum.passed(1e-12));
            assert!(m.laplacian.unwrap().passed(1e-12));
        }
    }
}
