//! Time stepping for `rho du/dt = Delta u + f` on finite truncations with the
//! exterior held at zero.
//!
//! The spatial operator is assembled as the positive semidefinite map
//! `(L u)(x) = sum_y omega(x,y) (u(x) - u(y)) + extw(x) u(x)`, so that
//! `Delta u = -(1/mu) L u` with the Dirichlet exterior folded into the
//! diagonal. Implicit systems `(diag(rho mu) + c L) u = b` are symmetric
//! positive definite; they are solved by a dense Cholesky factorization below
//! 2000 vertices (factored once per run, the matrix is constant on a uniform
//! grid) and by conjugate gradient with relative residual 1e-12 above.

use crate::density::DensityField;
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

/// Dense direct solves are preferred below this size.
const DIRECT_SOLVE_LIMIT: usize = 2_000;
const CG_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ExplicitEuler,
    ImplicitEuler,
    CrankNicolson,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::ExplicitEuler => "explicit",
            Scheme::ImplicitEuler => "implicit",
            Scheme::CrankNicolson => "crank-nicolson",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "explicit" => Ok(Scheme::ExplicitEuler),
            "implicit" => Ok(Scheme::ImplicitEuler),
            "crank-nicolson" | "cn" => Ok(Scheme::CrankNicolson),
            other => Err(Error::Parse(format!("unknown scheme `{other}`"))),
        }
    }
}

/// The assembled operator `L` (graph Laplacian with exterior diagonal).
#[derive(Debug, Clone)]
pub struct HeatOperator {
    /// Diagonal `deg(x) + extw(x)`, i.e. the ambient weighted row sum.
    pub diag: Vec<f64>,
    adj: Vec<Vec<(usize, f64)>>,
}

impl HeatOperator {
    pub fn assemble(g: &WeightedGraph) -> HeatOperator {
        HeatOperator {
            diag: (0..g.n()).map(|x| g.ambient_deg(x)).collect(),
            adj: (0..g.n()).map(|x| g.neighbors(x).to_vec()).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    /// `out = L u`.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        for x in 0..self.n() {
            let mut acc = self.diag[x] * u[x];
            for &(y, w) in &self.adj[x] {
                acc -= w * u[y];
            }
            out[x] = acc;
        }
    }

    pub fn apply_vec(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        self.apply(u, &mut out);
        out
    }

    /// Dense matrix of `diag(m) + c L` (row-major).
    fn dense_shifted(&self, m: &[f64], c: f64) -> Vec<f64> {
        let n = self.n();
        let mut a = vec![0.0; n * n];
        for x in 0..n {
            a[x * n + x] = m[x] + c * self.diag[x];
            for &(y, w) in &self.adj[x] {
                a[x * n + y] -= c * w;
            }
        }
        a
    }
}

/// Largest explicit-Euler step preserving the discrete maximum principle:
/// `min_x rho(x) mu(x) / deg(x)` (ambient degree on truncations).
pub fn cfl_limit(g: &WeightedGraph, rho: &DensityField) -> f64 {
    (0..g.n())
        .filter(|&x| g.ambient_deg(x) > 0.0)
        .map(|x| rho.rho[x] * g.mu(x) / g.ambient_deg(x))
        .fold(f64::INFINITY, f64::min)
}

/// Source term of the equation.
pub enum Source<'a> {
    Zero,
    Fn(&'a dyn Fn(usize, f64) -> f64),
}

impl Source<'_> {
    fn eval(&self, x: usize, t: f64) -> f64 {
        match self {
            Source::Zero => 0.0,
            Source::Fn(f) => f(x, t),
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, Source::Zero)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    /// Store every `stride`-th sample (the initial and final states are always
    /// kept). 1 keeps everything.
    pub stride: usize,
}

impl SolveOptions {
    pub fn new(scheme: Scheme, dt: f64, t_end: f64) -> Self {
        SolveOptions {
            scheme,
            dt,
            t_end,
            stride: 1,
        }
    }
}

/// A time-sampled solution of the discrete scheme.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `states[k][x]`.
    pub states: Vec<Vec<f64>>,
    pub scheme: Scheme,
    pub dt: f64,
}

impl Trajectory {
    pub fn n_vertices(&self) -> usize {
        self.states.first().map(Vec::len).unwrap_or(0)
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    /// Index of a grid time, within rounding.
    pub fn time_index(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&tk| (tk - t).abs() <= 1e-9 * (1.0 + t.abs()))
            .ok_or_else(|| Error::Precondition(format!("{t} is not a grid time")))
    }
}

pub fn solve(
    g: &WeightedGraph,
    rho: &DensityField,
    u0: &[f64],
    source: Source<'_>,
    opts: &SolveOptions,
) -> Result<Trajectory> {
    let n = g.n();
    if u0.len() != n || rho.rho.len() != n {
        return Err(Error::Precondition(
            "initial data / density size mismatch".into(),
        ));
    }
    if !(opts.dt > 0.0) {
        return Err(Error::range("dt", opts.dt, "(0, inf)"));
    }
    if !(opts.t_end > 0.0) {
        return Err(Error::range("t_end", opts.t_end, "(0, inf)"));
    }
    let steps_f = opts.t_end / opts.dt;
    let steps = steps_f.round() as usize;
    if steps == 0 || (steps_f - steps as f64).abs() > 1e-6 {
        return Err(Error::Precondition(format!(
            "t_end = {} is not an integral number of steps of dt = {}",
            opts.t_end, opts.dt
        )));
    }
    let op = HeatOperator::assemble(g);
    let rho_mu: Vec<f64> = (0..n).map(|x| rho.rho[x] * g.mu(x)).collect();
    let mu: Vec<f64> = (0..n).map(|x| g.mu(x)).collect();

    if opts.scheme == Scheme::ExplicitEuler {
        let limit = cfl_limit(g, rho);
        if opts.dt > limit * (1.0 + 1e-12) {
            return Err(Error::range(
                "dt",
                opts.dt,
                format!("(0, {limit}] to keep the explicit scheme monotone"),
            ));
        }
    }

    // Constant system matrix on the uniform grid: factor once.
    let implicit_shift = match opts.scheme {
        Scheme::ImplicitEuler => Some(opts.dt),
        Scheme::CrankNicolson => Some(0.5 * opts.dt),
        Scheme::ExplicitEuler => None,
    };
    let chol = match implicit_shift {
        Some(c) if n <= DIRECT_SOLVE_LIMIT => {
            Some(Cholesky::factor(&op.dense_shifted(&rho_mu, c), n)?)
        }
        _ => None,
    };

    let mut u = u0.to_vec();
    let mut times = vec![0.0];
    let mut states = vec![u.clone()];
    let mut lu = vec![0.0; n];
    for step in 0..steps {
        let t0 = step as f64 * opts.dt;
        let t1 = (step + 1) as f64 * opts.dt;
        match opts.scheme {
            Scheme::ExplicitEuler => {
                op.apply(&u, &mut lu);
                for x in 0..n {
                    u[x] += opts.dt * (mu[x] * source.eval(x, t0) - lu[x]) / rho_mu[x];
                }
            }
            Scheme::ImplicitEuler => {
                let mut rhs: Vec<f64> = (0..n).map(|x| rho_mu[x] * u[x]).collect();
                if !source.is_zero() {
                    for x in 0..n {
                        rhs[x] += opts.dt * mu[x] * source.eval(x, t1);
                    }
                }
                u = solve_spd(&op, &rho_mu, opts.dt, &rhs, &u, chol.as_ref())?;
            }
            Scheme::CrankNicolson => {
                op.apply(&u, &mut lu);
                let mut rhs: Vec<f64> =
                    (0..n).map(|x| rho_mu[x] * u[x] - 0.5 * opts.dt * lu[x]).collect();
                if !source.is_zero() {
                    for x in 0..n {
                        rhs[x] += 0.5
                            * opts.dt
                            * mu[x]
                            * (source.eval(x, t0) + source.eval(x, t1));
                    }
                }
                u = solve_spd(&op, &rho_mu, 0.5 * opts.dt, &rhs, &u, chol.as_ref())?;
            }
        }
        let last = step + 1 == steps;
        if last || (step + 1) % opts.stride.max(1) == 0 {
            times.push(t1);
            states.push(u.clone());
        }
    }
    Ok(Trajectory {
        times,
        states,
        scheme: opts.scheme,
        dt: opts.dt,
    })
}

fn solve_spd(
    op: &HeatOperator,
    m: &[f64],
    c: f64,
    rhs: &[f64],
    warm: &[f64],
    chol: Option<&Cholesky>,
) -> Result<Vec<f64>> {
    if let Some(ch) = chol {
        return Ok(ch.solve(rhs));
    }
    conjugate_gradient(op, m, c, rhs, warm)
}

/// Conjugate gradient for `(diag(m) + c L) x = b`.
fn conjugate_gradient(
    op: &HeatOperator,
    m: &[f64],
    c: f64,
    b: &[f64],
    warm: &[f64],
) -> Result<Vec<f64>> {
    let n = b.len();
    let apply = |u: &[f64], out: &mut Vec<f64>| {
        op.apply(u, out);
        for x in 0..n {
            out[x] = m[x] * u[x] + c * out[x];
        }
    };
    let norm_b = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm_b == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut x = warm.to_vec();
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut p = r.clone();
    let mut rs: f64 = r.iter().map(|v| v * v).sum();
    let max_iter = 20 * n + 100;
    for it in 0..max_iter {
        if rs.sqrt() <= CG_REL_TOL * norm_b {
            return Ok(x);
        }
        apply(&p, &mut ax);
        let denom: f64 = p.iter().zip(&ax).map(|(a, b)| a * b).sum();
        let alpha = rs / denom;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ax[i];
        }
        let rs_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rs_new / rs;
        rs = rs_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        if it + 1 == max_iter {
            return Err(Error::SolverDiverged(rs.sqrt() / norm_b, max_iter));
        }
    }
    Ok(x)
}

/// Dense Cholesky factorization `A = L L^T` of a symmetric positive definite
/// matrix, kept for the whole run.
struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    fn factor(a: &[f64], n: usize) -> Result<Cholesky> {
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a[i * n + j];
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if sum <= 0.0 {
                        return Err(Error::Precondition(
                            "system matrix is not positive definite".into(),
                        ));
                    }
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        Ok(Cholesky { n, l })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut sum = y[i];
            for k in 0..i {
                sum -= self.l[i * n + k] * y[k];
            }
            y[i] = sum / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut sum = y[i];
            for k in i + 1..n {
                sum -= self.l[k * n + i] * y[k];
            }
            y[i] = sum / self.l[i * n + i];
        }
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RichardsonOutcome {
    /// Observed convergence order from consecutive refinements.
    Order(f64),
    /// Differences vanish (e.g. the zero solution); the scheme is exact here.
    Exact,
}

/// Observed time-discretization order from at least three trajectories of the
/// same problem with dt halved between consecutive ones.
pub fn richardson_order(trajs: &[&Trajectory]) -> Result<RichardsonOutcome> {
    if trajs.len() < 3 {
        return Err(Error::Precondition(
            "need at least three trajectories with halved dt".into(),
        ));
    }
    for pair in trajs.windows(2) {
        if (pair[0].dt / pair[1].dt - 2.0).abs() > 1e-9 {
            return Err(Error::Precondition("dt must halve between trajectories".into()));
        }
        if (pair[0].t_end() - pair[1].t_end()).abs() > 1e-9 {
            return Err(Error::Precondition("horizons differ".into()));
        }
    }
    let err = |a: &Trajectory, b: &Trajectory| -> f64 {
        a.final_state()
            .iter()
            .zip(b.final_state())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let mut orders = Vec::new();
    for w in trajs.windows(3) {
        let e0 = err(w[0], w[1]);
        let e1 = err(w[1], w[2]);
        if e0 < 1e-14 && e1 < 1e-14 {
            return Ok(RichardsonOutcome::Exact);
        }
        if e1 == 0.0 {
            return Ok(RichardsonOutcome::Exact);
        }
        orders.push((e0 / e1).log2());
    }
    let mean = orders.iter().sum::<f64>() / orders.len() as f64;
    Ok(RichardsonOutcome::Order(mean))
}

/// Closed-form solution of the two-vertex unit problem with `u0 = (1, 0)`:
/// `u(t) = ((1 + e^{-2t})/2, (1 - e^{-2t})/2)`. The solver oracle.
pub fn pair_oracle(t: f64) -> (f64, f64) {
    let e = (-2.0 * t).exp();
    ((1.0 + e) / 2.0, (1.0 - e) / 2.0)
}
