//! Bound-constrained augmented Lagrangian.
//!
//! Outer loop: `L(z; μ, ρ) = f(z) + μᵀc(z) + ρ/2 ‖c(z)‖²` is minimized over the
//! box, then `μ ← μ + ρ c` and `ρ` grows when the violation stalls. The inner
//! box-constrained minimization is either a projected Newton method with an
//! ε-active set or a projected limited-memory BFGS method.

use std::collections::VecDeque;

use super::linalg::BorderedBanded;
use crate::error::{Error, Result};

/// Smooth objective with equality constraints and simple bounds, exposing
/// exactly what the solver needs.
pub trait NlpProblem {
    fn n_vars(&self) -> usize;
    fn n_constraints(&self) -> usize;
    fn lower(&self) -> &[f64];
    fn upper(&self) -> &[f64];
    fn objective(&self, z: &[f64]) -> f64;
    /// Overwrites `g` with `∇f(z)`.
    fn gradient(&self, z: &[f64], g: &mut [f64]);
    fn constraints(&self, z: &[f64], c: &mut [f64]);
    /// `out += J(z)ᵀ y`.
    fn add_jacobian_transpose(&self, z: &[f64], y: &[f64], out: &mut [f64]);
    /// `(banded size, half bandwidth, border size)` of the Hessian.
    fn hessian_shape(&self) -> (usize, usize, usize);
    /// Writes `∇²f + Σ yᵢ∇²cᵢ + ρ JᵀJ` into `h`.
    fn assemble_hessian(&self, z: &[f64], y: &[f64], rho: f64, h: &mut BorderedBanded);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerSolver {
    /// Second-order steps on the free variables.
    ProjectedNewton,
    /// Limited-memory quasi-Newton steps; `memory` correction pairs.
    ProjectedLbfgs { memory: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Projected-gradient norm of the Lagrangian at which the solve stops.
    pub kkt_tol: f64,
    /// Largest dynamics residual accepted at the solution.
    pub constraint_tol: f64,
    pub max_outer: usize,
    /// Inner iterations per outer iteration.
    pub max_inner: usize,
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    pub max_penalty: f64,
    pub inner: InnerSolver,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            kkt_tol: 1e-6,
            constraint_tol: 1e-8,
            max_outer: 50,
            max_inner: 500,
            initial_penalty: 10.0,
            penalty_growth: 10.0,
            max_penalty: 1e12,
            inner: InnerSolver::ProjectedNewton,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("solver.kkt_tol", self.kkt_tol),
            ("solver.constraint_tol", self.constraint_tol),
            ("solver.initial_penalty", self.initial_penalty),
            ("solver.max_penalty", self.max_penalty),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be strictly positive, got {v}"),
                });
            }
        }
        if !(self.penalty_growth > 1.0) {
            return Err(Error::InvalidParameter {
                name: "solver.penalty_growth",
                reason: format!("must exceed 1, got {}", self.penalty_growth),
            });
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::InvalidParameter {
                name: "solver.max_iterations",
                reason: "iteration caps must be at least 1".into(),
            });
        }
        if let InnerSolver::ProjectedLbfgs { memory } = self.inner {
            if memory == 0 {
                return Err(Error::InvalidParameter {
                    name: "solver.memory",
                    reason: "need at least one correction pair".into(),
                });
            }
        }
        Ok(())
    }
}

/// Merit value at fixed `(μ, ρ)` before and after one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeritRecord {
    pub before: f64,
    pub after: f64,
    pub penalty: f64,
    pub violation: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct AlOutcome {
    pub z: Vec<f64>,
    pub objective: f64,
    pub kkt: f64,
    pub violation: f64,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    pub converged: bool,
    pub merit_history: Vec<MeritRecord>,
}

/// Evaluates the augmented Lagrangian, its gradient (if asked) and the constraints.
struct Merit<'a, P: NlpProblem> {
    p: &'a P,
    mu: &'a [f64],
    rho: f64,
}

impl<P: NlpProblem> Merit<'_, P> {
    fn value(&self, z: &[f64], c: &mut [f64]) -> f64 {
        self.p.constraints(z, c);
        let mut v = self.p.objective(z);
        for (m, ci) in self.mu.iter().zip(c.iter()) {
            v += m * ci + 0.5 * self.rho * ci * ci;
        }
        v
    }

    /// Gradient given constraints already evaluated at `z`. Leaves the
    /// multiplier estimate `μ + ρc` in `y`.
    fn gradient(&self, z: &[f64], c: &[f64], y: &mut [f64], g: &mut [f64]) {
        self.p.gradient(z, g);
        for i in 0..y.len() {
            y[i] = self.mu[i] + self.rho * c[i];
        }
        self.p.add_jacobian_transpose(z, y, g);
    }
}

fn projected_gradient_norm(z: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let mut m = 0.0f64;
    for i in 0..z.len() {
        let step = (z[i] - g[i]).clamp(lo[i], hi[i]) - z[i];
        m = m.max(step.abs());
    }
    m
}

/// ε-active set: variables at (or within ε of) a bound with the gradient
/// pushing outward.
fn active_set(z: &[f64], g: &[f64], lo: &[f64], hi: &[f64], eps: f64, out: &mut [bool]) {
    for i in 0..z.len() {
        out[i] = (z[i] <= lo[i] + eps && g[i] > 0.0) || (z[i] >= hi[i] - eps && g[i] < 0.0);
    }
}

#[derive(Debug, Clone, Copy)]
struct InnerStats {
    iterations: usize,
    pg: f64,
}

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;
const EPS_ACTIVE: f64 = 1e-8;

/// Backtracking along the projection arc `P(z + a d)`. On success `z`, `c`,
/// `val` hold the accepted point.
#[allow(clippy::too_many_arguments)]
fn arc_search<P: NlpProblem>(
    merit: &Merit<'_, P>,
    z: &mut [f64],
    c: &mut [f64],
    val: &mut f64,
    g: &[f64],
    d: &[f64],
    trial: &mut [f64],
    c_trial: &mut [f64],
) -> bool {
    let (lo, hi) = (merit.p.lower(), merit.p.upper());
    let mut a = 1.0;
    while a >= MIN_STEP {
        let mut pred = 0.0;
        for i in 0..z.len() {
            trial[i] = (z[i] + a * d[i]).clamp(lo[i], hi[i]);
            pred -= g[i] * (trial[i] - z[i]);
        }
        let v = merit.value(trial, c_trial);
        if v.is_finite() && v < *val && *val - v >= ARMIJO * pred.max(0.0) {
            z.copy_from_slice(trial);
            c.copy_from_slice(c_trial);
            *val = v;
            return true;
        }
        a *= 0.5;
    }
    false
}

struct Workspace {
    g: Vec<f64>,
    y: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
    trial: Vec<f64>,
    c_trial: Vec<f64>,
    active: Vec<bool>,
    hess: BorderedBanded,
}

impl Workspace {
    fn new<P: NlpProblem>(p: &P) -> Self {
        let (n, m) = (p.n_vars(), p.n_constraints());
        let (nb, bw, nc) = p.hessian_shape();
        Self {
            g: vec![0.0; n],
            y: vec![0.0; m],
            c: vec![0.0; m],
            d: vec![0.0; n],
            trial: vec![0.0; n],
            c_trial: vec![0.0; m],
            active: vec![false; n],
            hess: BorderedBanded::zeros(nb, bw, nc),
        }
    }
}

/// Steepest-descent fallback when the model step fails the line search.
fn gradient_step<P: NlpProblem>(merit: &Merit<'_, P>, z: &mut [f64], val: &mut f64, w: &mut Workspace) -> bool {
    let gmax = w.g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if gmax == 0.0 {
        return false;
    }
    for i in 0..z.len() {
        w.d[i] = -w.g[i] / gmax;
    }
    arc_search(merit, z, &mut w.c, val, &w.g, &w.d, &mut w.trial, &mut w.c_trial)
}

fn projected_newton<P: NlpProblem>(
    merit: &Merit<'_, P>,
    z: &mut [f64],
    tol: f64,
    max_iter: usize,
    w: &mut Workspace,
) -> InnerStats {
    let p = merit.p;
    let (lo, hi) = (p.lower(), p.upper());
    let mut val = merit.value(z, &mut w.c);
    let mut diag = vec![0.0; z.len()];
    let mut pg = f64::INFINITY;
    for it in 0..max_iter {
        merit.gradient(z, &w.c, &mut w.y, &mut w.g);
        pg = projected_gradient_norm(z, &w.g, lo, hi);
        if pg <= tol {
            return InnerStats { iterations: it, pg };
        }
        active_set(z, &w.g, lo, hi, pg.min(EPS_ACTIVE), &mut w.active);
        p.assemble_hessian(z, &w.y, merit.rho, &mut w.hess);
        for (i, dg) in diag.iter_mut().enumerate() {
            if w.active[i] {
                *dg = w.hess.diagonal(i);
            }
        }
        w.hess.fix_variables(&w.active);
        let scale = w.hess.max_abs_diagonal().max(1.0);
        let mut shift = 0.0;
        let factor = loop {
            match w.hess.factor(shift) {
                Ok(f) => break Some(f),
                Err(_) if shift < 1e6 * scale => {
                    shift = if shift == 0.0 { 1e-10 * scale } else { shift * 10.0 };
                }
                Err(_) => break None,
            }
        };
        let mut ok = false;
        if let Some(f) = factor {
            for i in 0..z.len() {
                w.d[i] = if w.active[i] { 0.0 } else { -w.g[i] };
            }
            f.solve(&mut w.d);
            for i in 0..z.len() {
                if w.active[i] {
                    w.d[i] = -w.g[i] / diag[i].max(1e-8);
                }
            }
            ok = arc_search(merit, z, &mut w.c, &mut val, &w.g, &w.d, &mut w.trial, &mut w.c_trial);
        }
        if !ok && !gradient_step(merit, z, &mut val, w) {
            return InnerStats { iterations: it + 1, pg };
        }
    }
    merit.gradient(z, &w.c, &mut w.y, &mut w.g);
    pg = pg.min(projected_gradient_norm(z, &w.g, lo, hi));
    InnerStats {
        iterations: max_iter,
        pg,
    }
}

fn projected_lbfgs<P: NlpProblem>(
    merit: &Merit<'_, P>,
    z: &mut [f64],
    tol: f64,
    max_iter: usize,
    memory: usize,
    w: &mut Workspace,
) -> InnerStats {
    let p = merit.p;
    let (lo, hi) = (p.lower(), p.upper());
    let n = z.len();
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(memory);
    let mut val = merit.value(z, &mut w.c);
    merit.gradient(z, &w.c, &mut w.y, &mut w.g);
    let mut z_old = vec![0.0; n];
    let mut g_old = vec![0.0; n];
    let mut alpha = vec![0.0; memory];
    let mut pg = f64::INFINITY;
    for it in 0..max_iter {
        pg = projected_gradient_norm(z, &w.g, lo, hi);
        if pg <= tol {
            return InnerStats { iterations: it, pg };
        }
        active_set(z, &w.g, lo, hi, pg.min(EPS_ACTIVE), &mut w.active);
        // two-loop recursion on the free subspace
        for i in 0..n {
            w.d[i] = if w.active[i] { 0.0 } else { w.g[i] };
        }
        for (j, (s, yv, rho)) in pairs.iter().enumerate().rev() {
            let a = rho * dot_free(s, &w.d, &w.active);
            alpha[j] = a;
            for i in 0..n {
                if !w.active[i] {
                    w.d[i] -= a * yv[i];
                }
            }
        }
        let gamma = pairs.back().map_or(1.0 / w.g.iter().fold(1.0f64, |m, v| m.max(v.abs())), |(s, yv, _)| {
            dot(s, yv) / dot(yv, yv)
        });
        for v in w.d.iter_mut() {
            *v *= gamma;
        }
        for (j, (s, yv, rho)) in pairs.iter().enumerate() {
            let b = rho * dot_free(yv, &w.d, &w.active);
            for i in 0..n {
                if !w.active[i] {
                    w.d[i] += (alpha[j] - b) * s[i];
                }
            }
        }
        let mut slope = 0.0;
        for i in 0..n {
            w.d[i] = if w.active[i] { -gamma * w.g[i] } else { -w.d[i] };
            slope += w.g[i] * w.d[i];
        }
        if !(slope < 0.0) {
            pairs.clear();
            for i in 0..n {
                w.d[i] = -gamma.abs() * w.g[i];
            }
        }
        z_old.copy_from_slice(z);
        g_old.copy_from_slice(&w.g);
        let ok = arc_search(merit, z, &mut w.c, &mut val, &w.g, &w.d, &mut w.trial, &mut w.c_trial);
        if !ok {
            if pairs.is_empty() {
                return InnerStats { iterations: it + 1, pg };
            }
            pairs.clear();
            continue;
        }
        merit.gradient(z, &w.c, &mut w.y, &mut w.g);
        let s: Vec<f64> = z.iter().zip(&z_old).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = w.g.iter().zip(&g_old).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-10 * dot(&s, &s).sqrt() * dot(&yv, &yv).sqrt() {
            if pairs.len() == memory {
                pairs.pop_front();
            }
            pairs.push_back((s, yv, 1.0 / sy));
        }
    }
    pg = pg.min(projected_gradient_norm(z, &w.g, lo, hi));
    InnerStats {
        iterations: max_iter,
        pg,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dot_free(a: &[f64], b: &[f64], active: &[bool]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        if !active[i] {
            acc += a[i] * b[i];
        }
    }
    acc
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub(crate) fn solve<P: NlpProblem>(p: &P, mut z: Vec<f64>, opts: &SolverOptions) -> AlOutcome {
    let m = p.n_constraints();
    let mut mu = vec![0.0; m];
    let mut rho = opts.initial_penalty;
    let mut w = Workspace::new(p);
    let mut history = Vec::new();
    let mut inner_total = 0;
    let mut kkt = f64::INFINITY;
    let mut violation = f64::INFINITY;
    let mut converged = false;
    let mut outer = 0;
    let mut best_violation = f64::INFINITY;
    while outer < opts.max_outer {
        outer += 1;
        let tol = (1e-2 * 0.1f64.powi(outer as i32 - 1)).max(0.1 * opts.kkt_tol);
        let merit = Merit { p, mu: &mu, rho };
        let before = merit.value(&z, &mut w.c);
        let stats = match opts.inner {
            InnerSolver::ProjectedNewton => projected_newton(&merit, &mut z, tol, opts.max_inner, &mut w),
            InnerSolver::ProjectedLbfgs { memory } => {
                projected_lbfgs(&merit, &mut z, tol, opts.max_inner, memory, &mut w)
            }
        };
        inner_total += stats.iterations;
        let after = merit.value(&z, &mut w.c);
        violation = max_abs(&w.c);
        kkt = stats.pg;
        history.push(MeritRecord {
            before,
            after,
            penalty: rho,
            violation,
        });
        for i in 0..m {
            mu[i] += rho * w.c[i];
        }
        if violation <= opts.constraint_tol && kkt <= opts.kkt_tol {
            converged = true;
            break;
        }
        if violation > 0.25 * best_violation && violation > opts.constraint_tol {
            rho = (rho * opts.penalty_growth).min(opts.max_penalty);
        }
        best_violation = best_violation.min(violation);
    }
    AlOutcome {
        objective: p.objective(&z),
        z,
        kkt,
        violation,
        inner_iterations: inner_total,
        outer_iterations: outer,
        converged,
        merit_history: history,
    }
}
