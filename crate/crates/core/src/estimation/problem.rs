//! Full-transcription form of the batch identification problem.
//!
//! Decision vector, time-major: for each sample `k < N−1` the block
//! `[T_z, T_w, q, ξ⁺, ξ⁻]`, then `[T_z, T_w, q]` for the last sample, then the
//! seven aggregate parameters. `q` and `ξ±` are stored divided by the
//! disturbance scale.

use super::linalg::BorderedBanded;
use super::solver::NlpProblem;
use super::{EstimationResult, IdentConfig};
use crate::aggregation::{AggregateData, AggregateParams};
use crate::error::{ensure_finite, Error, Result};
use crate::trace::SignalTrace;

pub const N_THETA: usize = 7;

const TAU_ZA: usize = 0;
const TAU_ZW: usize = 1;
const TAU_WA: usize = 2;
const TAU_WZ: usize = 3;
const C_Z: usize = 4;
const A_Z: usize = 5;
const A_W: usize = 6;

/// Variables per sample block.
const BLOCK: usize = 5;
/// Half bandwidth of the state/state Hessian block.
const BANDWIDTH: usize = 6;

/// Index arithmetic for the decision vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n_t: usize,
}

impl Layout {
    pub fn n_states(&self) -> usize {
        BLOCK * (self.n_t - 1) + 3
    }

    pub fn n_vars(&self) -> usize {
        self.n_states() + N_THETA
    }

    pub fn n_constraints(&self) -> usize {
        3 * (self.n_t - 1)
    }

    pub fn t_z(&self, k: usize) -> usize {
        BLOCK * k
    }

    pub fn t_w(&self, k: usize) -> usize {
        BLOCK * k + 1
    }

    pub fn q(&self, k: usize) -> usize {
        BLOCK * k + 2
    }

    pub fn xi_pos(&self, k: usize) -> usize {
        BLOCK * k + 3
    }

    pub fn xi_neg(&self, k: usize) -> usize {
        BLOCK * k + 4
    }

    pub fn theta(&self, i: usize) -> usize {
        self.n_states() + i
    }
}

/// Sparse constraint gradient, at most eight nonzeros.
#[derive(Debug, Clone, Copy)]
struct Row {
    idx: [usize; 8],
    val: [f64; 8],
    len: usize,
}

impl Row {
    fn new() -> Self {
        Row {
            idx: [0; 8],
            val: [0.0; 8],
            len: 0,
        }
    }

    #[inline]
    fn push(&mut self, i: usize, v: f64) {
        self.idx[self.len] = i;
        self.val[self.len] = v;
        self.len += 1;
    }

    fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.idx[..self.len].iter().copied().zip(self.val[..self.len].iter().copied())
    }
}

/// The batch problem bound to one data set and configuration.
#[derive(Debug, Clone)]
pub struct BatchProblem {
    layout: Layout,
    t_s: f64,
    t_z_meas: Vec<f64>,
    t_a: Vec<f64>,
    eta: Vec<f64>,
    q_ac: Vec<f64>,
    x0_star: [f64; 3],
    p_x0: [[f64; 3]; 3],
    theta_star: [f64; N_THETA],
    p_theta: [[f64; N_THETA]; N_THETA],
    lambda: f64,
    inv_r: f64,
    alpha: f64,
    scale: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    start_time: chrono::NaiveDateTime,
}

impl BatchProblem {
    /// Binds data and weights. Unlike [`super::solve_batch`] this accepts a zero
    /// L1 weight, which turns the objective into a pure quadratic.
    pub fn new(data: &AggregateData, config: &IdentConfig) -> Result<Self> {
        let n_t = data.len();
        if n_t < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: n_t });
        }
        for (name, tr) in [
            ("T_bar_z", &data.t_bar_z),
            ("T_bar_a", &data.t_bar_a),
            ("eta_bar_solar", &data.eta_bar_solar),
            ("q_bar_ac", &data.q_bar_ac),
        ] {
            if tr.len() != n_t {
                return Err(Error::DimensionMismatch(format!(
                    "{name} has {} samples, expected {n_t}",
                    tr.len()
                )));
            }
            ensure_finite(&tr.values, name)?;
        }
        if !(config.lambda >= 0.0 && config.r > 0.0 && config.alpha >= 0.0 && config.disturbance_scale > 0.0) {
            return Err(Error::InvalidParameter {
                name: "weights",
                reason: "need lambda >= 0, r > 0, alpha >= 0, disturbance_scale > 0".into(),
            });
        }
        let layout = Layout { n_t };
        let scale = config.disturbance_scale;
        let t0 = data.t_bar_z.values[0];
        let x0_star = config.x0_prior.unwrap_or([t0, t0, 0.0]);
        let n = layout.n_vars();
        let mut lower = vec![0.0; n];
        let mut upper = vec![f64::INFINITY; n];
        let sb = &config.state_bounds;
        for k in 0..n_t {
            lower[layout.t_z(k)] = sb.t_z.lower;
            upper[layout.t_z(k)] = sb.t_z.upper;
            lower[layout.t_w(k)] = sb.t_w.lower;
            upper[layout.t_w(k)] = sb.t_w.upper;
            lower[layout.q(k)] = sb.q_agg.lower / scale;
            upper[layout.q(k)] = sb.q_agg.upper / scale;
        }
        for (i, b) in config.theta_bounds.iter().enumerate() {
            lower[layout.theta(i)] = b.lower;
            upper[layout.theta(i)] = b.upper;
        }
        Ok(Self {
            layout,
            t_s: data.t_s(),
            t_z_meas: data.t_bar_z.values.clone(),
            t_a: data.t_bar_a.values.clone(),
            eta: data.eta_bar_solar.values.clone(),
            q_ac: data.q_bar_ac.values.clone(),
            x0_star,
            p_x0: config.x0_weight,
            theta_star: config.theta_prior.to_array(),
            p_theta: config.theta_weight,
            lambda: config.lambda,
            inv_r: 1.0 / config.r,
            alpha: config.alpha,
            scale,
            lower,
            upper,
            start_time: data.start_time(),
        })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn disturbance_scale(&self) -> f64 {
        self.scale
    }

    pub fn lower_bounds(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper_bounds(&self) -> &[f64] {
        &self.upper
    }

    /// Measured temperature, wall temperature rolled out from the wall
    /// equation driven by that measurement, zero load and zero increments.
    pub fn initial_point(&self, theta0: &[f64; N_THETA]) -> Vec<f64> {
        let l = self.layout;
        let mut z = vec![0.0; l.n_vars()];
        let mut th = *theta0;
        for (i, v) in th.iter_mut().enumerate() {
            *v = v.clamp(self.lower[l.theta(i)], self.upper[l.theta(i)]);
            z[l.theta(i)] = *v;
        }
        let mut t_w = self.x0_star[1];
        for k in 0..l.n_t {
            z[l.t_z(k)] = self.t_z_meas[k];
            z[l.t_w(k)] = t_w;
            z[l.q(k)] = 0.0;
            t_w += self.t_s
                * ((self.t_a[k] - t_w) / th[TAU_WA] + (self.t_z_meas[k] - t_w) / th[TAU_WZ] + th[A_W] * self.eta[k]);
        }
        z[l.t_z(0)] = self.x0_star[0];
        for (i, v) in z.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
        z
    }

    /// Packs physical quantities into a decision vector. `q` and `xi` in kW.
    pub fn pack(
        &self,
        theta: &AggregateParams,
        t_z: &[f64],
        t_w: &[f64],
        q: &[f64],
        xi_pos: &[f64],
        xi_neg: &[f64],
    ) -> Vec<f64> {
        let l = self.layout;
        let mut z = vec![0.0; l.n_vars()];
        for k in 0..l.n_t {
            z[l.t_z(k)] = t_z[k];
            z[l.t_w(k)] = t_w[k];
            z[l.q(k)] = q[k] / self.scale;
            if k + 1 < l.n_t {
                z[l.xi_pos(k)] = xi_pos[k] / self.scale;
                z[l.xi_neg(k)] = xi_neg[k] / self.scale;
            }
        }
        for (i, v) in theta.to_array().into_iter().enumerate() {
            z[l.theta(i)] = v;
        }
        z
    }

    fn theta_of<'a>(&self, z: &'a [f64]) -> &'a [f64] {
        &z[self.layout.n_states()..]
    }

    /// Zone and wall right-hand sides at step `k`.
    #[inline]
    fn rhs(&self, z: &[f64], k: usize) -> (f64, f64) {
        let l = self.layout;
        let th = self.theta_of(z);
        let (tz, tw, q) = (z[l.t_z(k)], z[l.t_w(k)], z[l.q(k)]);
        let (ta, eta) = (self.t_a[k], self.eta[k]);
        let fz = (ta - tz) / th[TAU_ZA]
            + (tw - tz) / th[TAU_ZW]
            + th[A_Z] * eta
            + (self.scale * q - self.q_ac[k]) / th[C_Z];
        let fw = (ta - tw) / th[TAU_WA] + (tz - tw) / th[TAU_WZ] + th[A_W] * eta;
        (fz, fw)
    }

    fn rows(&self, z: &[f64], k: usize) -> [Row; 3] {
        let l = self.layout;
        let th = self.theta_of(z);
        let ts = self.t_s;
        let (tz, tw, q) = (z[l.t_z(k)], z[l.t_w(k)], z[l.q(k)]);
        let (ta, eta) = (self.t_a[k], self.eta[k]);
        let (tza, tzw, twa, twz, cz) = (th[TAU_ZA], th[TAU_ZW], th[TAU_WA], th[TAU_WZ], th[C_Z]);

        let mut r0 = Row::new();
        r0.push(l.t_z(k), -1.0 + ts * (1.0 / tza + 1.0 / tzw));
        r0.push(l.t_w(k), -ts / tzw);
        r0.push(l.q(k), -ts * self.scale / cz);
        r0.push(l.t_z(k + 1), 1.0);
        r0.push(l.theta(TAU_ZA), ts * (ta - tz) / (tza * tza));
        r0.push(l.theta(TAU_ZW), ts * (tw - tz) / (tzw * tzw));
        r0.push(l.theta(C_Z), ts * (self.scale * q - self.q_ac[k]) / (cz * cz));
        r0.push(l.theta(A_Z), -ts * eta);

        let mut r1 = Row::new();
        r1.push(l.t_z(k), -ts / twz);
        r1.push(l.t_w(k), -1.0 + ts * (1.0 / twa + 1.0 / twz));
        r1.push(l.t_w(k + 1), 1.0);
        r1.push(l.theta(TAU_WA), ts * (ta - tw) / (twa * twa));
        r1.push(l.theta(TAU_WZ), ts * (tz - tw) / (twz * twz));
        r1.push(l.theta(A_W), -ts * eta);

        let mut r2 = Row::new();
        r2.push(l.q(k), -1.0);
        r2.push(l.xi_pos(k), -1.0);
        r2.push(l.xi_neg(k), 1.0);
        r2.push(l.q(k + 1), 1.0);
        [r0, r1, r2]
    }

    /// The five objective terms, in the order: initial-state prior, parameter
    /// prior, L1 increments, measurement residuals, load penalty.
    pub fn objective_terms(&self, z: &[f64]) -> [f64; 5] {
        let l = self.layout;
        let s = self.scale;
        let dx = [
            z[l.t_z(0)] - self.x0_star[0],
            z[l.t_w(0)] - self.x0_star[1],
            s * z[l.q(0)] - self.x0_star[2],
        ];
        let prior_x = quad(&self.p_x0, &dx);
        let th = self.theta_of(z);
        let mut dth = [0.0; N_THETA];
        for i in 0..N_THETA {
            dth[i] = th[i] - self.theta_star[i];
        }
        let prior_th = quad(&self.p_theta, &dth);
        let mut l1 = 0.0;
        let mut load = 0.0;
        for k in 0..l.n_t - 1 {
            l1 += z[l.xi_pos(k)] + z[l.xi_neg(k)];
            let q = s * z[l.q(k)];
            load += q * q;
        }
        let mut res = 0.0;
        for k in 0..l.n_t {
            let nu = self.t_z_meas[k] - z[l.t_z(k)];
            res += nu * nu;
        }
        [prior_x, prior_th, self.lambda * s * l1, self.inv_r * res, self.alpha * load]
    }

    /// Dynamics residuals `x[k+1] − x[k] − t_s(Ax + Bu) − Gξ`, three per step,
    /// the third in internal load units.
    pub fn dynamics_residuals(&self, z: &[f64], out: &mut [f64]) {
        let l = self.layout;
        for k in 0..l.n_t - 1 {
            let (fz, fw) = self.rhs(z, k);
            out[3 * k] = z[l.t_z(k + 1)] - z[l.t_z(k)] - self.t_s * fz;
            out[3 * k + 1] = z[l.t_w(k + 1)] - z[l.t_w(k)] - self.t_s * fw;
            out[3 * k + 2] = z[l.q(k + 1)] - z[l.q(k)] - (z[l.xi_pos(k)] - z[l.xi_neg(k)]);
        }
    }

    /// `out = J v`.
    pub fn jacobian_product(&self, z: &[f64], v: &[f64], out: &mut [f64]) {
        for k in 0..self.layout.n_t - 1 {
            for (c, row) in self.rows(z, k).iter().enumerate() {
                out[3 * k + c] = row.entries().map(|(i, a)| a * v[i]).sum();
            }
        }
    }

    /// Largest residual in physical units.
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        let mut c = vec![0.0; self.layout.n_constraints()];
        self.dynamics_residuals(z, &mut c);
        c.iter()
            .enumerate()
            .map(|(i, v)| if i % 3 == 2 { v.abs() * self.scale } else { v.abs() })
            .fold(0.0, f64::max)
    }

    /// Unpacks a solution into a result with solver diagnostics left empty.
    pub(crate) fn result(&self, z: &[f64]) -> EstimationResult {
        let l = self.layout;
        let n = l.n_t;
        let s = self.scale;
        let th = self.theta_of(z);
        let trace = |f: &dyn Fn(usize) -> f64| SignalTrace {
            start_time: self.start_time,
            t_s: self.t_s,
            values: (0..n).map(f).collect(),
        };
        EstimationResult {
            theta_hat: AggregateParams::from_array(th.try_into().expect("seven parameters")),
            t_bar_z_hat: trace(&|k| z[l.t_z(k)]),
            t_bar_w_hat: trace(&|k| z[l.t_w(k)]),
            q_agg_hat: trace(&|k| s * z[l.q(k)]),
            xi_hat: (0..n - 1).map(|k| s * (z[l.xi_pos(k)] - z[l.xi_neg(k)])).collect(),
            nu_hat: (0..n).map(|k| self.t_z_meas[k] - z[l.t_z(k)]).collect(),
            objective: self.objective(z),
            kkt_residual: f64::NAN,
            constraint_violation: self.max_violation(z),
            iterations: 0,
            outer_iterations: 0,
            converged: false,
            merit_history: Vec::new(),
        }
    }
}

fn quad<const M: usize>(p: &[[f64; M]; M], d: &[f64; M]) -> f64 {
    let mut acc = 0.0;
    for i in 0..M {
        for j in 0..M {
            acc += d[i] * p[i][j] * d[j];
        }
    }
    acc
}

impl NlpProblem for BatchProblem {
    fn n_vars(&self) -> usize {
        self.layout.n_vars()
    }

    fn n_constraints(&self) -> usize {
        self.layout.n_constraints()
    }

    fn lower(&self) -> &[f64] {
        &self.lower
    }

    fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn objective(&self, z: &[f64]) -> f64 {
        self.objective_terms(z).iter().sum()
    }

    fn gradient(&self, z: &[f64], g: &mut [f64]) {
        let l = self.layout;
        let s = self.scale;
        g.iter_mut().for_each(|v| *v = 0.0);
        let dx = [
            z[l.t_z(0)] - self.x0_star[0],
            z[l.t_w(0)] - self.x0_star[1],
            s * z[l.q(0)] - self.x0_star[2],
        ];
        let sx = [1.0, 1.0, s];
        let ix = [l.t_z(0), l.t_w(0), l.q(0)];
        for a in 0..3 {
            let mut acc = 0.0;
            for b in 0..3 {
                acc += (self.p_x0[a][b] + self.p_x0[b][a]) * dx[b];
            }
            g[ix[a]] += acc * sx[a];
        }
        let th = self.theta_of(z);
        for a in 0..N_THETA {
            let mut acc = 0.0;
            for b in 0..N_THETA {
                acc += (self.p_theta[a][b] + self.p_theta[b][a]) * (th[b] - self.theta_star[b]);
            }
            g[l.theta(a)] += acc;
        }
        for k in 0..l.n_t - 1 {
            g[l.xi_pos(k)] += self.lambda * s;
            g[l.xi_neg(k)] += self.lambda * s;
            g[l.q(k)] += 2.0 * self.alpha * s * s * z[l.q(k)];
        }
        for k in 0..l.n_t {
            g[l.t_z(k)] -= 2.0 * self.inv_r * (self.t_z_meas[k] - z[l.t_z(k)]);
        }
    }

    fn constraints(&self, z: &[f64], c: &mut [f64]) {
        self.dynamics_residuals(z, c);
    }

    fn add_jacobian_transpose(&self, z: &[f64], y: &[f64], out: &mut [f64]) {
        for k in 0..self.layout.n_t - 1 {
            for (c, row) in self.rows(z, k).iter().enumerate() {
                let yc = y[3 * k + c];
                if yc != 0.0 {
                    for (i, a) in row.entries() {
                        out[i] += a * yc;
                    }
                }
            }
        }
    }

    fn hessian_shape(&self) -> (usize, usize, usize) {
        (self.layout.n_states(), BANDWIDTH, N_THETA)
    }

    fn assemble_hessian(&self, z: &[f64], y: &[f64], rho: f64, h: &mut BorderedBanded) {
        let l = self.layout;
        let s = self.scale;
        let ts = self.t_s;
        h.clear();
        let sx = [1.0, 1.0, s];
        let ix = [l.t_z(0), l.t_w(0), l.q(0)];
        for a in 0..3 {
            for b in a..3 {
                h.add(ix[a], ix[b], (self.p_x0[a][b] + self.p_x0[b][a]) * sx[a] * sx[b]);
            }
        }
        for a in 0..N_THETA {
            for b in a..N_THETA {
                h.add(l.theta(a), l.theta(b), self.p_theta[a][b] + self.p_theta[b][a]);
            }
        }
        for k in 0..l.n_t {
            h.add(l.t_z(k), l.t_z(k), 2.0 * self.inv_r);
            if k + 1 < l.n_t {
                h.add(l.q(k), l.q(k), 2.0 * self.alpha * s * s);
            }
        }
        let th = self.theta_of(z);
        let (tza, tzw, twa, twz, cz) = (th[TAU_ZA], th[TAU_ZW], th[TAU_WA], th[TAU_WZ], th[C_Z]);
        for k in 0..l.n_t - 1 {
            let rows = self.rows(z, k);
            if rho != 0.0 {
                for row in &rows {
                    for p in 0..row.len {
                        for q in p..row.len {
                            h.add(row.idx[p], row.idx[q], rho * row.val[p] * row.val[q]);
                        }
                    }
                }
            }
            let (tz, tw, q) = (z[l.t_z(k)], z[l.t_w(k)], z[l.q(k)]);
            let ta = self.t_a[k];
            let y0 = y[3 * k];
            if y0 != 0.0 {
                h.add(l.theta(TAU_ZA), l.theta(TAU_ZA), -2.0 * ts * (ta - tz) / tza.powi(3) * y0);
                h.add(l.theta(TAU_ZA), l.t_z(k), -ts / (tza * tza) * y0);
                h.add(l.theta(TAU_ZW), l.theta(TAU_ZW), -2.0 * ts * (tw - tz) / tzw.powi(3) * y0);
                h.add(l.theta(TAU_ZW), l.t_w(k), ts / (tzw * tzw) * y0);
                h.add(l.theta(TAU_ZW), l.t_z(k), -ts / (tzw * tzw) * y0);
                h.add(l.theta(C_Z), l.theta(C_Z), -2.0 * ts * (s * q - self.q_ac[k]) / cz.powi(3) * y0);
                h.add(l.theta(C_Z), l.q(k), ts * s / (cz * cz) * y0);
            }
            let y1 = y[3 * k + 1];
            if y1 != 0.0 {
                h.add(l.theta(TAU_WA), l.theta(TAU_WA), -2.0 * ts * (ta - tw) / twa.powi(3) * y1);
                h.add(l.theta(TAU_WA), l.t_w(k), -ts / (twa * twa) * y1);
                h.add(l.theta(TAU_WZ), l.theta(TAU_WZ), -2.0 * ts * (tz - tw) / twz.powi(3) * y1);
                h.add(l.theta(TAU_WZ), l.t_z(k), ts / (twz * twz) * y1);
                h.add(l.theta(TAU_WZ), l.t_w(k), -ts / (twz * twz) * y1);
            }
        }
    }
}
