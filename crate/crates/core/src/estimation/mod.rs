//! Joint identification of the aggregate parameters and the aggregate heat load.
//!
//! The aggregate zone model is augmented with the unknown load as a random-walk
//! state, discretized by forward Euler, and fitted to a batch of data by a
//! full-transcription nonlinear program solved with an augmented Lagrangian.

mod linalg;
mod problem;
mod solver;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aggregation::{AggregateData, AggregateParams};
use crate::error::{ensure_finite, Error, Result};
use crate::trace::SignalTrace;

pub use linalg::{BorderedBanded, BorderedCholesky};
pub use problem::{BatchProblem, Layout, N_THETA};
pub use solver::{InnerSolver, MeritRecord, NlpProblem, SolverOptions};

/// Continuous-time augmented model `ẋ = A x + B u` with state
/// `(T̄_z, T̄_w, q̄_agg)` and input `(T̄_a, η̄, q̄_ac)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedModel {
    pub theta: AggregateParams,
    pub a: [[f64; 3]; 3],
    pub b: [[f64; 3]; 3],
    /// Output row: the measured aggregate zone temperature.
    pub f: [f64; 3],
    /// Process-noise input: only the load state is driven.
    pub g: [f64; 3],
}

impl AugmentedModel {
    pub fn derivative(&self, x: &[f64; 3], u: &[f64; 3]) -> [f64; 3] {
        let mut dx = [0.0; 3];
        for (i, d) in dx.iter_mut().enumerate() {
            for j in 0..3 {
                *d += self.a[i][j] * x[j] + self.b[i][j] * u[j];
            }
        }
        dx
    }

    pub fn output(&self, x: &[f64; 3]) -> f64 {
        self.f.iter().zip(x).map(|(f, x)| f * x).sum()
    }
}

/// Assembles `A(θ)`, `B(θ)`. The load state enters the zone equation scaled by
/// `1/C̄_z`, like the measured cooling input, so that `A x + B u` reproduces
/// `(q̄_agg − q̄_ac)/C̄_z`.
pub fn build_augmented_model(theta: &AggregateParams) -> Result<AugmentedModel> {
    theta.validate()?;
    for (name, v) in AggregateParams::NAMES.iter().zip(theta.to_array()) {
        if !(v > 0.0) {
            return Err(Error::InvalidParameter {
                name,
                reason: format!("must be strictly positive, got {v}"),
            });
        }
    }
    let t = theta;
    let a = [
        [-1.0 / t.tau_za - 1.0 / t.tau_zw, 1.0 / t.tau_zw, 1.0 / t.c_z],
        [1.0 / t.tau_wz, -1.0 / t.tau_wa - 1.0 / t.tau_wz, 0.0],
        [0.0, 0.0, 0.0],
    ];
    let b = [
        [1.0 / t.tau_za, t.a_z, -1.0 / t.c_z],
        [1.0 / t.tau_wa, t.a_w, 0.0],
        [0.0, 0.0, 0.0],
    ];
    Ok(AugmentedModel {
        theta: *t,
        a,
        b,
        f: [1.0, 0.0, 0.0],
        g: [0.0, 0.0, 1.0],
    })
}

/// Forward-Euler map `x⁺ = x + t_s (A x + B u) + G ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    pub model: AugmentedModel,
    pub t_s: f64,
}

impl DiscreteModel {
    pub fn step(&self, x: &[f64; 3], u: &[f64; 3], xi: f64) -> [f64; 3] {
        let dx = self.model.derivative(x, u);
        let mut next = [0.0; 3];
        for i in 0..3 {
            next[i] = x[i] + self.t_s * dx[i] + self.model.g[i] * xi;
        }
        next
    }

    /// Rolls out `inputs.len()` samples starting at `x0`; `xi[k]` acts between
    /// samples `k` and `k+1`.
    pub fn rollout(&self, x0: [f64; 3], inputs: &[[f64; 3]], xi: &[f64]) -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(inputs.len());
        let mut x = x0;
        for (k, u) in inputs.iter().enumerate() {
            out.push(x);
            if k + 1 < inputs.len() {
                x = self.step(&x, u, xi.get(k).copied().unwrap_or(0.0));
            }
        }
        out
    }
}

pub fn discretize(model: &AugmentedModel, t_s: f64) -> Result<DiscreteModel> {
    if !(t_s.is_finite() && t_s > 0.0) {
        return Err(Error::InvalidParameter {
            name: "t_s",
            reason: format!("must be positive, got {t_s}"),
        });
    }
    Ok(DiscreteModel {
        model: model.clone(),
        t_s,
    })
}

/// Box on a scalar decision variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub const FREE: Bounds = Bounds {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };

    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    fn check(&self, what: &'static str) -> Result<()> {
        if self.lower.is_nan() || self.upper.is_nan() || self.lower > self.upper {
            return Err(Error::InvalidParameter {
                name: what,
                reason: format!("empty box [{}, {}]", self.lower, self.upper),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateBounds {
    pub t_z: Bounds,
    pub t_w: Bounds,
    /// Physical units (kW).
    pub q_agg: Bounds,
}

impl Default for StateBounds {
    fn default() -> Self {
        Self {
            t_z: Bounds::FREE,
            t_w: Bounds::FREE,
            q_agg: Bounds::new(0.0, f64::INFINITY),
        }
    }
}

/// Seeded random restarts around the parameter prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiStart {
    /// Total number of starts including the prior itself.
    pub starts: usize,
    pub seed: u64,
    /// Starts are drawn as `θ* · exp(U(−spread, spread))` per component.
    pub spread: f64,
}

/// Weights, priors, boxes and solver settings of the batch problem.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentConfig {
    /// Initial-state prior; `None` uses `(T̄_z[0], T̄_z[0], 0)`.
    pub x0_prior: Option<[f64; 3]>,
    /// Inverse covariance of the initial-state prior.
    pub x0_weight: [[f64; 3]; 3],
    pub theta_prior: AggregateParams,
    /// Inverse covariance of the parameter prior, in [`AggregateParams::NAMES`] order.
    pub theta_weight: [[f64; N_THETA]; N_THETA],
    /// L1 weight on the load increments.
    pub lambda: f64,
    /// Measurement noise variance; residuals are weighted by `1/r`.
    pub r: f64,
    /// Quadratic penalty on the load.
    pub alpha: f64,
    pub state_bounds: StateBounds,
    pub theta_bounds: [Bounds; N_THETA],
    /// Internal unit of the load state, kW.
    pub disturbance_scale: f64,
    pub solver: SolverOptions,
    pub multistart: Option<MultiStart>,
}

impl IdentConfig {
    pub fn new(theta_prior: AggregateParams) -> Self {
        let mut x0_weight = [[0.0; 3]; 3];
        x0_weight[0][0] = 1.0;
        x0_weight[1][1] = 0.01;
        x0_weight[2][2] = 0.01;
        let mut theta_weight = [[0.0; N_THETA]; N_THETA];
        for (i, row) in theta_weight.iter_mut().enumerate() {
            row[i] = 0.1;
        }
        Self {
            x0_prior: None,
            x0_weight,
            theta_prior,
            theta_weight,
            lambda: 10.0,
            r: 0.01,
            alpha: 1e-3,
            state_bounds: StateBounds::default(),
            theta_bounds: [Bounds::new(1e-3, 1e3); N_THETA],
            disturbance_scale: 1.0,
            solver: SolverOptions::default(),
            multistart: None,
        }
    }

    /// Replaces the parameter prior weight with `weight / θ*_i²`, a penalty
    /// on relative deviation from the prior, and boxes each parameter to
    /// `[θ*_i / box_factor, θ*_i · box_factor]`.
    pub fn with_relative_prior(mut self, weight: f64, box_factor: f64) -> Result<Self> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::InvalidParameter {
                name: "theta_weight",
                reason: format!("relative weight must be positive, got {weight}"),
            });
        }
        if !(box_factor.is_finite() && box_factor > 1.0) {
            return Err(Error::InvalidParameter {
                name: "theta_bounds",
                reason: format!("box factor must exceed 1, got {box_factor}"),
            });
        }
        let prior = self.theta_prior.to_array();
        self.theta_weight = [[0.0; N_THETA]; N_THETA];
        for (i, p) in prior.iter().enumerate() {
            self.theta_weight[i][i] = weight / (p * p);
            self.theta_bounds[i] = Bounds::new(p / box_factor, p * box_factor);
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda", self.lambda), ("r", self.r), ("alpha", self.alpha)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and strictly positive, got {v}"),
                });
            }
        }
        if !(self.disturbance_scale.is_finite() && self.disturbance_scale > 0.0) {
            return Err(Error::InvalidParameter {
                name: "disturbance_scale",
                reason: format!("must be strictly positive, got {}", self.disturbance_scale),
            });
        }
        if let Some(x0) = &self.x0_prior {
            ensure_finite(x0, "x0_prior")?;
        }
        ensure_finite(&self.theta_prior.to_array(), "theta_prior")?;
        check_spd(&self.x0_weight, "x0_weight")?;
        check_spd(&self.theta_weight, "theta_weight")?;
        self.state_bounds.t_z.check("bounds.t_z")?;
        self.state_bounds.t_w.check("bounds.t_w")?;
        self.state_bounds.q_agg.check("bounds.q_agg")?;
        for b in &self.theta_bounds {
            b.check("bounds.theta")?;
        }
        self.solver.validate()?;
        if let Some(ms) = &self.multistart {
            if ms.starts == 0 || !(ms.spread.is_finite() && ms.spread >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "multistart",
                    reason: "need at least one start and a non-negative spread".into(),
                });
            }
        }
        Ok(())
    }
}

fn check_spd<const M: usize>(w: &[[f64; M]; M], name: &'static str) -> Result<()> {
    let mut flat = Vec::with_capacity(M * M);
    for (i, row) in w.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if !v.is_finite() || (*v - w[j][i]).abs() > 1e-12 * v.abs().max(1.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and symmetric, entry ({i}, {j}) = {v}"),
                });
            }
            flat.push(*v);
        }
    }
    linalg::dense_cholesky(&mut flat, M).map_err(|_| Error::InvalidParameter {
        name,
        reason: "must be positive definite".into(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub theta_hat: AggregateParams,
    pub t_bar_z_hat: SignalTrace,
    pub t_bar_w_hat: SignalTrace,
    pub q_agg_hat: SignalTrace,
    /// Load increments, `N_t − 1` samples, kW.
    pub xi_hat: Vec<f64>,
    /// Measured minus estimated zone temperature.
    pub nu_hat: Vec<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    /// Largest dynamics residual, state units.
    pub constraint_violation: f64,
    /// Total inner iterations.
    pub iterations: usize,
    pub outer_iterations: usize,
    pub converged: bool,
    /// Merit before and after each outer iteration's inner solve.
    pub merit_history: Vec<MeritRecord>,
}

/// Minimum number of samples accepted by [`solve_batch`].
pub const MIN_SAMPLES: usize = 3;

pub fn solve_batch(data: &AggregateData, config: &IdentConfig) -> Result<EstimationResult> {
    config.validate()?;
    data.validate()?;
    if data.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_SAMPLES,
            got: data.len(),
        });
    }
    let problem = BatchProblem::new(data, config)?;
    let mut starts = vec![config.theta_prior.to_array()];
    if let Some(ms) = &config.multistart {
        let mut rng = ChaCha8Rng::seed_from_u64(ms.seed);
        for _ in 1..ms.starts {
            let mut th = config.theta_prior.to_array();
            for v in th.iter_mut() {
                *v *= (ms.spread * rng.gen_range(-1.0..=1.0)).exp();
            }
            starts.push(th);
        }
    }
    let mut best: Option<solver::AlOutcome> = None;
    let mut total_inner = 0;
    for theta0 in &starts {
        let z0 = problem.initial_point(theta0);
        let out = solver::solve(&problem, z0, &config.solver);
        total_inner += out.inner_iterations;
        let better = match &best {
            None => true,
            Some(b) => rank(&out, &config.solver) < rank(b, &config.solver),
        };
        if better {
            best = Some(out);
        }
    }
    let out = best.expect("at least one start");
    let mut res = problem.result(&out.z);
    res.kkt_residual = out.kkt;
    res.iterations = total_inner;
    res.outer_iterations = out.outer_iterations;
    res.converged = out.converged;
    res.merit_history = out.merit_history;
    Ok(res)
}

/// Ordering key for picking among starts: converged first, then objective.
fn rank(o: &solver::AlOutcome, opts: &SolverOptions) -> (u8, f64) {
    let feasible = o.violation <= opts.constraint_tol;
    (if o.converged { 0 } else if feasible { 1 } else { 2 }, o.objective)
}

/// Exogenous inputs and load trace for an open-loop prediction.
#[derive(Debug, Clone, Copy)]
pub struct PredictionInputs<'a> {
    pub t_s: f64,
    pub t_a: &'a [f64],
    pub eta_solar: &'a [f64],
    pub q_ac: &'a [f64],
    /// Load fed into the model in place of the estimated state.
    pub disturbance: &'a [f64],
    /// Measured aggregate zone temperature, for the error.
    pub measured_t_z: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub t_bar_z: Vec<f64>,
    pub t_bar_w: Vec<f64>,
    /// `None` for an empty horizon.
    pub rmse: Option<f64>,
}

/// Simulates the aggregate model with the load channel replaced by a given trace.
pub fn predict_out_of_sample(
    theta: &AggregateParams,
    inputs: &PredictionInputs<'_>,
    x0: [f64; 2],
) -> Result<Prediction> {
    let n = inputs.t_a.len();
    for (name, len) in [
        ("eta_solar", inputs.eta_solar.len()),
        ("q_ac", inputs.q_ac.len()),
        ("disturbance", inputs.disturbance.len()),
        ("measured_t_z", inputs.measured_t_z.len()),
    ] {
        if len != n {
            return Err(Error::DimensionMismatch(format!(
                "prediction input `{name}` has {len} samples, T_a has {n}"
            )));
        }
    }
    let model = discretize(&build_augmented_model(theta)?, inputs.t_s)?;
    ensure_finite(&x0, "prediction initial state")?;
    let mut t_z = Vec::with_capacity(n);
    let mut t_w = Vec::with_capacity(n);
    let mut x = [x0[0], x0[1], 0.0];
    for k in 0..n {
        x[2] = inputs.disturbance[k];
        t_z.push(x[0]);
        t_w.push(x[1]);
        if k + 1 < n {
            x = model.step(&x, &[inputs.t_a[k], inputs.eta_solar[k], inputs.q_ac[k]], 0.0);
        }
    }
    let rmse = (n > 0).then(|| {
        let ss: f64 = t_z
            .iter()
            .zip(inputs.measured_t_z)
            .map(|(p, m)| (p - m) * (p - m))
            .sum();
        (ss / n as f64).sqrt()
    });
    Ok(Prediction {
        t_bar_z: t_z,
        t_bar_w: t_w,
        rmse,
    })
}

/// [`predict_out_of_sample`] driven by an aggregate data set.
pub fn predict_from_data(
    theta: &AggregateParams,
    data: &AggregateData,
    disturbance: &[f64],
    x0: [f64; 2],
) -> Result<Prediction> {
    predict_out_of_sample(
        theta,
        &PredictionInputs {
            t_s: data.t_s(),
            t_a: &data.t_bar_a.values,
            eta_solar: &data.eta_bar_solar.values,
            q_ac: &data.q_bar_ac.values,
            disturbance,
            measured_t_z: &data.t_bar_z.values,
        },
        x0,
    )
}
