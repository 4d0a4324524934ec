//! Two-resistance/two-capacitance zone dynamics, multi-zone composition and
//! fixed-step simulation.
//!
//! Units throughout: hours, °C, kW, kWh. Resistances are °C·h/kWh (equivalently
//! °C/kW), capacitances kWh/°C, solar apertures m² against irradiance in kW/m².

use chrono::NaiveDateTime;

use crate::error::{ensure_finite, Error, Result};
use crate::trace::{SignalTrace, ZoneTrace, ZoneTraceSet};

/// Lumped RC parameters of a single zone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneParams {
    /// Zone air to ambient.
    pub r_za: f64,
    /// Zone air capacitance.
    pub c_z: f64,
    /// Zone air to wall.
    pub r_zw: f64,
    /// Wall capacitance.
    pub c_w: f64,
    /// Wall to ambient.
    pub r_wa: f64,
    /// Effective solar aperture onto the zone air.
    pub a_z: f64,
    /// Effective solar aperture onto the wall.
    pub a_w: f64,
}

impl ZoneParams {
    pub fn new(r_za: f64, c_z: f64, r_zw: f64, c_w: f64, r_wa: f64, a_z: f64, a_w: f64) -> Result<Self> {
        let p = Self {
            r_za,
            c_z,
            r_zw,
            c_w,
            r_wa,
            a_z,
            a_w,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("r_za", self.r_za),
            ("c_z", self.c_z),
            ("r_zw", self.r_zw),
            ("c_w", self.c_w),
            ("r_wa", self.r_wa),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and strictly positive, got {v}"),
                });
            }
        }
        for (name, v) in [("a_z", self.a_z), ("a_w", self.a_w)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and non-negative, got {v}"),
                });
            }
        }
        Ok(())
    }

    pub fn tau_za(&self) -> f64 {
        self.r_za * self.c_z
    }

    pub fn tau_zw(&self) -> f64 {
        self.r_zw * self.c_z
    }

    pub fn tau_wa(&self) -> f64 {
        self.r_wa * self.c_w
    }

    pub fn tau_wz(&self) -> f64 {
        self.r_zw * self.c_w
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneState {
    pub t_z: f64,
    /// Fictitious lumped wall temperature.
    pub t_w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneInputs {
    pub t_a: f64,
    pub eta_solar: f64,
    pub q_ac: f64,
    pub q_int: f64,
}

impl ZoneInputs {
    pub fn new(t_a: f64, eta_solar: f64, q_ac: f64, q_int: f64) -> Result<Self> {
        let u = Self {
            t_a,
            eta_solar,
            q_ac,
            q_int,
        };
        ensure_finite(&[t_a, eta_solar, q_ac, q_int], "zone inputs")?;
        for (name, v) in [("eta_solar", eta_solar), ("q_ac", q_ac), ("q_int", q_int)] {
            if v < 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be non-negative, got {v}"),
                });
            }
        }
        Ok(u)
    }
}

/// Time derivatives of one zone's states, °C/h.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative {
    pub d_t_z: f64,
    pub d_t_w: f64,
}

/// Symmetric zone-to-zone resistances. `None` marks an absent coupling
/// (infinite resistance).
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    n: usize,
    entries: Vec<Option<f64>>,
}

impl InteractionMatrix {
    /// `rows[i][j]` is the resistance between zones `i` and `j`; the diagonal is ignored.
    pub fn new(rows: Vec<Vec<Option<f64>>>) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "interaction matrix row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, r) in row.iter().enumerate() {
                if i == j {
                    entries.push(None);
                    continue;
                }
                if let Some(r) = r {
                    if !(r.is_finite() && *r > 0.0) {
                        return Err(Error::InvalidParameter {
                            name: "interaction_resistance",
                            reason: format!("entry ({i}, {j}) must be strictly positive, got {r}"),
                        });
                    }
                }
                if rows[j][i] != *r {
                    return Err(Error::AsymmetricInteraction { i, j });
                }
                entries.push(*r);
            }
        }
        Ok(Self { n, entries })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.entries[i * self.n + j]
    }

    /// Conductance `1/R` between zones, zero when absent.
    pub fn conductance(&self, i: usize, j: usize) -> f64 {
        self.get(i, j).map_or(0.0, |r| 1.0 / r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildingModel {
    zones: Vec<ZoneParams>,
    interaction: Option<InteractionMatrix>,
}

impl BuildingModel {
    pub fn new(zones: Vec<ZoneParams>, interaction: Option<InteractionMatrix>) -> Result<Self> {
        if zones.is_empty() {
            return Err(Error::EmptyZoneSet);
        }
        for z in &zones {
            z.validate()?;
        }
        if let Some(m) = &interaction {
            if m.len() != zones.len() {
                return Err(Error::DimensionMismatch(format!(
                    "interaction matrix is {0}x{0} but the building has {1} zones",
                    m.len(),
                    zones.len()
                )));
            }
        }
        Ok(Self { zones, interaction })
    }

    pub fn independent(zones: Vec<ZoneParams>) -> Result<Self> {
        Self::new(zones, None)
    }

    pub fn zones(&self) -> &[ZoneParams] {
        &self.zones
    }

    pub fn n_zones(&self) -> usize {
        self.zones.len()
    }

    pub fn interaction(&self) -> Option<&InteractionMatrix> {
        self.interaction.as_ref()
    }
}

/// Right-hand side of the single-zone 2R2C equations.
pub fn zone_derivative(state: &ZoneState, inputs: &ZoneInputs, params: &ZoneParams) -> Result<Derivative> {
    ensure_finite(
        &[
            state.t_z,
            state.t_w,
            inputs.t_a,
            inputs.eta_solar,
            inputs.q_ac,
            inputs.q_int,
        ],
        "zone state/inputs",
    )?;
    Ok(zone_rhs(state, inputs, params))
}

#[inline]
fn zone_rhs(s: &ZoneState, u: &ZoneInputs, p: &ZoneParams) -> Derivative {
    let d_t_z = (u.t_a - s.t_z) / (p.r_za * p.c_z)
        + (u.q_int - u.q_ac) / p.c_z
        + (s.t_w - s.t_z) / (p.r_zw * p.c_z)
        + p.a_z / p.c_z * u.eta_solar;
    let d_t_w = (s.t_z - s.t_w) / (p.r_zw * p.c_w)
        + (u.t_a - s.t_w) / (p.r_wa * p.c_w)
        + p.a_w / p.c_w * u.eta_solar;
    Derivative { d_t_z, d_t_w }
}

/// Interaction heat flow into zone `j` divided by its capacitance, °C/h.
pub fn interaction_term(states: &[ZoneState], model: &BuildingModel, j: usize) -> f64 {
    let Some(m) = model.interaction() else {
        return 0.0;
    };
    let c_j = model.zones[j].c_z;
    let mut acc = 0.0;
    for (i, s) in states.iter().enumerate() {
        if i != j {
            acc += (s.t_z - states[j].t_z) * m.conductance(i, j) / c_j;
        }
    }
    acc
}

pub fn building_derivative(
    states: &[ZoneState],
    inputs: &[ZoneInputs],
    model: &BuildingModel,
) -> Result<Vec<Derivative>> {
    let n = model.n_zones();
    if states.len() != n || inputs.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "building has {n} zones, got {} states and {} inputs",
            states.len(),
            inputs.len()
        )));
    }
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let mut d = zone_derivative(&states[j], &inputs[j], &model.zones[j])?;
        d.d_t_z += interaction_term(states, model, j);
        out.push(d);
    }
    Ok(out)
}

/// One explicit Euler step `x + t_s·f(x, u)`.
pub fn step_forward_euler(
    states: &[ZoneState],
    inputs: &[ZoneInputs],
    model: &BuildingModel,
    t_s: f64,
) -> Result<Vec<ZoneState>> {
    if !(t_s.is_finite() && t_s > 0.0) {
        return Err(Error::InvalidParameter {
            name: "t_s",
            reason: format!("must be positive, got {t_s}"),
        });
    }
    let derivs = building_derivative(states, inputs, model)?;
    Ok(states
        .iter()
        .zip(&derivs)
        .map(|(s, d)| ZoneState {
            t_z: s.t_z + t_s * d.d_t_z,
            t_w: s.t_w + t_s * d.d_t_w,
        })
        .collect())
}

/// Exogenous input traces of one zone.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneInputTraces {
    pub t_a: SignalTrace,
    pub eta_solar: SignalTrace,
    pub q_ac: SignalTrace,
    pub q_int: SignalTrace,
}

impl ZoneInputTraces {
    fn traces(&self) -> [&SignalTrace; 4] {
        [&self.t_a, &self.eta_solar, &self.q_ac, &self.q_int]
    }
}

/// Open-loop simulation of `n_t` samples. Sample `k` of the output holds the
/// state at `k` and the inputs applied during `[k, k+1)`.
pub fn simulate(
    model: &BuildingModel,
    inputs: &[ZoneInputTraces],
    initial: &[ZoneState],
    t_s: f64,
    n_t: usize,
) -> Result<ZoneTraceSet> {
    if inputs.len() != model.n_zones() {
        return Err(Error::DimensionMismatch(format!(
            "{} input sets for {} zones",
            inputs.len(),
            model.n_zones()
        )));
    }
    let start = inputs[0].t_a.start_time;
    for (j, zone) in inputs.iter().enumerate() {
        for tr in zone.traces() {
            if (tr.t_s - t_s).abs() > 1e-12 {
                return Err(Error::SamplingMismatch(format!(
                    "zone {j} trace sampled every {} h, simulation uses {t_s} h",
                    tr.t_s
                )));
            }
            if tr.start_time != start {
                return Err(Error::SamplingMismatch(format!("zone {j} trace starts at a different time")));
            }
            if tr.len() < n_t {
                return Err(Error::TooFewSamples {
                    needed: n_t,
                    got: tr.len(),
                });
            }
        }
    }
    simulate_with(model, initial, start, t_s, n_t, |k, _| {
        inputs
            .iter()
            .map(|z| {
                ZoneInputs::new(
                    z.t_a.values[k],
                    z.eta_solar.values[k],
                    z.q_ac.values[k],
                    z.q_int.values[k],
                )
            })
            .collect()
    })
}

/// Simulation driven by an input callback `(k, states at k) -> inputs at k`,
/// which allows closed-loop control.
pub fn simulate_with<F>(
    model: &BuildingModel,
    initial: &[ZoneState],
    start_time: NaiveDateTime,
    t_s: f64,
    n_t: usize,
    mut input_at: F,
) -> Result<ZoneTraceSet>
where
    F: FnMut(usize, &[ZoneState]) -> Result<Vec<ZoneInputs>>,
{
    let n_z = model.n_zones();
    if initial.len() != n_z {
        return Err(Error::DimensionMismatch(format!(
            "{} initial states for {n_z} zones",
            initial.len()
        )));
    }
    if n_t == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let mut zones: Vec<ZoneTrace> = (0..n_z)
        .map(|j| ZoneTrace {
            id: format!("zone{}", j + 1),
            t_z: Vec::with_capacity(n_t),
            t_w: Some(Vec::with_capacity(n_t)),
            t_a: Vec::with_capacity(n_t),
            eta_solar: Vec::with_capacity(n_t),
            q_ac: Vec::with_capacity(n_t),
            q_int: Some(Vec::with_capacity(n_t)),
        })
        .collect();
    let mut states = initial.to_vec();
    for k in 0..n_t {
        let u = input_at(k, &states)?;
        if u.len() != n_z {
            return Err(Error::DimensionMismatch(format!("{} inputs for {n_z} zones", u.len())));
        }
        for (j, zone) in zones.iter_mut().enumerate() {
            zone.t_z.push(states[j].t_z);
            if let Some(t_w) = zone.t_w.as_mut() {
                t_w.push(states[j].t_w);
            }
            zone.t_a.push(u[j].t_a);
            zone.eta_solar.push(u[j].eta_solar);
            zone.q_ac.push(u[j].q_ac);
            if let Some(q) = zone.q_int.as_mut() {
                q.push(u[j].q_int);
            }
        }
        if k + 1 < n_t {
            states = step_forward_euler(&states, &u, model, t_s)?;
        }
    }
    ZoneTraceSet::new(start_time, t_s, zones)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ZoneParams {
        ZoneParams::new(1.1, 0.5, 0.8, 3.4, 5.6, 0.4, 15.0).unwrap()
    }

    #[test]
    fn equilibrium_is_zero() {
        let s = ZoneState { t_z: 24.0, t_w: 24.0 };
        let u = ZoneInputs::new(24.0, 0.0, 0.0, 0.0).unwrap();
        let d = zone_derivative(&s, &u, &params()).unwrap();
        assert_eq!(d, Derivative { d_t_z: 0.0, d_t_w: 0.0 });
    }

    #[test]
    fn cooling_only_term() {
        let s = ZoneState { t_z: 24.0, t_w: 24.0 };
        let u = ZoneInputs::new(24.0, 0.0, 1.0, 0.0).unwrap();
        let d = zone_derivative(&s, &u, &params()).unwrap();
        assert_eq!(d.d_t_z, -2.0);
        assert_eq!(d.d_t_w, 0.0);
    }

    #[test]
    fn non_finite_rejected() {
        let s = ZoneState {
            t_z: f64::NAN,
            t_w: 24.0,
        };
        let u = ZoneInputs {
            t_a: 20.0,
            eta_solar: 0.0,
            q_ac: 0.0,
            q_int: 0.0,
        };
        assert!(matches!(zone_derivative(&s, &u, &params()), Err(Error::NonFinite(_))));
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(ZoneParams::new(0.0, 0.5, 0.8, 3.4, 5.6, 0.4, 15.0).is_err());
        assert!(ZoneParams::new(1.0, 0.5, 0.8, 3.4, 5.6, -0.1, 15.0).is_err());
    }

    #[test]
    fn asymmetric_interaction_rejected() {
        let rows = vec![vec![None, Some(2.0)], vec![Some(3.0), None]];
        assert!(matches!(
            InteractionMatrix::new(rows),
            Err(Error::AsymmetricInteraction { .. })
        ));
    }

    #[test]
    fn euler_step_by_definition() {
        let model = BuildingModel::independent(vec![params()]).unwrap();
        let s = [ZoneState { t_z: 24.0, t_w: 24.0 }];
        let u = [ZoneInputs::new(24.0, 0.0, 1.0, 0.0).unwrap()];
        let next = step_forward_euler(&s, &u, &model, 0.25).unwrap();
        assert!((next[0].t_z - 23.5).abs() < 1e-15);
        assert_eq!(next[0].t_w, 24.0);
    }

    #[test]
    fn zero_step_rejected() {
        let model = BuildingModel::independent(vec![params()]).unwrap();
        let s = [ZoneState { t_z: 24.0, t_w: 24.0 }];
        let u = [ZoneInputs::new(24.0, 0.0, 1.0, 0.0).unwrap()];
        assert!(step_forward_euler(&s, &u, &model, 0.0).is_err());
    }
}
