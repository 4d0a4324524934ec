//! Zone-averaged signals, the time-invariant single-zone equivalent of a
//! multi-zone building, and the aggregation-error terms that make the averaged
//! dynamics exact.
//!
//! Every sum over zones runs in zone-index order so results are bit-reproducible.

use chrono::NaiveDateTime;

use crate::error::{Error, Result};
use crate::thermal::BuildingModel;
use crate::trace::{SignalKind, SignalTrace, ZoneTraceSet};

/// Threshold under which a time-varying parameter's numerator or denominator
/// counts as zero.
pub const UNDEFINED_EPS: f64 = 1e-9;

/// Zone-averaged signals.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateData {
    pub t_bar_z: SignalTrace,
    pub t_bar_a: SignalTrace,
    pub eta_bar_solar: SignalTrace,
    pub q_bar_ac: SignalTrace,
    /// Known only in simulation or instrumented buildings.
    pub q_bar_int: Option<SignalTrace>,
    /// Known only in simulation.
    pub t_bar_w: Option<SignalTrace>,
}

impl AggregateData {
    pub fn len(&self) -> usize {
        self.t_bar_z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_bar_z.is_empty()
    }

    pub fn t_s(&self) -> f64 {
        self.t_bar_z.t_s
    }

    pub fn start_time(&self) -> NaiveDateTime {
        self.t_bar_z.start_time
    }

    pub fn validate(&self) -> Result<()> {
        let grid = &self.t_bar_z;
        let mut all = vec![&self.t_bar_a, &self.eta_bar_solar, &self.q_bar_ac];
        all.extend(self.q_bar_int.iter());
        all.extend(self.t_bar_w.iter());
        for tr in all {
            if !grid.same_grid(tr) {
                return Err(Error::SamplingMismatch(
                    "aggregate traces do not share one sampling grid".into(),
                ));
            }
        }
        Ok(())
    }

    /// Samples `[from, to)`.
    pub fn window(&self, from: usize, to: usize) -> AggregateData {
        AggregateData {
            t_bar_z: self.t_bar_z.window(from, to),
            t_bar_a: self.t_bar_a.window(from, to),
            eta_bar_solar: self.eta_bar_solar.window(from, to),
            q_bar_ac: self.q_bar_ac.window(from, to),
            q_bar_int: self.q_bar_int.as_ref().map(|t| t.window(from, to)),
            t_bar_w: self.t_bar_w.as_ref().map(|t| t.window(from, to)),
        }
    }
}

/// The seven identifiable parameters of the aggregate model, in the order used
/// for the parameter vector: `[tau_za, tau_zw, tau_wa, tau_wz, c_z, a_z, a_w]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateParams {
    /// h
    pub tau_za: f64,
    /// h
    pub tau_zw: f64,
    /// h
    pub tau_wa: f64,
    /// h
    pub tau_wz: f64,
    /// kWh/°C
    pub c_z: f64,
    /// °C·m²/kWh
    pub a_z: f64,
    /// °C·m²/kWh
    pub a_w: f64,
}

impl AggregateParams {
    pub const NAMES: [&'static str; 7] = ["tau_za", "tau_zw", "tau_wa", "tau_wz", "c_z", "a_z", "a_w"];
    pub const UNITS: [&'static str; 7] = [
        "hour(s)",
        "hour(s)",
        "hour(s)",
        "hour(s)",
        "kWh/°C",
        "°C m^2/kWh",
        "°C m^2/kWh",
    ];

    pub fn to_array(&self) -> [f64; 7] {
        [
            self.tau_za,
            self.tau_zw,
            self.tau_wa,
            self.tau_wz,
            self.c_z,
            self.a_z,
            self.a_w,
        ]
    }

    pub fn from_array(v: [f64; 7]) -> Self {
        Self {
            tau_za: v[0],
            tau_zw: v[1],
            tau_wa: v[2],
            tau_wz: v[3],
            c_z: v[4],
            a_z: v[5],
            a_w: v[6],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in Self::NAMES.iter().zip(self.to_array()) {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("aggregate parameter must be strictly positive, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// Per-zone deviations from the zone average, zone-major (`kind[j][k]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Deviations {
    pub t_z: Vec<Vec<f64>>,
    pub t_w: Option<Vec<Vec<f64>>>,
    pub t_a: Vec<Vec<f64>>,
    pub eta_solar: Vec<Vec<f64>>,
    pub q_ac: Vec<Vec<f64>>,
    pub q_int: Option<Vec<Vec<f64>>>,
}

impl Deviations {
    pub fn kind(&self, kind: SignalKind) -> Option<&[Vec<f64>]> {
        match kind {
            SignalKind::Tz => Some(&self.t_z),
            SignalKind::Tw => self.t_w.as_deref(),
            SignalKind::Ta => Some(&self.t_a),
            SignalKind::EtaSolar => Some(&self.eta_solar),
            SignalKind::Qac => Some(&self.q_ac),
            SignalKind::Qint => self.q_int.as_deref(),
        }
    }
}

/// Time-varying additive terms of the aggregate model and the resulting
/// aggregate internal heat load.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregationErrors {
    /// °C/h; includes the inter-zone interaction correction when it applies.
    pub w_tilde_z: SignalTrace,
    /// °C/h
    pub w_tilde_w: SignalTrace,
    /// kW
    pub q_bar_agg: SignalTrace,
}

impl AggregationErrors {
    /// All-zero errors (so `q_bar_agg == q_bar_int`), for counterfactual checks.
    pub fn zeros(q_bar_int: &SignalTrace) -> Self {
        let zero = SignalTrace {
            values: vec![0.0; q_bar_int.len()],
            ..q_bar_int.clone()
        };
        Self {
            w_tilde_z: zero.clone(),
            w_tilde_w: zero,
            q_bar_agg: q_bar_int.clone(),
        }
    }
}

fn mean_over_zones(signals: &[&[f64]]) -> Vec<f64> {
    let n_z = signals.len() as f64;
    let n = signals[0].len();
    (0..n)
        .map(|k| {
            let mut acc = 0.0;
            for s in signals {
                acc += s[k];
            }
            acc / n_z
        })
        .collect()
}

fn deviation(signals: &[&[f64]], mean: &[f64]) -> Vec<Vec<f64>> {
    signals
        .iter()
        .map(|s| s.iter().zip(mean).map(|(x, m)| x - m).collect())
        .collect()
}

/// Per-sample arithmetic means over zones.
pub fn average_signals(zones: &ZoneTraceSet) -> Result<AggregateData> {
    zones.validate()?;
    let trace = |kind| -> Option<SignalTrace> {
        zones.signals(kind).map(|s| SignalTrace {
            start_time: zones.start_time,
            t_s: zones.t_s,
            values: mean_over_zones(&s),
        })
    };
    let required = |kind: SignalKind| trace(kind).ok_or(Error::MissingSignal(kind.name()));
    Ok(AggregateData {
        t_bar_z: required(SignalKind::Tz)?,
        t_bar_a: required(SignalKind::Ta)?,
        eta_bar_solar: required(SignalKind::EtaSolar)?,
        q_bar_ac: required(SignalKind::Qac)?,
        q_bar_int: trace(SignalKind::Qint),
        t_bar_w: trace(SignalKind::Tw),
    })
}

/// `individual - average` for every zone and signal kind.
pub fn deviation_signals(zones: &ZoneTraceSet, data: &AggregateData) -> Result<Deviations> {
    if zones.len() != data.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} zone samples vs {} aggregate samples",
            zones.len(),
            data.len()
        )));
    }
    let dev = |kind: SignalKind, mean: &SignalTrace| -> Result<Vec<Vec<f64>>> {
        let signals = zones.signals(kind).ok_or(Error::MissingSignal(kind.name()))?;
        Ok(deviation(&signals, &mean.values))
    };
    let opt = |kind: SignalKind, mean: Option<&SignalTrace>| -> Result<Option<Vec<Vec<f64>>>> {
        match (zones.signals(kind), mean) {
            (Some(signals), Some(mean)) => Ok(Some(deviation(&signals, &mean.values))),
            _ => Ok(None),
        }
    };
    Ok(Deviations {
        t_z: dev(SignalKind::Tz, &data.t_bar_z)?,
        t_w: opt(SignalKind::Tw, data.t_bar_w.as_ref())?,
        t_a: dev(SignalKind::Ta, &data.t_bar_a)?,
        eta_solar: dev(SignalKind::EtaSolar, &data.eta_bar_solar)?,
        q_ac: dev(SignalKind::Qac, &data.q_bar_ac)?,
        q_int: opt(SignalKind::Qint, data.q_bar_int.as_ref())?,
    })
}

/// Harmonic means of the per-zone time constants and zone capacitances,
/// arithmetic means of the per-zone solar gains per unit capacitance.
pub fn aggregate_params(model: &BuildingModel) -> AggregateParams {
    let zones = model.zones();
    let n = zones.len() as f64;
    let harmonic = |f: &dyn Fn(&crate::thermal::ZoneParams) -> f64| {
        let mut acc = 0.0;
        for z in zones {
            acc += 1.0 / f(z);
        }
        n / acc
    };
    let arithmetic = |f: &dyn Fn(&crate::thermal::ZoneParams) -> f64| {
        let mut acc = 0.0;
        for z in zones {
            acc += f(z);
        }
        acc / n
    };
    AggregateParams {
        tau_za: harmonic(&|z| z.tau_za()),
        tau_zw: harmonic(&|z| z.tau_zw()),
        tau_wa: harmonic(&|z| z.tau_wa()),
        tau_wz: harmonic(&|z| z.tau_wz()),
        c_z: harmonic(&|z| z.c_z),
        a_z: arithmetic(&|z| z.a_z / z.c_z),
        a_w: arithmetic(&|z| z.a_w / z.c_w),
    }
}

/// Aggregation errors and the aggregate internal heat load. Needs every
/// zone's wall temperature and internal load, so it is a simulation-only
/// operation.
///
/// Besides the ambient, solar and load deviations, the zone-air error carries
/// the zone-to-wall deviation term `(T̃_w − T̃_z)/(R_zw C_z)` and the wall error
/// carries `(T̃_z − T̃_w)/(R_zw C_w)`; both sides of each coupling are needed
/// for the averaged dynamics to be reproduced exactly.
pub fn aggregation_errors(
    model: &BuildingModel,
    zones: &ZoneTraceSet,
    deviations: &Deviations,
) -> Result<AggregationErrors> {
    let n_z = model.n_zones();
    if zones.n_zones() != n_z || deviations.t_z.len() != n_z {
        return Err(Error::DimensionMismatch(format!(
            "model has {n_z} zones, traces {} and deviations {}",
            zones.n_zones(),
            deviations.t_z.len()
        )));
    }
    let t_w = deviations.t_w.as_ref().ok_or(Error::MissingSignal("T_w"))?;
    let q_int = deviations.q_int.as_ref().ok_or(Error::MissingSignal("q_int"))?;
    let q_int_signals = zones.signals(SignalKind::Qint).ok_or(Error::MissingSignal("q_int"))?;
    let q_bar_int = mean_over_zones(&q_int_signals);
    let agg = aggregate_params(model);
    let n = zones.len();
    let nf = n_z as f64;

    let correct_interactions = match model.interaction() {
        Some(_) => {
            let c0 = model.zones()[0].c_z;
            model.zones().iter().any(|z| z.c_z != c0)
        }
        None => false,
    };

    let mut w_z = Vec::with_capacity(n);
    let mut w_w = Vec::with_capacity(n);
    let mut q_agg = Vec::with_capacity(n);
    for k in 0..n {
        let mut acc_z = 0.0;
        let mut acc_w = 0.0;
        for (j, p) in model.zones().iter().enumerate() {
            let ta = deviations.t_a[j][k];
            let tz = deviations.t_z[j][k];
            let tw = t_w[j][k];
            let eta = deviations.eta_solar[j][k];
            acc_z += (ta - tz) / (p.r_za * p.c_z)
                + (tw - tz) / (p.r_zw * p.c_z)
                + (q_int[j][k] - deviations.q_ac[j][k] + p.a_z * eta) / p.c_z;
            acc_w += (ta - tw) / (p.r_wa * p.c_w) + (tz - tw) / (p.r_zw * p.c_w) + p.a_w / p.c_w * eta;
        }
        let mut wz = acc_z / nf;
        if correct_interactions {
            wz += interaction_correction(model, deviations, k);
        }
        w_z.push(wz);
        w_w.push(acc_w / nf);
        q_agg.push(q_bar_int[k] + wz * agg.c_z);
    }
    let wrap = |values| SignalTrace {
        start_time: zones.start_time,
        t_s: zones.t_s,
        values,
    };
    Ok(AggregationErrors {
        w_tilde_z: wrap(w_z),
        w_tilde_w: wrap(w_w),
        q_bar_agg: wrap(q_agg),
    })
}

/// `(1/N_z) Σ_i Σ_j (T̃_z^i − T̃_z^j) / (R_z^{ij} C_z^j)` at sample `k`.
pub fn interaction_correction(model: &BuildingModel, deviations: &Deviations, k: usize) -> f64 {
    let Some(m) = model.interaction() else {
        return 0.0;
    };
    let n_z = model.n_zones();
    let mut acc = 0.0;
    for i in 0..n_z {
        for j in 0..n_z {
            if i != j {
                acc += (deviations.t_z[i][k] - deviations.t_z[j][k]) * m.conductance(i, j)
                    / model.zones()[j].c_z;
            }
        }
    }
    acc / n_z as f64
}

/// Time derivatives of the averaged states predicted by the aggregate model.
#[derive(Debug, Clone, PartialEq)]
pub struct AverageDynamics {
    pub d_t_bar_z: Vec<f64>,
    pub d_t_bar_w: Vec<f64>,
}

/// Right-hand sides of the time-invariant aggregate model, including the
/// additive aggregation errors, evaluated at every sample.
pub fn reconstruct_average_dynamics(
    params: &AggregateParams,
    data: &AggregateData,
    errors: &AggregationErrors,
) -> Result<AverageDynamics> {
    data.validate()?;
    let t_w = data.t_bar_w.as_ref().ok_or(Error::MissingSignal("T_w"))?;
    let q_int = data.q_bar_int.as_ref().ok_or(Error::MissingSignal("q_int"))?;
    if !data.t_bar_z.same_grid(&errors.w_tilde_z) || !data.t_bar_z.same_grid(&errors.w_tilde_w) {
        return Err(Error::SamplingMismatch(
            "aggregation errors are not on the data grid".into(),
        ));
    }
    let p = params;
    let n = data.len();
    let mut d_z = Vec::with_capacity(n);
    let mut d_w = Vec::with_capacity(n);
    for k in 0..n {
        let tz = data.t_bar_z.values[k];
        let tw = t_w.values[k];
        let ta = data.t_bar_a.values[k];
        let eta = data.eta_bar_solar.values[k];
        d_z.push(
            (ta - tz) / p.tau_za
                + (tw - tz) / p.tau_zw
                + (q_int.values[k] - data.q_bar_ac.values[k]) / p.c_z
                + p.a_z * eta
                + errors.w_tilde_z.values[k],
        );
        d_w.push((ta - tw) / p.tau_wa + (tz - tw) / p.tau_wz + p.a_w * eta + errors.w_tilde_w.values[k]);
    }
    Ok(AverageDynamics {
        d_t_bar_z: d_z,
        d_t_bar_w: d_w,
    })
}

/// Instantaneous parameters of the time-varying aggregate model; `None` where
/// the defining ratio is singular.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeVaryingParams {
    pub tau_za: Vec<Option<f64>>,
    pub tau_zw: Vec<Option<f64>>,
    pub tau_wa: Vec<Option<f64>>,
    pub tau_wz: Vec<Option<f64>>,
    pub c_z_ac: Vec<Option<f64>>,
    pub c_z_int: Vec<Option<f64>>,
    pub a_z: Vec<Option<f64>>,
    pub a_w: Vec<Option<f64>>,
}

impl TimeVaryingParams {
    pub fn columns(&self) -> [(&'static str, &[Option<f64>]); 8] {
        [
            ("tau_za", &self.tau_za),
            ("tau_zw", &self.tau_zw),
            ("tau_wa", &self.tau_wa),
            ("tau_wz", &self.tau_wz),
            ("c_z_ac", &self.c_z_ac),
            ("c_z_int", &self.c_z_int),
            ("a_z", &self.a_z),
            ("a_w", &self.a_w),
        ]
    }
}

/// Mean over the defined samples of a diagnostic trace.
pub fn defined_mean(trace: &[Option<f64>]) -> Option<f64> {
    let (sum, count) = trace
        .iter()
        .flatten()
        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (num.abs() >= UNDEFINED_EPS && den.abs() >= UNDEFINED_EPS).then(|| num / den)
}

/// Parameters of the time-varying aggregate model (diagnostic; needs per-zone
/// parameters and wall temperatures).
pub fn time_varying_params(zones: &ZoneTraceSet, model: &BuildingModel) -> Result<TimeVaryingParams> {
    if zones.n_zones() != model.n_zones() {
        return Err(Error::DimensionMismatch(format!(
            "model has {} zones, traces {}",
            model.n_zones(),
            zones.n_zones()
        )));
    }
    zones.validate()?;
    let get = |kind: SignalKind| zones.signals(kind).ok_or(Error::MissingSignal(kind.name()));
    let tz = get(SignalKind::Tz)?;
    let tw = get(SignalKind::Tw)?;
    let ta = get(SignalKind::Ta)?;
    let eta = get(SignalKind::EtaSolar)?;
    let qac = get(SignalKind::Qac)?;
    let qint = get(SignalKind::Qint)?;
    let p = model.zones();
    let n = zones.len();

    // N_z·mean(T_m − T_p) is the plain sum of differences, so the N_z factors
    // cancel in every ratio below.
    let tau = |from: &[&[f64]], to: &[&[f64]], time_const: &dyn Fn(usize) -> f64| -> Vec<Option<f64>> {
        (0..n)
            .map(|k| {
                let mut diff_sum = 0.0;
                let mut weighted = 0.0;
                for j in 0..p.len() {
                    let d = to[j][k] - from[j][k];
                    diff_sum += d;
                    weighted += d / time_const(j);
                }
                ratio(diff_sum, weighted)
            })
            .collect()
    };
    let cap = |q: &[&[f64]]| -> Vec<Option<f64>> {
        (0..n)
            .map(|k| {
                let mut sum = 0.0;
                let mut weighted = 0.0;
                for j in 0..p.len() {
                    sum += q[j][k];
                    weighted += q[j][k] / p[j].c_z;
                }
                ratio(sum, weighted)
            })
            .collect()
    };
    let gain = |per_cap: &dyn Fn(usize) -> f64| -> Vec<Option<f64>> {
        (0..n)
            .map(|k| {
                let mut sum = 0.0;
                let mut weighted = 0.0;
                for j in 0..p.len() {
                    sum += eta[j][k];
                    weighted += per_cap(j) * eta[j][k];
                }
                ratio(weighted, sum)
            })
            .collect()
    };
    Ok(TimeVaryingParams {
        tau_za: tau(&tz, &ta, &|j| p[j].tau_za()),
        tau_zw: tau(&tz, &tw, &|j| p[j].tau_zw()),
        tau_wa: tau(&tw, &ta, &|j| p[j].tau_wa()),
        tau_wz: tau(&tw, &tz, &|j| p[j].tau_wz()),
        c_z_ac: cap(&qac),
        c_z_int: cap(&qint),
        a_z: gain(&|j| p[j].a_z / p[j].c_z),
        a_w: gain(&|j| p[j].a_w / p[j].c_w),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermal::ZoneParams;
    use crate::trace::ZoneTrace;
    use chrono::NaiveDate;

    fn start() -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2020, 1, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap()
    }

    fn zone(id: &str, t_z: f64) -> ZoneTrace {
        ZoneTrace {
            id: id.into(),
            t_z: vec![t_z; 3],
            t_w: Some(vec![t_z + 1.0; 3]),
            t_a: vec![30.0; 3],
            eta_solar: vec![0.2; 3],
            q_ac: vec![1.0; 3],
            q_int: Some(vec![0.5; 3]),
        }
    }

    #[test]
    fn two_zone_mean_and_deviation() {
        let set = ZoneTraceSet::new(start(), 0.25, vec![zone("a", 20.0), zone("b", 22.0)]).unwrap();
        let data = average_signals(&set).unwrap();
        assert_eq!(data.t_bar_z.values, vec![21.0; 3]);
        let dev = deviation_signals(&set, &data).unwrap();
        assert_eq!(dev.t_z[0], vec![-1.0; 3]);
        assert_eq!(dev.t_z[1], vec![1.0; 3]);
    }

    #[test]
    fn single_zone_average_is_identity() {
        let set = ZoneTraceSet::new(start(), 0.25, vec![zone("a", 20.5)]).unwrap();
        let data = average_signals(&set).unwrap();
        assert_eq!(data.t_bar_z.values, set.zones[0].t_z);
        assert_eq!(data.t_bar_w.unwrap().values, set.zones[0].t_w.clone().unwrap());
    }

    #[test]
    fn harmonic_time_constant() {
        // R_za·C_z = 1 h and 3 h -> 2 / (1 + 1/3) = 1.5 h
        let a = ZoneParams::new(1.0, 1.0, 1.0, 1.0, 1.0, 0.1, 0.1).unwrap();
        let b = ZoneParams::new(3.0, 1.0, 1.0, 1.0, 1.0, 0.1, 0.1).unwrap();
        let m = BuildingModel::independent(vec![a, b]).unwrap();
        let agg = aggregate_params(&m);
        assert!((agg.tau_za - 1.5).abs() < 1e-15);
        assert_eq!(agg.c_z, 1.0);
    }

    #[test]
    fn homogeneous_aggregates() {
        let p = ZoneParams::new(1.1, 0.7, 0.8, 3.4, 5.6, 0.4, 15.0).unwrap();
        let m = BuildingModel::independent(vec![p; 4]).unwrap();
        let agg = aggregate_params(&m);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-14 * b.abs();
        assert!(close(agg.tau_za, p.tau_za()));
        assert!(close(agg.tau_zw, p.tau_zw()));
        assert!(close(agg.tau_wa, p.tau_wa()));
        assert!(close(agg.tau_wz, p.tau_wz()));
        assert!(close(agg.c_z, p.c_z));
        assert!(close(agg.a_z, p.a_z / p.c_z));
        assert!(close(agg.a_w, p.a_w / p.c_w));
    }

    #[test]
    fn undefined_when_averages_coincide() {
        let p = ZoneParams::new(1.1, 0.7, 0.8, 3.4, 5.6, 0.4, 15.0).unwrap();
        let m = BuildingModel::independent(vec![p; 2]).unwrap();
        let mut a = zone("a", 30.0);
        let b = zone("b", 30.0);
        a.eta_solar = vec![0.0; 3];
        let mut b = b;
        b.eta_solar = vec![0.0; 3];
        let set = ZoneTraceSet::new(start(), 0.25, vec![a, b]).unwrap();
        let tv = time_varying_params(&set, &m).unwrap();
        // T_z == T_a everywhere, no sun
        assert!(tv.tau_za.iter().all(Option::is_none));
        assert!(tv.a_z.iter().all(Option::is_none));
        assert!(tv.tau_zw.iter().all(Option::is_some));
    }
}
