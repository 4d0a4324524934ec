//! Synthetic multi-zone data: an open-loop virtual building and a closed-loop
//! analogue with deadband thermostats and space-heater style occupancy.

use std::f64::consts::PI;

use chrono::{NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aggregation::{
    aggregate_params, aggregation_errors, average_signals, deviation_signals, AggregateData, AggregateParams,
    AggregationErrors,
};
use crate::error::{Error, Result};
use crate::thermal::{simulate_with, BuildingModel, ZoneInputs, ZoneParams, ZoneState};
use crate::trace::ZoneTraceSet;

/// Zone whose aggregate time constants and gains sit near those of a small
/// office: τ_za ≈ 0.79 h, τ_zw ≈ 0.59 h, τ_wa ≈ 19.4 h, τ_wz ≈ 2.84 h,
/// C_z ≈ 0.71 kWh/°C.
pub const NOMINAL_ZONE: ZoneParams = ZoneParams {
    r_za: 1.11,
    c_z: 0.71,
    r_zw: 0.826,
    c_w: 3.44,
    r_wa: 5.63,
    a_z: 0.405,
    a_w: 15.67,
};

/// Relative half-widths of the per-zone parameter draws. `air` covers the
/// zone-air parameters (R_za, C_z, A_z), `wall` the rest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spread {
    pub air: f64,
    pub wall: f64,
}

impl Spread {
    pub fn uniform(s: f64) -> Self {
        Self { air: s, wall: s }
    }
}

/// `n` independent zones, each parameter of `nominal` scaled by an independent
/// draw from `1 + U(−s, s)`, `s` taken from `spread` by parameter group.
pub fn perturbed_building(nominal: &ZoneParams, n: usize, spread: Spread, seed: u64) -> Result<BuildingModel> {
    for s in [spread.air, spread.wall] {
        if !(0.0..1.0).contains(&s) {
            return Err(Error::InvalidScenario(format!("spread must lie in [0, 1), got {s}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |v: f64, s: f64| {
        let u: f64 = rng.gen_range(-1.0..=1.0);
        v * (1.0 + s * u)
    };
    let (a, w) = (spread.air, spread.wall);
    let zones = (0..n)
        .map(|_| ZoneParams {
            r_za: draw(nominal.r_za, a),
            c_z: draw(nominal.c_z, a),
            r_zw: draw(nominal.r_zw, w),
            c_w: draw(nominal.c_w, w),
            r_wa: draw(nominal.r_wa, w),
            a_z: draw(nominal.a_z, a),
            a_w: draw(nominal.a_w, w),
        })
        .collect();
    BuildingModel::independent(zones)
}

/// Ambient temperature `mean + amplitude·cos(2π(t − peak_hour)/24)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherSpec {
    pub mean: f64,
    pub amplitude: f64,
    pub peak_hour: f64,
}

impl WeatherSpec {
    fn at(&self, t: f64) -> f64 {
        self.mean + self.amplitude * (2.0 * PI * (t - self.peak_hour) / 24.0).cos()
    }
}

/// Half-sine irradiance between sunrise and sunset, kW/m².
#[derive(Debug, Clone, PartialEq)]
pub struct SolarSpec {
    pub peak: f64,
    pub sunrise: f64,
    pub sunset: f64,
    /// Per-zone exposure factor; empty means 1 for every zone.
    pub zone_scale: Vec<f64>,
    /// Daily attenuation drawn from `[1 − day_variation, 1]` (cloud cover).
    pub day_variation: f64,
}

impl SolarSpec {
    fn half_sine(&self, hour: f64) -> f64 {
        if hour <= self.sunrise || hour >= self.sunset {
            0.0
        } else {
            (PI * (hour - self.sunrise) / (self.sunset - self.sunrise)).sin()
        }
    }
}

/// Constant `level` on `[start, end)`, hours of day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub level: f64,
}

/// Daily piecewise-constant profile: `base` outside the segments.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySchedule {
    pub base: f64,
    pub segments: Vec<Segment>,
}

impl DailySchedule {
    pub fn at_hour(&self, hour: f64) -> f64 {
        let h = hour.rem_euclid(24.0);
        self.segments
            .iter()
            .find(|s| h >= s.start && h < s.end)
            .map_or(self.base, |s| s.level)
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(self.base.is_finite() && self.base >= 0.0) {
            return Err(Error::InvalidScenario(format!("{what}: base level must be non-negative")));
        }
        for s in &self.segments {
            if !(s.start >= 0.0 && s.end <= 24.0 && s.start < s.end) {
                return Err(Error::InvalidScenario(format!(
                    "{what}: segment [{}, {}) is not within one day",
                    s.start, s.end
                )));
            }
            if !(s.level.is_finite() && s.level >= 0.0) {
                return Err(Error::InvalidScenario(format!("{what}: level must be non-negative")));
            }
        }
        Ok(())
    }
}

/// Per-zone internal load: the shared schedule shifted by `zone_offset[j]`
/// hours and scaled by `zone_scale[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancySpec {
    pub schedule: DailySchedule,
    pub zone_scale: Vec<f64>,
    pub zone_offset: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OpenLoopProfile {
    Constant(f64),
    Schedule(DailySchedule),
    /// Seeded pseudo-random binary sequence between `low` and `high`, holding
    /// each level for `hold` hours. The same sequence drives every zone.
    Prbs { low: f64, high: f64, hold: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeadbandSpec {
    pub setpoint: f64,
    /// Half-width of the band, °C.
    pub delta: f64,
    /// Cooling rate when on, kW.
    pub capacity: f64,
    /// Daily `[start, end)` hours with cooling forced off; may wrap midnight.
    pub shutoff: Option<(f64, f64)>,
}

impl DeadbandSpec {
    pub fn is_shut_off(&self, hour: f64) -> bool {
        let h = hour.rem_euclid(24.0);
        match self.shutoff {
            None => false,
            Some((a, b)) if a <= b => h >= a && h < b,
            Some((a, b)) => h >= a || h < b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HvacSpec {
    /// Open-loop cooling, `zone_scale[j]` times the shared profile.
    OpenLoop { profile: OpenLoopProfile, zone_scale: Vec<f64> },
    Deadband(DeadbandSpec),
}

/// Single dial for how differently the zones are driven. Each zone draws
/// fixed random factors once; `level` scales them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsynchronicitySpec {
    pub level: f64,
    /// Largest occupancy time shift at level 1, hours.
    pub occupancy_shift: f64,
    /// Largest solar time shift at level 1, hours.
    pub solar_shift: f64,
    /// Largest relative occupancy amplitude change at level 1.
    pub occupancy_amplitude: f64,
    /// Largest relative solar amplitude change at level 1.
    pub solar_amplitude: f64,
}

impl AsynchronicitySpec {
    pub fn synchronous() -> Self {
        Self {
            level: 0.0,
            occupancy_shift: 3.0,
            solar_shift: 1.0,
            occupancy_amplitude: 0.5,
            solar_amplitude: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub building: BuildingModel,
    pub start_time: NaiveDateTime,
    pub days: f64,
    pub t_s: f64,
    pub weather: WeatherSpec,
    pub solar: SolarSpec,
    pub occupancy: OccupancySpec,
    pub hvac: HvacSpec,
    pub asynchronicity: AsynchronicitySpec,
    pub initial: ZoneState,
    pub seed: u64,
}

/// Known quantities of a generated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub params: AggregateParams,
    pub aggregate: AggregateData,
    pub errors: AggregationErrors,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub traces: ZoneTraceSet,
    pub truth: GroundTruth,
}

fn default_start() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2018, 9, 21)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid date")
}

fn office_hours() -> DailySchedule {
    DailySchedule {
        base: 0.3,
        segments: vec![
            Segment {
                start: 8.0,
                end: 12.0,
                level: 1.0,
            },
            Segment {
                start: 13.0,
                end: 17.0,
                level: 0.8,
            },
        ],
    }
}

impl ScenarioSpec {
    /// Two-day open-loop run of a five-zone heterogeneous building. Zone air
    /// parameters vary ±40 %, envelope parameters ±10 %; occupancy is
    /// asynchronous, solar gain is not.
    pub fn open_loop_default(seed: u64) -> Result<Self> {
        Ok(Self {
            building: perturbed_building(&NOMINAL_ZONE, 5, Spread { air: 0.4, wall: 0.1 }, seed)?,
            start_time: default_start(),
            days: 2.0,
            t_s: 1.0 / 12.0,
            weather: WeatherSpec {
                mean: 27.0,
                amplitude: 5.0,
                peak_hour: 15.0,
            },
            solar: SolarSpec {
                peak: 0.6,
                sunrise: 6.0,
                sunset: 18.0,
                zone_scale: Vec::new(),
                day_variation: 0.0,
            },
            occupancy: OccupancySpec {
                schedule: office_hours(),
                zone_scale: Vec::new(),
                zone_offset: Vec::new(),
            },
            hvac: HvacSpec::OpenLoop {
                profile: OpenLoopProfile::Prbs {
                    low: 0.0,
                    high: 2.0,
                    hold: 3.0,
                },
                zone_scale: Vec::new(),
            },
            asynchronicity: AsynchronicitySpec {
                level: 0.3,
                solar_shift: 0.0,
                solar_amplitude: 0.0,
                ..AsynchronicitySpec::synchronous()
            },
            initial: ZoneState { t_z: 24.0, t_w: 24.0 },
            seed,
        })
    }

    /// Twelve days of thermostat-controlled operation with cooling shut off
    /// at night. Zone parameters vary ±20 % (air) and ±10 % (envelope);
    /// occupancy is the asynchronous input.
    pub fn closed_loop_default(seed: u64) -> Result<Self> {
        Ok(Self {
            days: 12.0,
            solar: SolarSpec {
                day_variation: 0.4,
                ..Self::open_loop_default(seed)?.solar
            },
            hvac: HvacSpec::Deadband(DeadbandSpec {
                setpoint: 23.0,
                delta: 1.0,
                capacity: 20.0,
                shutoff: Some((20.0, 6.0)),
            }),
            asynchronicity: AsynchronicitySpec {
                level: 0.5,
                solar_shift: 0.0,
                solar_amplitude: 0.0,
                ..AsynchronicitySpec::synchronous()
            },
            building: perturbed_building(&NOMINAL_ZONE, 5, Spread { air: 0.2, wall: 0.1 }, seed)?,
            ..Self::open_loop_default(seed)?
        })
    }

    pub fn n_samples(&self) -> usize {
        (self.days * 24.0 / self.t_s).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let n_z = self.building.n_zones();
        if !(self.days.is_finite() && self.days > 0.0) {
            return Err(Error::InvalidScenario(format!("horizon must be positive, got {} days", self.days)));
        }
        if !(self.t_s.is_finite() && self.t_s > 0.0) {
            return Err(Error::InvalidScenario(format!("t_s must be positive, got {}", self.t_s)));
        }
        if self.n_samples() < 2 {
            return Err(Error::InvalidScenario("horizon shorter than two samples".into()));
        }
        let per_zone = [
            ("solar.zone_scale", &self.solar.zone_scale),
            ("occupancy.zone_scale", &self.occupancy.zone_scale),
            ("occupancy.zone_offset", &self.occupancy.zone_offset),
        ];
        for (name, v) in per_zone {
            if !v.is_empty() && v.len() != n_z {
                return Err(Error::InvalidScenario(format!("{name} has {} entries for {n_z} zones", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidScenario(format!("{name} must be finite")));
            }
        }
        for (name, v) in [
            ("solar.zone_scale", &self.solar.zone_scale),
            ("occupancy.zone_scale", &self.occupancy.zone_scale),
        ] {
            if v.iter().any(|x| *x < 0.0) {
                return Err(Error::InvalidScenario(format!("{name} must be non-negative")));
            }
        }
        let s = &self.solar;
        if !(s.peak >= 0.0 && 0.0 <= s.sunrise && s.sunrise < s.sunset && s.sunset <= 24.0) {
            return Err(Error::InvalidScenario("solar needs peak ≥ 0 and 0 ≤ sunrise < sunset ≤ 24".into()));
        }
        if !(0.0..=1.0).contains(&s.day_variation) {
            return Err(Error::InvalidScenario("solar.day_variation must lie in [0, 1]".into()));
        }
        if !(self.weather.mean.is_finite() && self.weather.amplitude.is_finite() && self.weather.peak_hour.is_finite()) {
            return Err(Error::InvalidScenario("weather must be finite".into()));
        }
        self.occupancy.schedule.validate("occupancy")?;
        match &self.hvac {
            HvacSpec::OpenLoop { profile, zone_scale } => {
                if !zone_scale.is_empty() && zone_scale.len() != n_z {
                    return Err(Error::InvalidScenario(format!(
                        "hvac.zone_scale has {} entries for {n_z} zones",
                        zone_scale.len()
                    )));
                }
                if zone_scale.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                    return Err(Error::InvalidScenario("hvac.zone_scale must be non-negative".into()));
                }
                match profile {
                    OpenLoopProfile::Constant(c) if !(c.is_finite() && *c >= 0.0) => {
                        return Err(Error::InvalidScenario("constant cooling must be non-negative".into()));
                    }
                    OpenLoopProfile::Schedule(s) => s.validate("hvac schedule")?,
                    OpenLoopProfile::Prbs { low, high, hold }
                        if !(*low >= 0.0 && high >= low && high.is_finite() && *hold > 0.0) =>
                    {
                        return Err(Error::InvalidScenario("PRBS needs 0 ≤ low ≤ high and hold > 0".into()));
                    }
                    _ => {}
                }
            }
            HvacSpec::Deadband(d) => {
                if !(d.delta.is_finite() && d.delta > 0.0) {
                    return Err(Error::InvalidScenario(format!("deadband width must be positive, got {}", d.delta)));
                }
                if !(d.capacity.is_finite() && d.capacity >= 0.0 && d.setpoint.is_finite()) {
                    return Err(Error::InvalidScenario("deadband needs finite setpoint and capacity ≥ 0".into()));
                }
                if let Some((a, b)) = d.shutoff {
                    if !((0.0..=24.0).contains(&a) && (0.0..=24.0).contains(&b)) {
                        return Err(Error::InvalidScenario("shutoff window must be given in hours of day".into()));
                    }
                }
            }
        }
        let a = &self.asynchronicity;
        if ![a.level, a.occupancy_shift, a.solar_shift, a.occupancy_amplitude, a.solar_amplitude]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
        {
            return Err(Error::InvalidScenario("asynchronicity settings must be non-negative".into()));
        }
        if !(self.initial.t_z.is_finite() && self.initial.t_w.is_finite()) {
            return Err(Error::InvalidScenario("initial state must be finite".into()));
        }
        Ok(())
    }
}

/// Hysteresis memory of one thermostat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DeadbandState {
    pub cooling: bool,
}

/// Cooling command: on at `T_z ≥ setpoint + δ`, off at `T_z ≤ setpoint − δ`,
/// unchanged in between, forced off during the shutoff window.
pub fn deadband_controller(t_z: f64, state: &mut DeadbandState, spec: &DeadbandSpec, hour_of_day: f64) -> f64 {
    if spec.is_shut_off(hour_of_day) {
        state.cooling = false;
        return 0.0;
    }
    if t_z >= spec.setpoint + spec.delta {
        state.cooling = true;
    } else if t_z <= spec.setpoint - spec.delta {
        state.cooling = false;
    }
    if state.cooling {
        spec.capacity
    } else {
        0.0
    }
}

/// Per-zone factors after applying the asynchronicity dial.
struct ZoneDrive {
    occ_scale: f64,
    occ_offset: f64,
    solar_scale: f64,
    solar_offset: f64,
    hvac_scale: f64,
}

fn per_zone(v: &[f64], j: usize, default: f64) -> f64 {
    v.get(j).copied().unwrap_or(default)
}

/// Independent random streams derived from the scenario seed.
const STREAM_ASYNC: u64 = 1;
const STREAM_PRBS: u64 = 2;
const STREAM_CLOUDS: u64 = 3;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn zone_drives(spec: &ScenarioSpec) -> Vec<ZoneDrive> {
    let mut r = rng(spec.seed, STREAM_ASYNC);
    let a = &spec.asynchronicity;
    let hvac_scale: &[f64] = match &spec.hvac {
        HvacSpec::OpenLoop { zone_scale, .. } => zone_scale,
        HvacSpec::Deadband(_) => &[],
    };
    (0..spec.building.n_zones())
        .map(|j| {
            let mut u = || -> f64 { r.gen_range(-1.0..=1.0) };
            let (u_occ_shift, u_occ_amp, u_sol_shift, u_sol_amp) = (u(), u(), u(), u());
            ZoneDrive {
                occ_scale: per_zone(&spec.occupancy.zone_scale, j, 1.0) * (1.0 + a.level * a.occupancy_amplitude * u_occ_amp).max(0.0),
                occ_offset: per_zone(&spec.occupancy.zone_offset, j, 0.0) + a.level * a.occupancy_shift * u_occ_shift,
                solar_scale: per_zone(&spec.solar.zone_scale, j, 1.0) * (1.0 + a.level * a.solar_amplitude * u_sol_amp).max(0.0),
                solar_offset: a.level * a.solar_shift * u_sol_shift,
                hvac_scale: per_zone(hvac_scale, j, 1.0),
            }
        })
        .collect()
}

pub fn generate(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let n_t = spec.n_samples();
    let n_z = spec.building.n_zones();
    let t_s = spec.t_s;
    let drives = zone_drives(spec);
    let n_days = (n_t as f64 * t_s / 24.0).ceil() as usize + 2;
    let mut clouds = rng(spec.seed, STREAM_CLOUDS);
    let day_factor: Vec<f64> = (0..n_days)
        .map(|_| 1.0 - spec.solar.day_variation * clouds.gen::<f64>())
        .collect();
    let prbs: Vec<f64> = match &spec.hvac {
        HvacSpec::OpenLoop {
            profile: OpenLoopProfile::Prbs { low, high, hold },
            ..
        } => {
            let mut r = rng(spec.seed, STREAM_PRBS);
            let n_hold = (n_t as f64 * t_s / hold).ceil() as usize + 1;
            (0..n_hold).map(|_| if r.gen::<bool>() { *high } else { *low }).collect()
        }
        _ => Vec::new(),
    };
    let solar_at = |t: f64, d: &ZoneDrive| -> f64 {
        let ts = t - d.solar_offset;
        let day = (ts / 24.0).floor().max(0.0) as usize;
        spec.solar.peak * d.solar_scale * day_factor[day.min(n_days - 1)] * spec.solar.half_sine(ts.rem_euclid(24.0))
    };
    let mut thermostats = vec![DeadbandState::default(); n_z];
    let initial = vec![spec.initial; n_z];
    let traces = simulate_with(&spec.building, &initial, spec.start_time, t_s, n_t, |k, states| {
        let t = k as f64 * t_s;
        let t_a = spec.weather.at(t);
        (0..n_z)
            .map(|j| {
                let d = &drives[j];
                let q_int = d.occ_scale * spec.occupancy.schedule.at_hour(t - d.occ_offset);
                let q_ac = match &spec.hvac {
                    HvacSpec::OpenLoop { profile, .. } => {
                        d.hvac_scale
                            * match profile {
                                OpenLoopProfile::Constant(c) => *c,
                                OpenLoopProfile::Schedule(s) => s.at_hour(t),
                                OpenLoopProfile::Prbs { hold, .. } => prbs[(t / hold).floor() as usize],
                            }
                    }
                    HvacSpec::Deadband(db) => deadband_controller(states[j].t_z, &mut thermostats[j], db, t),
                };
                ZoneInputs::new(t_a, solar_at(t, d), q_ac, q_int)
            })
            .collect()
    })?;
    let truth = ground_truth(&spec.building, &traces)?;
    Ok(Scenario { traces, truth })
}

/// Aggregate parameters, averaged signals and aggregation errors of a
/// simulated building.
pub fn ground_truth(building: &BuildingModel, traces: &ZoneTraceSet) -> Result<GroundTruth> {
    let aggregate = average_signals(traces)?;
    let deviations = deviation_signals(traces, &aggregate)?;
    let errors = aggregation_errors(building, traces, &deviations)?;
    Ok(GroundTruth {
        params: aggregate_params(building),
        aggregate,
        errors,
    })
}
