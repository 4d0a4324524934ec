//! Uniformly sampled time series.

use chrono::{Duration, NaiveDateTime};

use crate::error::{ensure_finite, Error, Result};

/// Sampling interval equality tolerance, in hours (well below a millisecond).
const T_S_TOL: f64 = 1e-9;

/// A uniformly sampled scalar signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalTrace {
    pub start_time: NaiveDateTime,
    /// Sampling interval in hours.
    pub t_s: f64,
    pub values: Vec<f64>,
}

impl SignalTrace {
    pub fn new(start_time: NaiveDateTime, t_s: f64, values: Vec<f64>) -> Result<Self> {
        if !(t_s.is_finite() && t_s > 0.0) {
            return Err(Error::InvalidParameter {
                name: "t_s",
                reason: format!("sampling interval must be positive, got {t_s}"),
            });
        }
        if values.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        Ok(Self {
            start_time,
            t_s,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamp(&self, k: usize) -> NaiveDateTime {
        timestamp_at(self.start_time, self.t_s, k)
    }

    /// Sub-trace `[from, to)` with its own start time.
    pub fn window(&self, from: usize, to: usize) -> SignalTrace {
        SignalTrace {
            start_time: self.timestamp(from),
            t_s: self.t_s,
            values: self.values[from..to].to_vec(),
        }
    }

    pub fn same_grid(&self, other: &SignalTrace) -> bool {
        self.start_time == other.start_time
            && (self.t_s - other.t_s).abs() <= T_S_TOL
            && self.len() == other.len()
    }
}

/// Sampling interval in whole milliseconds.
pub fn step_millis(t_s: f64) -> i64 {
    (t_s * 3_600_000.0).round() as i64
}

pub fn timestamp_at(start: NaiveDateTime, t_s: f64, k: usize) -> NaiveDateTime {
    start + Duration::milliseconds(step_millis(t_s) * k as i64)
}

/// The per-zone signal kinds that enter the aggregate model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SignalKind {
    Tz,
    Tw,
    Ta,
    EtaSolar,
    Qac,
    Qint,
}

impl SignalKind {
    pub const ALL: [SignalKind; 6] = [
        SignalKind::Ta,
        SignalKind::Tz,
        SignalKind::Tw,
        SignalKind::EtaSolar,
        SignalKind::Qac,
        SignalKind::Qint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SignalKind::Tz => "T_z",
            SignalKind::Tw => "T_w",
            SignalKind::Ta => "T_a",
            SignalKind::EtaSolar => "eta_solar",
            SignalKind::Qac => "q_ac",
            SignalKind::Qint => "q_int",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        SignalKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// All sampled signals of one zone. `t_w` and `q_int` are only known in simulation
/// (or, for `q_int`, in specially instrumented buildings).
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneTrace {
    pub id: String,
    pub t_z: Vec<f64>,
    pub t_w: Option<Vec<f64>>,
    pub t_a: Vec<f64>,
    pub eta_solar: Vec<f64>,
    pub q_ac: Vec<f64>,
    pub q_int: Option<Vec<f64>>,
}

impl ZoneTrace {
    pub fn len(&self) -> usize {
        self.t_z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_z.is_empty()
    }

    pub fn signal(&self, kind: SignalKind) -> Option<&[f64]> {
        match kind {
            SignalKind::Tz => Some(&self.t_z),
            SignalKind::Tw => self.t_w.as_deref(),
            SignalKind::Ta => Some(&self.t_a),
            SignalKind::EtaSolar => Some(&self.eta_solar),
            SignalKind::Qac => Some(&self.q_ac),
            SignalKind::Qint => self.q_int.as_deref(),
        }
    }

    fn window(&self, from: usize, to: usize) -> ZoneTrace {
        let cut = |v: &Vec<f64>| v[from..to].to_vec();
        ZoneTrace {
            id: self.id.clone(),
            t_z: cut(&self.t_z),
            t_w: self.t_w.as_ref().map(cut),
            t_a: cut(&self.t_a),
            eta_solar: cut(&self.eta_solar),
            q_ac: cut(&self.q_ac),
            q_int: self.q_int.as_ref().map(cut),
        }
    }
}

/// Signals of every zone of a building on one shared sampling grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneTraceSet {
    pub start_time: NaiveDateTime,
    pub t_s: f64,
    pub zones: Vec<ZoneTrace>,
}

impl ZoneTraceSet {
    /// Builds a trace set and checks that every signal has the same length,
    /// values are finite and the physical sign constraints hold.
    pub fn new(start_time: NaiveDateTime, t_s: f64, zones: Vec<ZoneTrace>) -> Result<Self> {
        let set = Self {
            start_time,
            t_s,
            zones,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_s.is_finite() && self.t_s > 0.0) {
            return Err(Error::InvalidParameter {
                name: "t_s",
                reason: format!("sampling interval must be positive, got {}", self.t_s),
            });
        }
        let first = self.zones.first().ok_or(Error::EmptyZoneSet)?;
        let n = first.len();
        if n == 0 {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        let has_tw = first.t_w.is_some();
        let has_qint = first.q_int.is_some();
        for zone in &self.zones {
            if zone.t_w.is_some() != has_tw || zone.q_int.is_some() != has_qint {
                return Err(Error::DimensionMismatch(format!(
                    "zone `{}` does not carry the same optional signals as zone `{}`",
                    zone.id, first.id
                )));
            }
            for kind in SignalKind::ALL {
                if let Some(values) = zone.signal(kind) {
                    if values.len() != n {
                        return Err(Error::DimensionMismatch(format!(
                            "zone `{}` signal {} has {} samples, expected {n}",
                            zone.id,
                            kind.name(),
                            values.len()
                        )));
                    }
                    ensure_finite(values, &format!("zone `{}` {}", zone.id, kind.name()))?;
                }
            }
            for (kind, values) in [
                (SignalKind::EtaSolar, Some(&zone.eta_solar)),
                (SignalKind::Qac, Some(&zone.q_ac)),
                (SignalKind::Qint, zone.q_int.as_ref()),
            ] {
                if let Some(k) = values.and_then(|v| v.iter().position(|&x| x < 0.0)) {
                    return Err(Error::InvalidParameter {
                        name: kind.name(),
                        reason: format!("zone `{}` sample {k} is negative", zone.id),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn n_zones(&self) -> usize {
        self.zones.len()
    }

    pub fn len(&self) -> usize {
        self.zones.first().map_or(0, ZoneTrace::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn timestamp(&self, k: usize) -> NaiveDateTime {
        timestamp_at(self.start_time, self.t_s, k)
    }

    /// Per-zone slices of one signal kind, or `None` if any zone lacks it.
    pub fn signals(&self, kind: SignalKind) -> Option<Vec<&[f64]>> {
        self.zones.iter().map(|z| z.signal(kind)).collect()
    }

    /// Samples `[from, to)` of every zone.
    pub fn window(&self, from: usize, to: usize) -> ZoneTraceSet {
        ZoneTraceSet {
            start_time: self.timestamp(from),
            t_s: self.t_s,
            zones: self.zones.iter().map(|z| z.window(from, to)).collect(),
        }
    }
}
