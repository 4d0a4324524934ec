//! Cross-zone sample statistics of the deviation signals, used as a data-only
//! indicator of how much aggregation error the load estimate is exposed to.

use chrono::{NaiveDateTime, Timelike};

use crate::aggregation::{average_signals, deviation_signals};
use crate::error::{Error, Result};
use crate::trace::{timestamp_at, SignalKind, ZoneTraceSet};

fn check_rectangular(tildes: &[Vec<f64>]) -> Result<usize> {
    let first = tildes.first().ok_or(Error::EmptyZoneSet)?;
    let n = first.len();
    if let Some(j) = tildes.iter().position(|t| t.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "zone {j} has {} samples, expected {n}",
            tildes[j].len()
        )));
    }
    Ok(n)
}

/// Per-sample mean over zones of deviation traces (`tildes[j][k]`).
pub fn sample_mean(tildes: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = check_rectangular(tildes)?;
    let n_z = tildes.len() as f64;
    Ok((0..n).map(|k| tildes.iter().map(|t| t[k]).sum::<f64>() / n_z).collect())
}

/// Per-sample variance `Σ_j p̃_j² / (N_z − 1)`, which assumes the deviations
/// are taken from the zone average. `None` for fewer than two zones.
pub fn sample_variance(tildes: &[Vec<f64>]) -> Result<Option<Vec<f64>>> {
    let n = check_rectangular(tildes)?;
    if tildes.len() < 2 {
        return Ok(None);
    }
    let d = (tildes.len() - 1) as f64;
    Ok(Some(
        (0..n).map(|k| tildes.iter().map(|t| t[k] * t[k]).sum::<f64>() / d).collect(),
    ))
}

/// The unsimplified variance `Σ_j (p̃_j − μ)² / (N_z − 1)`, valid for any
/// deviation traces.
pub fn sample_variance_about_mean(tildes: &[Vec<f64>]) -> Result<Option<Vec<f64>>> {
    let mean = sample_mean(tildes)?;
    if tildes.len() < 2 {
        return Ok(None);
    }
    let d = (tildes.len() - 1) as f64;
    Ok(Some(
        mean.iter()
            .enumerate()
            .map(|(k, m)| tildes.iter().map(|t| (t[k] - m).powi(2)).sum::<f64>() / d)
            .collect(),
    ))
}

/// Centered moving average over `window` samples, shortened at the ends.
pub fn sliding_mean(x: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let back = (w - 1) / 2;
    let fwd = w - 1 - back;
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..x.len())
        .map(|k| {
            let lo = k.saturating_sub(back);
            let hi = (k + fwd + 1).min(x.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Means of consecutive non-overlapping blocks; a trailing partial block is kept.
pub fn block_means(x: &[f64], block: usize) -> Vec<f64> {
    x.chunks(block.max(1))
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect()
}

/// Number of samples covering `hours`, at least one.
pub fn window_samples(hours: f64, t_s: f64) -> usize {
    ((hours / t_s).round() as usize).max(1)
}

/// Spearman rank correlation with tied values given their average rank.
/// `None` when fewer than two pairs or either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let rx = ranks(x);
    let ry = ranks(y);
    pearson(&rx, &ry)
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &p in &idx[i..=j] {
            r[p] = avg;
        }
        i = j + 1;
    }
    r
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Means of a trace over daytime samples (hour of day in `[day.0, day.1)`)
/// and over the rest. `None` for a side with no samples.
pub fn day_night_means(
    values: &[f64],
    start: NaiveDateTime,
    t_s: f64,
    day: (f64, f64),
) -> (Option<f64>, Option<f64>) {
    let (mut ds, mut dn, mut ns, mut nn) = (0.0, 0usize, 0.0, 0usize);
    for (k, v) in values.iter().enumerate() {
        let ts = timestamp_at(start, t_s, k);
        let h = ts.hour() as f64 + ts.minute() as f64 / 60.0 + ts.second() as f64 / 3600.0;
        if h >= day.0 && h < day.1 {
            ds += v;
            dn += 1;
        } else {
            ns += v;
            nn += 1;
        }
    }
    let avg = |s: f64, n: usize| (n > 0).then(|| s / n as f64);
    (avg(ds, dn), avg(ns, nn))
}

/// How the variance traces are brought to a common scale before summing into
/// the index.
#[derive(Debug, Clone, PartialEq)]
pub enum IndexScaling {
    /// Each windowed trace divided by its own peak.
    OwnPeak,
    /// Fixed divisors per kind, for comparing reports across datasets.
    Fixed(Vec<(SignalKind, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub kinds: Vec<SignalKind>,
    /// Sliding-mean window for the summaries, hours.
    pub window_hours: f64,
    /// Kinds summed into the index.
    pub index_kinds: Vec<SignalKind>,
    pub scaling: IndexScaling,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            kinds: vec![SignalKind::Tz, SignalKind::Qac],
            window_hours: 1.0,
            index_kinds: vec![SignalKind::Tz, SignalKind::Qac],
            scaling: IndexScaling::OwnPeak,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceTrace {
    pub kind: SignalKind,
    /// `None` when the kind is not in the data or there is a single zone.
    pub variance: Option<Vec<f64>>,
    pub windowed: Option<Vec<f64>>,
}

impl VarianceTrace {
    pub fn available(&self) -> bool {
        self.variance.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    pub start_time: NaiveDateTime,
    pub t_s: f64,
    pub window: usize,
    pub traces: Vec<VarianceTrace>,
    /// Sum of the scaled windowed variances of the index kinds; `None` if any
    /// of them is unavailable.
    pub index: Option<Vec<f64>>,
}

impl VarianceReport {
    pub fn trace(&self, kind: SignalKind) -> Option<&VarianceTrace> {
        self.traces.iter().find(|t| t.kind == kind)
    }
}

pub fn variance_report(zones: &ZoneTraceSet, opts: &ReportOptions) -> Result<VarianceReport> {
    if !(opts.window_hours.is_finite() && opts.window_hours > 0.0) {
        return Err(Error::InvalidParameter {
            name: "window_hours",
            reason: format!("must be positive, got {}", opts.window_hours),
        });
    }
    let data = average_signals(zones)?;
    let dev = deviation_signals(zones, &data)?;
    let window = window_samples(opts.window_hours, zones.t_s);
    let mut kinds = opts.kinds.clone();
    for k in &opts.index_kinds {
        if !kinds.contains(k) {
            kinds.push(*k);
        }
    }
    let mut traces = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let variance = match dev.kind(kind) {
            Some(t) => sample_variance(t)?,
            None => None,
        };
        let windowed = variance.as_ref().map(|v| sliding_mean(v, window));
        traces.push(VarianceTrace {
            kind,
            variance,
            windowed,
        });
    }
    let n = zones.len();
    let mut index = Some(vec![0.0; n]);
    for kind in &opts.index_kinds {
        let w = traces.iter().find(|t| t.kind == *kind).and_then(|t| t.windowed.as_ref());
        let (Some(acc), Some(w)) = (index.as_mut(), w) else {
            index = None;
            break;
        };
        let scale = match &opts.scaling {
            IndexScaling::OwnPeak => w.iter().cloned().fold(0.0, f64::max),
            IndexScaling::Fixed(s) => s
                .iter()
                .find(|(k, _)| k == kind)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::InvalidParameter {
                    name: "scaling",
                    reason: format!("no scale given for {}", kind.name()),
                })?,
        };
        if scale > 0.0 {
            for (a, v) in acc.iter_mut().zip(w) {
                *a += v / scale;
            }
        }
    }
    Ok(VarianceReport {
        start_time: zones.start_time,
        t_s: zones.t_s,
        window,
        traces,
        index,
    })
}
