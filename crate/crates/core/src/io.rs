//! CSV import and export.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! value read back is bit-identical to the value written.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDateTime;

use crate::aggregation::{AggregateData, AggregateParams};
use crate::error::{Error, Result};
use crate::estimation::EstimationResult;
use crate::trace::{timestamp_at, SignalTrace, ZoneTrace, ZoneTraceSet};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S%.f";

pub fn format_timestamp(t: NaiveDateTime) -> String {
    t.format(TIMESTAMP_FORMAT).to_string()
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT)
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S%.f"))
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M"))
        .ok()
}

fn csv_err(path: &Path, row: usize, column: &str, reason: impl Into<String>) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        row,
        column: column.to_string(),
        reason: reason.into(),
    }
}

fn from_csv(path: &Path, e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => csv_err(path, row, "", format!("{other:?}")),
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| from_csv(path, e))
}

const ZONE_COLUMNS: [&str; 6] = ["timestamp", "zone_id", "T_z", "T_a", "eta_solar", "q_ac"];

/// Writes one row per zone per sample, sample-major, in the order
/// `timestamp,zone_id,T_z,T_a,eta_solar,q_ac[,q_int]`.
pub fn write_zone_csv(path: &Path, set: &ZoneTraceSet) -> Result<()> {
    set.validate()?;
    let has_qint = set.zones[0].q_int.is_some();
    let mut w = writer(path)?;
    let mut header: Vec<&str> = ZONE_COLUMNS.to_vec();
    if has_qint {
        header.push("q_int");
    }
    w.write_record(&header).map_err(|e| from_csv(path, e))?;
    for k in 0..set.len() {
        let ts = format_timestamp(set.timestamp(k));
        for z in &set.zones {
            let mut rec = vec![
                ts.clone(),
                z.id.clone(),
                z.t_z[k].to_string(),
                z.t_a[k].to_string(),
                z.eta_solar[k].to_string(),
                z.q_ac[k].to_string(),
            ];
            if let Some(q) = &z.q_int {
                rec.push(q[k].to_string());
            }
            w.write_record(&rec).map_err(|e| from_csv(path, e))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn parse_cell(path: &Path, row: usize, column: &str, cell: Option<&str>) -> Result<f64> {
    let s = cell.map(str::trim).unwrap_or("");
    if s.is_empty() {
        return Err(csv_err(path, row, column, "empty cell"));
    }
    let v: f64 = s
        .parse()
        .map_err(|_| csv_err(path, row, column, format!("`{s}` is not a number")))?;
    if !v.is_finite() {
        return Err(csv_err(path, row, column, format!("non-finite value `{s}`")));
    }
    Ok(v)
}

/// Derives the sampling interval from consecutive timestamps and checks it is
/// constant and positive.
fn uniform_step(path: &Path, stamps: &[(NaiveDateTime, usize)]) -> Result<f64> {
    if stamps.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: stamps.len(),
        });
    }
    let step = (stamps[1].0 - stamps[0].0).num_milliseconds();
    if step <= 0 {
        return Err(csv_err(path, stamps[1].1, "timestamp", "timestamps must be strictly increasing"));
    }
    for pair in stamps.windows(2) {
        let d = (pair[1].0 - pair[0].0).num_milliseconds();
        if d != step {
            return Err(csv_err(
                path,
                pair[1].1,
                "timestamp",
                format!("non-uniform step: {d} ms after {step} ms"),
            ));
        }
    }
    Ok(step as f64 / 3_600_000.0)
}

/// Reads the long-format zone file written by [`write_zone_csv`]. The zones
/// are those listed at the first timestamp, in that order; every later
/// timestamp must list exactly the same zones.
pub fn read_zone_csv(path: &Path) -> Result<ZoneTraceSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| from_csv(path, e))?;
    let headers = rdr.headers().map_err(|e| from_csv(path, e))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let mut idx = HashMap::new();
    for name in ZONE_COLUMNS {
        let i = col(name).ok_or_else(|| csv_err(path, 1, name, "missing column"))?;
        idx.insert(name, i);
    }
    let qint_col = col("q_int");

    let mut zones: Vec<ZoneTrace> = Vec::new();
    let mut zone_pos: HashMap<String, usize> = HashMap::new();
    let mut stamps: Vec<(NaiveDateTime, usize)> = Vec::new();
    let mut seen_in_group: Vec<bool> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| from_csv(path, e))?;
        let ts_s = rec.get(idx["timestamp"]).unwrap_or("");
        let ts = parse_timestamp(ts_s)
            .ok_or_else(|| csv_err(path, row, "timestamp", format!("`{ts_s}` is not an ISO-8601 timestamp")))?;
        let id = rec.get(idx["zone_id"]).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(csv_err(path, row, "zone_id", "empty cell"));
        }
        let new_group = stamps.last().is_none_or(|(t, _)| *t != ts);
        if new_group {
            if let Some(&(prev, _)) = stamps.last() {
                if ts < prev {
                    return Err(csv_err(path, row, "timestamp", "timestamps must be non-decreasing"));
                }
                if let Some(j) = seen_in_group.iter().position(|s| !s) {
                    return Err(csv_err(
                        path,
                        row - 1,
                        "zone_id",
                        format!("zone `{}` missing at {}", zones[j].id, format_timestamp(prev)),
                    ));
                }
            }
            stamps.push((ts, row));
            seen_in_group = vec![false; zones.len()];
        }
        let first_group = stamps.len() == 1;
        let j = match zone_pos.get(&id) {
            Some(&j) => j,
            None if first_group => {
                zones.push(ZoneTrace {
                    id: id.clone(),
                    t_z: Vec::new(),
                    t_w: None,
                    t_a: Vec::new(),
                    eta_solar: Vec::new(),
                    q_ac: Vec::new(),
                    q_int: qint_col.map(|_| Vec::new()),
                });
                seen_in_group.push(false);
                zone_pos.insert(id.clone(), zones.len() - 1);
                zones.len() - 1
            }
            None => return Err(csv_err(path, row, "zone_id", format!("unknown zone `{id}`"))),
        };
        if seen_in_group[j] {
            return Err(csv_err(path, row, "zone_id", format!("zone `{id}` repeated at the same timestamp")));
        }
        seen_in_group[j] = true;
        let z = &mut zones[j];
        z.t_z.push(parse_cell(path, row, "T_z", rec.get(idx["T_z"]))?);
        z.t_a.push(parse_cell(path, row, "T_a", rec.get(idx["T_a"]))?);
        z.eta_solar.push(parse_cell(path, row, "eta_solar", rec.get(idx["eta_solar"]))?);
        z.q_ac.push(parse_cell(path, row, "q_ac", rec.get(idx["q_ac"]))?);
        if let (Some(c), Some(q)) = (qint_col, z.q_int.as_mut()) {
            q.push(parse_cell(path, row, "q_int", rec.get(c))?);
        }
    }
    if let Some(j) = seen_in_group.iter().position(|s| !s) {
        return Err(csv_err(
            path,
            stamps.last().map_or(1, |s| s.1),
            "zone_id",
            format!("zone `{}` missing at the last timestamp", zones[j].id),
        ));
    }
    let t_s = uniform_step(path, &stamps)?;
    ZoneTraceSet::new(stamps[0].0, t_s, zones)
}

/// A table of named columns on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnTable {
    pub start_time: NaiveDateTime,
    pub t_s: f64,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl ColumnTable {
    pub fn new(start_time: NaiveDateTime, t_s: f64) -> Self {
        Self {
            start_time,
            t_s,
            columns: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, values: Vec<f64>) -> &mut Self {
        self.columns.push((name.to_string(), values));
        self
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, |c| c.1.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn trace(&self, name: &str) -> Option<SignalTrace> {
        self.column(name).map(|v| SignalTrace {
            start_time: self.start_time,
            t_s: self.t_s,
            values: v.to_vec(),
        })
    }
}

/// Writes `timestamp` followed by the table's columns.
pub fn write_table(path: &Path, table: &ColumnTable) -> Result<()> {
    let n = table.len();
    if let Some((name, v)) = table.columns.iter().find(|(_, v)| v.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "column `{name}` has {} rows, expected {n}",
            v.len()
        )));
    }
    let mut w = writer(path)?;
    let mut header = vec!["timestamp".to_string()];
    header.extend(table.columns.iter().map(|(n, _)| n.clone()));
    w.write_record(&header).map_err(|e| from_csv(path, e))?;
    for k in 0..n {
        let mut rec = vec![format_timestamp(timestamp_at(table.start_time, table.t_s, k))];
        rec.extend(table.columns.iter().map(|(_, v)| v[k].to_string()));
        w.write_record(&rec).map_err(|e| from_csv(path, e))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a table written by [`write_table`]. Empty cells are rejected.
pub fn read_table(path: &Path) -> Result<ColumnTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| from_csv(path, e))?;
    let headers = rdr.headers().map_err(|e| from_csv(path, e))?.clone();
    if headers.get(0) != Some("timestamp") {
        return Err(csv_err(path, 1, "timestamp", "first column must be `timestamp`"));
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    let mut stamps = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| from_csv(path, e))?;
        let ts_s = rec.get(0).unwrap_or("");
        let ts = parse_timestamp(ts_s)
            .ok_or_else(|| csv_err(path, row, "timestamp", format!("`{ts_s}` is not an ISO-8601 timestamp")))?;
        stamps.push((ts, row));
        for (c, name) in names.iter().enumerate() {
            cols[c].push(parse_cell(path, row, name, rec.get(c + 1))?);
        }
    }
    let t_s = uniform_step(path, &stamps)?;
    Ok(ColumnTable {
        start_time: stamps[0].0,
        t_s,
        columns: names.into_iter().zip(cols).collect(),
    })
}

pub const AGGREGATE_COLUMNS: [&str; 6] = ["T_bar_z", "T_bar_a", "eta_bar_solar", "q_bar_ac", "q_bar_int", "T_bar_w"];

pub fn aggregate_table(data: &AggregateData) -> ColumnTable {
    let mut t = ColumnTable::new(data.start_time(), data.t_s());
    t.push("T_bar_z", data.t_bar_z.values.clone())
        .push("T_bar_a", data.t_bar_a.values.clone())
        .push("eta_bar_solar", data.eta_bar_solar.values.clone())
        .push("q_bar_ac", data.q_bar_ac.values.clone());
    if let Some(q) = &data.q_bar_int {
        t.push("q_bar_int", q.values.clone());
    }
    if let Some(w) = &data.t_bar_w {
        t.push("T_bar_w", w.values.clone());
    }
    t
}

/// Inverse of [`aggregate_table`]; `q_bar_int` and `T_bar_w` are optional.
pub fn aggregate_from_table(table: &ColumnTable, path: &Path) -> Result<AggregateData> {
    let need = |name: &str| table.trace(name).ok_or_else(|| csv_err(path, 1, name, "missing column"));
    let data = AggregateData {
        t_bar_z: need("T_bar_z")?,
        t_bar_a: need("T_bar_a")?,
        eta_bar_solar: need("eta_bar_solar")?,
        q_bar_ac: need("q_bar_ac")?,
        q_bar_int: table.trace("q_bar_int"),
        t_bar_w: table.trace("T_bar_w"),
    };
    data.validate()?;
    Ok(data)
}

/// `timestamp,T_bar_z,T_bar_w_hat,q_agg_hat,nu`, where `T_bar_z` is the
/// measured aggregate zone temperature.
pub fn write_results_csv(path: &Path, data: &AggregateData, result: &EstimationResult) -> Result<()> {
    let mut t = ColumnTable::new(data.start_time(), data.t_s());
    t.push("T_bar_z", data.t_bar_z.values.clone())
        .push("T_bar_w_hat", result.t_bar_w_hat.values.clone())
        .push("q_agg_hat", result.q_agg_hat.values.clone())
        .push("nu", result.nu_hat.clone());
    write_table(path, &t)
}

pub const PARAM_HEADER: [&str; 4] = ["Parameter", "Estimate", "True Value", "units"];

/// One row per aggregate parameter; the true-value cell is empty when unknown.
pub fn write_params_csv(path: &Path, estimate: &AggregateParams, truth: Option<&AggregateParams>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(PARAM_HEADER).map_err(|e| from_csv(path, e))?;
    let est = estimate.to_array();
    let tru = truth.map(AggregateParams::to_array);
    for i in 0..est.len() {
        let t = tru.map_or(String::new(), |t| t[i].to_string());
        w.write_record([
            AggregateParams::NAMES[i].to_string(),
            est[i].to_string(),
            t,
            AggregateParams::UNITS[i].to_string(),
        ])
        .map_err(|e| from_csv(path, e))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the estimate (and, if present, true value) columns of a parameter file.
pub fn read_params_csv(path: &Path) -> Result<(AggregateParams, Option<AggregateParams>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| from_csv(path, e))?;
    let headers = rdr.headers().map_err(|e| from_csv(path, e))?.clone();
    for (i, h) in PARAM_HEADER.iter().enumerate().take(3) {
        if headers.get(i) != Some(*h) {
            return Err(csv_err(path, 1, h, "unexpected header"));
        }
    }
    let mut est = [f64::NAN; 7];
    let mut tru = [f64::NAN; 7];
    let mut any_truth = true;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| from_csv(path, e))?;
        let name = rec.get(0).unwrap_or("");
        let p = AggregateParams::NAMES
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| csv_err(path, row, "Parameter", format!("unknown parameter `{name}`")))?;
        est[p] = parse_cell(path, row, "Estimate", rec.get(1))?;
        match rec.get(2).map(str::trim) {
            Some(s) if !s.is_empty() => tru[p] = parse_cell(path, row, "True Value", Some(s))?,
            _ => any_truth = false,
        }
    }
    if let Some(p) = est.iter().position(|v| v.is_nan()) {
        return Err(csv_err(path, 0, "Parameter", format!("missing `{}`", AggregateParams::NAMES[p])));
    }
    let truth = (any_truth && tru.iter().all(|v| !v.is_nan())).then(|| AggregateParams::from_array(tru));
    Ok((AggregateParams::from_array(est), truth))
}

/// Writes `text` with a trailing newline.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path)?;
    f.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        f.write_all(b"\n")?;
    }
    Ok(())
}

