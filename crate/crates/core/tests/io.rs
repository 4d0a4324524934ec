use std::path::Path;

use aggtherm::aggregation::AggregateParams;
use aggtherm::config::KeyValueConfig;
use aggtherm::io::{
    aggregate_from_table, aggregate_table, read_params_csv, read_table, read_zone_csv, write_params_csv,
    write_table, write_zone_csv, ColumnTable,
};
use aggtherm::scenarios::{generate, ScenarioSpec};
use aggtherm::trace::{ZoneTrace, ZoneTraceSet};
use aggtherm::Error;
use chrono::NaiveDate;
use proptest::prelude::*;
use tempfile::tempdir;

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn csv_error(e: Error) -> (usize, String, String) {
    match e {
        Error::Csv {
            row, column, reason, ..
        } => (row, column, reason),
        other => panic!("expected a CSV error, got {other:?}"),
    }
}

#[test]
fn scenario_zone_file_round_trips_bit_for_bit() {
    let sc = generate(&ScenarioSpec {
        days: 0.5,
        ..ScenarioSpec::open_loop_default(8).unwrap()
    })
    .unwrap();
    let dir = tempdir().unwrap();
    let p = dir.path().join("zones.csv");
    let mut set = sc.traces.clone();
    for z in &mut set.zones {
        z.t_w = None;
    }
    write_zone_csv(&p, &set).unwrap();
    let back = read_zone_csv(&p).unwrap();
    assert_eq!(back, set);
}

fn any_finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6..1e6f64,
        (-300i32..300, 1.0..10.0f64).prop_map(|(e, m)| m * 10f64.powi(e)),
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn table_round_trip_is_exact(values in prop::collection::vec((any_finite(), any_finite()), 2..30)) {
        let start = NaiveDate::from_ymd_opt(2019, 7, 4).unwrap().and_hms_opt(13, 30, 0).unwrap();
        let mut t = ColumnTable::new(start, 0.25);
        t.push("a", values.iter().map(|v| v.0).collect())
            .push("b", values.iter().map(|v| v.1).collect());
        let dir = tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_table(&p, &t).unwrap();
        let back = read_table(&p).unwrap();
        prop_assert_eq!(back.start_time, t.start_time);
        prop_assert_eq!(back.t_s, t.t_s);
        for ((_, x), (_, y)) in t.columns.iter().zip(&back.columns) {
            for (a, b) in x.iter().zip(y) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn zone_round_trip_is_exact(
        rows in prop::collection::vec(prop::collection::vec((any_finite(), 0.0..1e3f64), 3), 2..10),
    ) {
        let start = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        let zones = (0..3).map(|j| ZoneTrace {
            id: format!("room {j}"),
            t_z: rows.iter().map(|r| r[j].0).collect(),
            t_w: None,
            t_a: rows.iter().map(|r| -r[j].0).collect(),
            eta_solar: rows.iter().map(|r| r[j].1).collect(),
            q_ac: rows.iter().map(|r| r[j].1 * 3.0).collect(),
            q_int: Some(rows.iter().map(|r| r[j].1 / 7.0).collect()),
        }).collect();
        let set = ZoneTraceSet::new(start, 1.0 / 12.0, zones).unwrap();
        let dir = tempdir().unwrap();
        let p = dir.path().join("z.csv");
        write_zone_csv(&p, &set).unwrap();
        prop_assert_eq!(read_zone_csv(&p).unwrap(), set);
    }
}

#[test]
fn aggregate_table_round_trip() {
    let sc = generate(&ScenarioSpec {
        days: 0.25,
        ..ScenarioSpec::open_loop_default(8).unwrap()
    })
    .unwrap();
    let dir = tempdir().unwrap();
    let p = dir.path().join("agg.csv");
    write_table(&p, &aggregate_table(&sc.truth.aggregate)).unwrap();
    let back = aggregate_from_table(&read_table(&p).unwrap(), &p).unwrap();
    assert_eq!(back, sc.truth.aggregate);
}

#[test]
fn params_round_trip_with_and_without_truth() {
    let est = AggregateParams::from_array([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 1.0 / 3.0]);
    let tru = AggregateParams::from_array([1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7]);
    let dir = tempdir().unwrap();
    let p = dir.path().join("p.csv");
    write_params_csv(&p, &est, Some(&tru)).unwrap();
    assert_eq!(read_params_csv(&p).unwrap(), (est, Some(tru)));
    write_params_csv(&p, &est, None).unwrap();
    assert_eq!(read_params_csv(&p).unwrap(), (est, None));
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(text.starts_with("Parameter,Estimate,True Value,units\n"));
}

const HEADER: &str = "timestamp,zone_id,T_z,T_a,eta_solar,q_ac\n";

#[test]
fn malformed_zone_files_name_row_and_column() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    let ok_rows = "2020-01-01T00:00:00,a,24,30,0,1\n2020-01-01T00:00:00,b,25,30,0,1\n";

    write(&p, &format!("{HEADER}{ok_rows}2020-01-01T00:05:00,a,24,30,0,1\n2020-01-01T00:05:00,b,,30,0,1\n"));
    let (row, col, reason) = csv_error(read_zone_csv(&p).unwrap_err());
    assert_eq!((row, col.as_str()), (5, "T_z"));
    assert!(reason.contains("empty"));

    write(&p, &format!("{HEADER}{ok_rows}2020-01-01T00:05:00,a,24,30,0,1\n2020-01-01T00:05:00,c,24,30,0,1\n"));
    let (row, col, reason) = csv_error(read_zone_csv(&p).unwrap_err());
    assert_eq!((row, col.as_str()), (5, "zone_id"));
    assert!(reason.contains("unknown zone"));

    write(
        &p,
        &format!(
            "{HEADER}{ok_rows}2020-01-01T00:05:00,a,24,30,0,1\n2020-01-01T00:05:00,b,24,30,0,1\n\
             2020-01-01T00:15:00,a,24,30,0,1\n2020-01-01T00:15:00,b,24,30,0,1\n"
        ),
    );
    let (row, col, reason) = csv_error(read_zone_csv(&p).unwrap_err());
    assert_eq!((row, col.as_str()), (6, "timestamp"));
    assert!(reason.contains("non-uniform"));

    write(&p, &format!("{HEADER}{ok_rows}2020-01-01T00:05:00,a,24,NaN,0,1\n2020-01-01T00:05:00,b,24,30,0,1\n"));
    let (row, col, _) = csv_error(read_zone_csv(&p).unwrap_err());
    assert_eq!((row, col.as_str()), (4, "T_a"));

    write(&p, &format!("{HEADER}{ok_rows}2020-01-01 noon,a,24,30,0,1\n"));
    let (row, col, _) = csv_error(read_zone_csv(&p).unwrap_err());
    assert_eq!((row, col.as_str()), (4, "timestamp"));

    write(&p, &format!("{HEADER}{ok_rows}2020-01-01T00:05:00,a,24,30,0,1\n"));
    let (_, col, reason) = csv_error(read_zone_csv(&p).unwrap_err());
    assert_eq!(col, "zone_id");
    assert!(reason.contains("missing"), "{reason}");

    write(&p, "timestamp,zone_id,T_z,T_a,q_ac\n2020-01-01T00:00:00,a,1,2,3\n");
    let (row, col, reason) = csv_error(read_zone_csv(&p).unwrap_err());
    assert_eq!((row, col.as_str(), reason.as_str()), (1, "eta_solar", "missing column"));

    write(&p, &format!("{HEADER}{ok_rows}2020-01-01T00:05:00,a,24,30,0,-1\n2020-01-01T00:05:00,b,24,30,0,1\n"));
    assert!(read_zone_csv(&p).is_err());

    write(&p, &format!("{HEADER}{ok_rows}"));
    assert!(matches!(read_zone_csv(&p).unwrap_err(), Error::TooFewSamples { .. }));
}

#[test]
fn config_file_round_trip_through_echo() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("run.cfg");
    write(&p, "# weights\nident.lambda = 0.3\nident.alpha=1e-4\nsolver.inner = lbfgs\n");
    let c = KeyValueConfig::from_file(&p).unwrap();
    assert_eq!(c.get("ident.lambda", 10.0).unwrap(), 0.3);
    assert_eq!(c.get("ident.alpha", 1e-3).unwrap(), 1e-4);
    assert_eq!(c.get("solver.inner", "newton".to_string()).unwrap(), "lbfgs");
    assert_eq!(c.get("ident.r", 0.01).unwrap(), 0.01);
    c.check_unused().unwrap();
    let echo = c.effective();
    let again = KeyValueConfig::parse(&echo, "echo").unwrap();
    for (key, v) in [("ident.lambda", 0.3), ("ident.alpha", 1e-4), ("ident.r", 0.01)] {
        assert_eq!(again.get(key, f64::NAN).unwrap(), v);
    }
    let bad = KeyValueConfig::parse("x = 1\ny = two\n", "bad.cfg").unwrap();
    let e = bad.get("y", 0.0).unwrap_err();
    assert!(matches!(&e, Error::Config { location, .. } if location.starts_with("bad.cfg:2")), "{e}");
}
