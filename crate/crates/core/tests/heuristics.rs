use aggtherm::heuristics::{
    block_means, day_night_means, sample_mean, sample_variance, sample_variance_about_mean, sliding_mean, spearman,
    variance_report, IndexScaling, ReportOptions,
};
use aggtherm::scenarios::{generate, ScenarioSpec};
use aggtherm::trace::SignalKind;
use chrono::NaiveDate;
use proptest::prelude::*;

fn centered(rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = rows[0].len();
    let m: Vec<f64> = (0..n).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / rows.len() as f64).collect();
    rows.into_iter().map(|r| r.iter().zip(&m).map(|(a, b)| a - b).collect()).collect()
}

fn rectangular() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..7, 1usize..20)
        .prop_flat_map(|(nz, n)| prop::collection::vec(prop::collection::vec(-50.0..50.0f64, n), nz))
}

proptest! {
    #[test]
    fn variance_is_non_negative_and_matches_general_form(rows in rectangular()) {
        let t = centered(rows);
        let v = sample_variance(&t).unwrap().unwrap();
        let g = sample_variance_about_mean(&t).unwrap().unwrap();
        for (a, b) in v.iter().zip(&g) {
            prop_assert!(*a >= 0.0);
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
        for m in sample_mean(&t).unwrap() {
            prop_assert!(m.abs() < 1e-12);
        }
    }

    #[test]
    fn spearman_is_bounded_and_rank_based(
        pairs in prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64), 2..40),
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        if let Some(r) = spearman(&x, &y) {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
            // Strictly increasing transforms leave ranks unchanged.
            let xe: Vec<f64> = x.iter().map(|v| (v / 50.0).exp()).collect();
            let y3: Vec<f64> = y.iter().map(|v| v * v * v).collect();
            let r2 = spearman(&xe, &y3).unwrap();
            prop_assert!((r - r2).abs() < 1e-12);
            prop_assert!((spearman(&y, &x).unwrap() - r).abs() < 1e-12);
        }
    }

    #[test]
    fn sliding_mean_preserves_constants_and_bounds(
        x in prop::collection::vec(-10.0..10.0f64, 1..50), w in 1usize..12, c in -5.0..5.0f64,
    ) {
        let s = sliding_mean(&x, w);
        prop_assert_eq!(s.len(), x.len());
        let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for v in &s {
            prop_assert!(*v >= lo - 1e-9 && *v <= hi + 1e-9);
        }
        for v in sliding_mean(&vec![c; x.len()], w) {
            prop_assert!((v - c).abs() < 1e-12);
        }
        let b = block_means(&x, w);
        prop_assert_eq!(b.len(), x.len().div_ceil(w));
    }
}

#[test]
fn day_night_split_by_clock_hour() {
    let start = NaiveDate::from_ymd_opt(2020, 3, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let v: Vec<f64> = (0..24).map(|h| if (8..18).contains(&h) { 2.0 } else { 1.0 }).collect();
    assert_eq!(day_night_means(&v, start, 1.0, (8.0, 18.0)), (Some(2.0), Some(1.0)));
    assert_eq!(day_night_means(&v[..5], start, 1.0, (8.0, 18.0)), (None, Some(1.0)));
}

#[test]
fn single_zone_report_is_undefined() {
    let mut spec = ScenarioSpec::open_loop_default(1).unwrap();
    spec.building = aggtherm::thermal::BuildingModel::independent(vec![spec.building.zones()[0]]).unwrap();
    spec.days = 0.5;
    let sc = generate(&spec).unwrap();
    let r = variance_report(&sc.traces, &ReportOptions::default()).unwrap();
    assert!(r.traces.iter().all(|t| !t.available()));
    assert!(r.index.is_none());
}

#[test]
fn missing_signal_kind_is_unavailable_not_an_error() {
    let sc = generate(&ScenarioSpec {
        days: 0.5,
        ..ScenarioSpec::open_loop_default(1).unwrap()
    })
    .unwrap();
    let mut set = sc.traces.clone();
    for z in &mut set.zones {
        z.q_int = None;
    }
    let opts = ReportOptions {
        kinds: vec![SignalKind::Qint, SignalKind::Tz],
        ..ReportOptions::default()
    };
    let r = variance_report(&set, &opts).unwrap();
    assert!(!r.trace(SignalKind::Qint).unwrap().available());
    assert!(r.trace(SignalKind::Tz).unwrap().available());
    assert!(r.index.is_some());
}

#[test]
fn index_scaling() {
    let mut spec = ScenarioSpec::closed_loop_default(2).unwrap();
    spec.days = 1.0;
    let sc = generate(&spec).unwrap();
    let own = variance_report(&sc.traces, &ReportOptions::default()).unwrap();
    let ix = own.index.as_ref().unwrap();
    let peak = ix.iter().cloned().fold(0.0, f64::max);
    assert!(peak <= 2.0 + 1e-12 && peak > 0.0);

    let wz = own.trace(SignalKind::Tz).unwrap().windowed.clone().unwrap();
    let wq = own.trace(SignalKind::Qac).unwrap().windowed.clone().unwrap();
    let fixed = ReportOptions {
        scaling: IndexScaling::Fixed(vec![(SignalKind::Tz, 2.0), (SignalKind::Qac, 8.0)]),
        ..ReportOptions::default()
    };
    let r = variance_report(&sc.traces, &fixed).unwrap();
    for (k, v) in r.index.unwrap().iter().enumerate() {
        assert!((v - (wz[k] / 2.0 + wq[k] / 8.0)).abs() < 1e-12);
    }
    let missing = ReportOptions {
        scaling: IndexScaling::Fixed(vec![(SignalKind::Tz, 2.0)]),
        ..ReportOptions::default()
    };
    assert!(variance_report(&sc.traces, &missing).is_err());
    let bad = ReportOptions {
        window_hours: 0.0,
        ..ReportOptions::default()
    };
    assert!(variance_report(&sc.traces, &bad).is_err());
}

#[test]
fn cooling_variance_is_larger_by_day_in_closed_loop() {
    let sc = generate(&ScenarioSpec::closed_loop_default(3).unwrap()).unwrap();
    let r = variance_report(&sc.traces, &ReportOptions::default()).unwrap();
    let v = r.trace(SignalKind::Qac).unwrap().variance.clone().unwrap();
    let (day, night) = day_night_means(&v, r.start_time, r.t_s, (8.0, 18.0));
    assert!(day.unwrap() > 2.0 * night.unwrap());
}
