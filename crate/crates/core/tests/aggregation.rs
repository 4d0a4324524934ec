use aggtherm::aggregation::{
    aggregate_params, aggregation_errors, average_signals, deviation_signals, reconstruct_average_dynamics,
};
use aggtherm::scenarios::{generate, ground_truth, ScenarioSpec, NOMINAL_ZONE};
use aggtherm::thermal::{BuildingModel, InteractionMatrix, ZoneParams};
use aggtherm::trace::{SignalKind, ZoneTrace, ZoneTraceSet};
use chrono::NaiveDate;
use proptest::prelude::*;

fn zp(r_za: f64, c_z: f64, r_zw: f64, c_w: f64, r_wa: f64, a_z: f64, a_w: f64) -> ZoneParams {
    ZoneParams::new(r_za, c_z, r_zw, c_w, r_wa, a_z, a_w).unwrap()
}

#[test]
fn two_zone_aggregates_by_hand() {
    let m = BuildingModel::independent(vec![
        zp(1.0, 1.0, 0.5, 2.0, 4.0, 0.2, 8.0),
        zp(2.0, 3.0, 1.0, 6.0, 2.0, 0.6, 12.0),
    ])
    .unwrap();
    let p = aggregate_params(&m);
    // τ_za = 1 and 6 h, τ_zw = 0.5 and 3 h, τ_wa = 8 and 12 h, τ_wz = 1 and 6 h.
    let h = |a: f64, b: f64| 2.0 / (1.0 / a + 1.0 / b);
    assert!((p.tau_za - h(1.0, 6.0)).abs() < 1e-15);
    assert!((p.tau_zw - h(0.5, 3.0)).abs() < 1e-15);
    assert!((p.tau_wa - h(8.0, 12.0)).abs() < 1e-15);
    assert!((p.tau_wz - h(1.0, 6.0)).abs() < 1e-15);
    assert!((p.c_z - 1.5).abs() < 1e-15);
    assert!((p.a_z - (0.2 + 0.2) / 2.0).abs() < 1e-15);
    assert!((p.a_w - (4.0 + 2.0) / 2.0).abs() < 1e-15);
}

/// Mean over zones of each zone's own right-hand side, written out from the
/// resistances and capacitances, including partition flows.
fn mean_zone_dynamics(model: &BuildingModel, set: &ZoneTraceSet, k: usize) -> (f64, f64) {
    let n = model.n_zones();
    let (mut dz, mut dw) = (0.0, 0.0);
    for (j, p) in model.zones().iter().enumerate() {
        let z = &set.zones[j];
        let (tz, tw, ta) = (z.t_z[k], z.t_w.as_ref().unwrap()[k], z.t_a[k]);
        let q = z.q_int.as_ref().unwrap()[k] - z.q_ac[k];
        let eta = z.eta_solar[k];
        let mut flow = (ta - tz) / p.r_za + (tw - tz) / p.r_zw + q + p.a_z * eta;
        if let Some(m) = model.interaction() {
            for i in 0..n {
                if i != j {
                    flow += (set.zones[i].t_z[k] - tz) * m.conductance(i, j);
                }
            }
        }
        dz += flow / p.c_z;
        dw += ((ta - tw) / p.r_wa + (tz - tw) / p.r_zw + p.a_w * eta) / p.c_w;
    }
    (dz / n as f64, dw / n as f64)
}

fn assert_identity(model: &BuildingModel, set: &ZoneTraceSet, tol: f64) {
    let truth = ground_truth(model, set).unwrap();
    let avg = reconstruct_average_dynamics(&truth.params, &truth.aggregate, &truth.errors).unwrap();
    for k in 0..set.len() {
        let (ez, ew) = mean_zone_dynamics(model, set, k);
        let rz = (avg.d_t_bar_z[k] - ez).abs() / ez.abs().max(1e-3);
        let rw = (avg.d_t_bar_w[k] - ew).abs() / ew.abs().max(1e-3);
        assert!(rz <= tol && rw <= tol, "sample {k}: {rz:e} {rw:e}");
    }
}

#[test]
fn identity_holds_with_unequal_interacting_zones() {
    let zones = vec![
        zp(1.0, 0.5, 0.8, 3.0, 5.0, 0.4, 15.0),
        zp(1.3, 0.9, 0.7, 3.5, 6.0, 0.3, 14.0),
        zp(0.9, 1.2, 0.9, 2.8, 5.5, 0.5, 16.0),
    ];
    let m = InteractionMatrix::new(vec![
        vec![None, Some(2.0), Some(4.0)],
        vec![Some(2.0), None, None],
        vec![Some(4.0), None, None],
    ])
    .unwrap();
    let mut spec = ScenarioSpec::open_loop_default(3).unwrap();
    spec.building = BuildingModel::new(zones, Some(m)).unwrap();
    spec.days = 1.0;
    let sc = generate(&spec).unwrap();
    assert_identity(&spec.building, &sc.traces, 1e-10);
}

#[test]
fn identical_zones_and_inputs_give_no_aggregation_error() {
    let mut spec = ScenarioSpec::open_loop_default(5).unwrap();
    spec.building = BuildingModel::independent(vec![NOMINAL_ZONE; 4]).unwrap();
    spec.asynchronicity.level = 0.0;
    spec.days = 1.0;
    let sc = generate(&spec).unwrap();
    let e = &sc.truth.errors;
    assert!(e.w_tilde_z.values.iter().all(|v| *v == 0.0));
    assert!(e.w_tilde_w.values.iter().all(|v| *v == 0.0));
    assert_eq!(&e.q_bar_agg.values, &sc.truth.aggregate.q_bar_int.as_ref().unwrap().values);
    let p = &sc.truth.params;
    assert!((p.c_z - NOMINAL_ZONE.c_z).abs() < 1e-15);
    assert!((p.tau_za - NOMINAL_ZONE.tau_za()).abs() < 1e-14);
}

#[test]
fn errors_need_simulation_signals() {
    let sc = generate(&ScenarioSpec {
        days: 0.5,
        ..ScenarioSpec::open_loop_default(2).unwrap()
    })
    .unwrap();
    let mut set = sc.traces.clone();
    for z in &mut set.zones {
        z.t_w = None;
    }
    let data = average_signals(&set).unwrap();
    let dev = deviation_signals(&set, &data).unwrap();
    assert!(data.t_bar_w.is_none() && dev.t_w.is_none());
    let building = ScenarioSpec::open_loop_default(2).unwrap().building;
    assert!(aggregation_errors(&building, &set, &dev).is_err());
}

fn zone_set(values: Vec<Vec<[f64; 4]>>) -> ZoneTraceSet {
    let start = NaiveDate::from_ymd_opt(2021, 6, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let zones = values
        .into_iter()
        .enumerate()
        .map(|(j, rows)| ZoneTrace {
            id: format!("z{j}"),
            t_z: rows.iter().map(|r| r[0]).collect(),
            t_w: None,
            t_a: rows.iter().map(|r| r[1]).collect(),
            eta_solar: rows.iter().map(|r| r[2]).collect(),
            q_ac: rows.iter().map(|r| r[3]).collect(),
            q_int: None,
        })
        .collect();
    ZoneTraceSet::new(start, 0.25, zones).unwrap()
}

fn zone_sets() -> impl Strategy<Value = ZoneTraceSet> {
    (1usize..8, 1usize..30).prop_flat_map(|(n_z, n)| {
        prop::collection::vec(
            prop::collection::vec(
                (10.0..40.0f64, -10.0..45.0f64, 0.0..1.0f64, 0.0..20.0f64).prop_map(|(a, b, c, d)| [a, b, c, d]),
                n,
            ),
            n_z,
        )
        .prop_map(zone_set)
    })
}

proptest! {
    #[test]
    fn deviations_have_zero_mean(set in zone_sets()) {
        let data = average_signals(&set).unwrap();
        let dev = deviation_signals(&set, &data).unwrap();
        for kind in [SignalKind::Tz, SignalKind::Ta, SignalKind::EtaSolar, SignalKind::Qac] {
            let tildes = dev.kind(kind).unwrap();
            let scale = set.signals(kind).unwrap().iter().flat_map(|s| s.iter()).fold(1.0f64, |m, v| m.max(v.abs()));
            for k in 0..set.len() {
                let mu: f64 = tildes.iter().map(|t| t[k]).sum::<f64>() / tildes.len() as f64;
                prop_assert!(mu.abs() <= 1e-15 * scale * 4.0, "kind {:?} k {} mu {}", kind, k, mu);
            }
        }
    }

    #[test]
    fn average_plus_deviation_restores_signal(set in zone_sets()) {
        let data = average_signals(&set).unwrap();
        let dev = deviation_signals(&set, &data).unwrap();
        for (j, z) in set.zones.iter().enumerate() {
            for k in 0..set.len() {
                prop_assert!((data.t_bar_z.values[k] + dev.t_z[j][k] - z.t_z[k]).abs() < 1e-12);
            }
        }
    }
}
