use aggtherm::thermal::{
    building_derivative, simulate, zone_derivative, BuildingModel, InteractionMatrix, ZoneInputTraces, ZoneInputs,
    ZoneParams, ZoneState,
};
use aggtherm::trace::SignalTrace;
use chrono::NaiveDate;
use proptest::prelude::*;

fn zone() -> ZoneParams {
    ZoneParams::new(1.11, 0.71, 0.826, 3.44, 5.63, 0.405, 15.67).unwrap()
}

/// Heat balance written as flows (kW) into each capacitance.
fn balance(p: &ZoneParams, s: &ZoneState, u: &ZoneInputs) -> (f64, f64) {
    let air_to_amb = (s.t_z - u.t_a) / p.r_za;
    let air_to_wall = (s.t_z - s.t_w) / p.r_zw;
    let wall_to_amb = (s.t_w - u.t_a) / p.r_wa;
    let into_air = -air_to_amb - air_to_wall + u.q_int - u.q_ac + p.a_z * u.eta_solar;
    let into_wall = air_to_wall - wall_to_amb + p.a_w * u.eta_solar;
    (into_air / p.c_z, into_wall / p.c_w)
}

fn params_strategy() -> impl Strategy<Value = ZoneParams> {
    (0.1..5.0, 0.1..5.0, 0.1..5.0, 0.5..20.0, 0.5..20.0, 0.0..2.0, 0.0..30.0)
        .prop_map(|(a, b, c, d, e, f, g)| ZoneParams::new(a, b, c, d, e, f, g).unwrap())
}

proptest! {
    #[test]
    fn derivative_matches_heat_balance(
        p in params_strategy(),
        t_z in 10.0..40.0f64, t_w in 10.0..40.0f64, t_a in 0.0..45.0f64,
        eta in 0.0..1.0f64, q_ac in 0.0..10.0f64, q_int in 0.0..5.0f64,
    ) {
        let s = ZoneState { t_z, t_w };
        let u = ZoneInputs::new(t_a, eta, q_ac, q_int).unwrap();
        let d = zone_derivative(&s, &u, &p).unwrap();
        let (ez, ew) = balance(&p, &s, &u);
        prop_assert!((d.d_t_z - ez).abs() <= 1e-12 * (1.0 + ez.abs()));
        prop_assert!((d.d_t_w - ew).abs() <= 1e-12 * (1.0 + ew.abs()));
    }

    #[test]
    fn interaction_flows_conserve_heat(
        t in prop::collection::vec(15.0..35.0f64, 3),
        g in prop::collection::vec(0.1..3.0f64, 3),
    ) {
        // Heat leaving one zone through a partition enters the other, so the
        // capacitance-weighted sum of interaction terms vanishes.
        let zones = vec![
            ZoneParams::new(1.0, 0.5, 0.8, 3.0, 5.0, 0.4, 15.0).unwrap(),
            ZoneParams::new(1.2, 0.9, 0.8, 3.0, 5.0, 0.4, 15.0).unwrap(),
            ZoneParams::new(0.9, 1.4, 0.8, 3.0, 5.0, 0.4, 15.0).unwrap(),
        ];
        let r = |x: f64| Some(1.0 / x);
        let m = InteractionMatrix::new(vec![
            vec![None, r(g[0]), r(g[1])],
            vec![r(g[0]), None, r(g[2])],
            vec![r(g[1]), r(g[2]), None],
        ]).unwrap();
        let with = BuildingModel::new(zones.clone(), Some(m)).unwrap();
        let without = BuildingModel::independent(zones.clone()).unwrap();
        let states: Vec<_> = t.iter().map(|&t_z| ZoneState { t_z, t_w: 25.0 }).collect();
        let inputs = vec![ZoneInputs::new(30.0, 0.2, 1.0, 0.5).unwrap(); 3];
        let a = building_derivative(&states, &inputs, &with).unwrap();
        let b = building_derivative(&states, &inputs, &without).unwrap();
        let net: f64 = (0..3).map(|j| zones[j].c_z * (a[j].d_t_z - b[j].d_t_z)).sum();
        prop_assert!(net.abs() < 1e-10);
        for j in 0..3 {
            prop_assert_eq!(a[j].d_t_w, b[j].d_t_w);
        }
    }
}

fn rk4(p: &ZoneParams, s: ZoneState, u: &ZoneInputs, h: f64) -> ZoneState {
    let f = |s: ZoneState| balance(p, &s, u);
    let add = |s: ZoneState, d: (f64, f64), c: f64| ZoneState {
        t_z: s.t_z + c * d.0,
        t_w: s.t_w + c * d.1,
    };
    let k1 = f(s);
    let k2 = f(add(s, k1, h / 2.0));
    let k3 = f(add(s, k2, h / 2.0));
    let k4 = f(add(s, k3, h));
    ZoneState {
        t_z: s.t_z + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        t_w: s.t_w + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    }
}

fn constant_inputs(u: &ZoneInputs, t_s: f64, n: usize) -> ZoneInputTraces {
    let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let tr = |v: f64| SignalTrace::new(start, t_s, vec![v; n]).unwrap();
    ZoneInputTraces {
        t_a: tr(u.t_a),
        eta_solar: tr(u.eta_solar),
        q_ac: tr(u.q_ac),
        q_int: tr(u.q_int),
    }
}

/// Simulated zone temperature after `hours` at step `t_s`.
fn euler_end(p: &ZoneParams, x0: ZoneState, u: &ZoneInputs, t_s: f64, hours: f64) -> f64 {
    let n = (hours / t_s).round() as usize + 1;
    let model = BuildingModel::independent(vec![*p]).unwrap();
    let tr = simulate(&model, &[constant_inputs(u, t_s, n)], &[x0], t_s, n).unwrap();
    tr.zones[0].t_z[n - 1]
}

#[test]
fn euler_converges_first_order_to_rk4_reference() {
    let p = zone();
    let u = ZoneInputs::new(32.0, 0.3, 2.0, 1.0).unwrap();
    let x0 = ZoneState { t_z: 22.0, t_w: 26.0 };
    let hours: f64 = 3.0;
    let mut s = x0;
    let h = 1e-3;
    for _ in 0..(hours / h).round() as usize {
        s = rk4(&p, s, &u, h);
    }
    let e1 = (euler_end(&p, x0, &u, 0.02, hours) - s.t_z).abs();
    let e2 = (euler_end(&p, x0, &u, 0.01, hours) - s.t_z).abs();
    let e3 = (euler_end(&p, x0, &u, 0.005, hours) - s.t_z).abs();
    assert!(e1 > e2 && e2 > e3, "{e1} {e2} {e3}");
    for ratio in [e1 / e2, e2 / e3] {
        assert!((ratio - 2.0).abs() < 0.15, "ratio {ratio}");
    }
}

#[test]
fn long_run_settles_at_steady_state() {
    let p = zone();
    let u = ZoneInputs::new(30.0, 0.2, 3.0, 1.0).unwrap();
    // Steady state solves the 2x2 conductance system by Cramer's rule.
    let (g_a, g_w, g_wa) = (1.0 / p.r_za, 1.0 / p.r_zw, 1.0 / p.r_wa);
    let b_z = g_a * u.t_a + u.q_int - u.q_ac + p.a_z * u.eta_solar;
    let b_w = g_wa * u.t_a + p.a_w * u.eta_solar;
    let (a11, a12, a21, a22) = (g_a + g_w, -g_w, -g_w, g_w + g_wa);
    let det = a11 * a22 - a12 * a21;
    let t_z = (b_z * a22 - a12 * b_w) / det;
    let end = euler_end(&p, ZoneState { t_z: 20.0, t_w: 20.0 }, &u, 1.0 / 12.0, 400.0);
    assert!((end - t_z).abs() < 1e-9, "{end} vs {t_z}");
}

#[test]
fn equilibrium_without_drive() {
    let p = zone();
    let u = ZoneInputs::new(25.0, 0.0, 0.0, 0.0).unwrap();
    let end = euler_end(&p, ZoneState { t_z: 25.0, t_w: 25.0 }, &u, 0.25, 24.0);
    assert_eq!(end, 25.0);
}

#[test]
fn simulate_rejects_mismatched_inputs() {
    let p = zone();
    let u = ZoneInputs::new(25.0, 0.0, 0.0, 0.0).unwrap();
    let model = BuildingModel::independent(vec![p, p]).unwrap();
    let x0 = ZoneState { t_z: 25.0, t_w: 25.0 };
    let one = constant_inputs(&u, 0.25, 10);
    assert!(simulate(&model, std::slice::from_ref(&one), &[x0, x0], 0.25, 10).is_err());
    assert!(simulate(&model, &[one.clone(), one.clone()], &[x0, x0], 0.5, 10).is_err());
    assert!(simulate(&model, &[one.clone(), one], &[x0, x0], 0.25, 11).is_err());
}
