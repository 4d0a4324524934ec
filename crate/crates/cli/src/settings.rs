//! Maps configuration keys onto library structs.

use aggtherm::aggregation::AggregateParams;
use aggtherm::config::KeyValueConfig;
use aggtherm::estimation::{Bounds, IdentConfig, InnerSolver, MultiStart, N_THETA};
use aggtherm::heuristics::ReportOptions;
use aggtherm::io::parse_timestamp;
use aggtherm::scenarios::{
    perturbed_building, DeadbandSpec, HvacSpec, OpenLoopProfile, ScenarioSpec, Spread, NOMINAL_ZONE,
};
use aggtherm::trace::SignalKind;
use aggtherm::Result;

pub fn scenario(cfg: &KeyValueConfig, seed: u64) -> Result<ScenarioSpec> {
    let kind = cfg.get("scenario.kind", "open-loop".to_string())?;
    let mut spec = match kind.as_str() {
        "open-loop" => ScenarioSpec::open_loop_default(seed)?,
        "closed-loop" => ScenarioSpec::closed_loop_default(seed)?,
        other => {
            return Err(cfg.error(
                "scenario.kind",
                format!("expected `open-loop` or `closed-loop`, got `{other}`"),
            ))
        }
    };
    let closed = kind == "closed-loop";
    let default_air = if closed { 0.2 } else { 0.4 };
    let zones = cfg.get("scenario.zones", 5usize)?;
    let spread = Spread {
        air: cfg.get("scenario.spread.air", default_air)?,
        wall: cfg.get("scenario.spread.wall", 0.1)?,
    };
    spec.building = perturbed_building(&NOMINAL_ZONE, zones, spread, seed)?;
    spec.days = cfg.get("scenario.days", spec.days)?;
    spec.t_s = cfg.get("scenario.step_minutes", spec.t_s * 60.0)? / 60.0;
    if let Some(s) = cfg.get_str("scenario.start") {
        spec.start_time =
            parse_timestamp(&s).ok_or_else(|| cfg.error("scenario.start", format!("`{s}` is not a timestamp")))?;
    }
    spec.asynchronicity.level = cfg.get("scenario.asynchronicity", spec.asynchronicity.level)?;
    spec.asynchronicity.solar_shift = cfg.get("scenario.solar_shift", spec.asynchronicity.solar_shift)?;
    spec.asynchronicity.solar_amplitude =
        cfg.get("scenario.solar_amplitude", spec.asynchronicity.solar_amplitude)?;
    spec.weather.mean = cfg.get("weather.mean", spec.weather.mean)?;
    spec.weather.amplitude = cfg.get("weather.amplitude", spec.weather.amplitude)?;
    spec.solar.peak = cfg.get("solar.peak", spec.solar.peak)?;
    match &mut spec.hvac {
        HvacSpec::OpenLoop {
            profile: OpenLoopProfile::Prbs { low, high, hold },
            ..
        } => {
            *low = cfg.get("hvac.prbs.low", *low)?;
            *high = cfg.get("hvac.prbs.high", *high)?;
            *hold = cfg.get("hvac.prbs.hold", *hold)?;
        }
        HvacSpec::Deadband(DeadbandSpec {
            setpoint,
            delta,
            capacity,
            shutoff,
        }) => {
            *setpoint = cfg.get("hvac.setpoint", *setpoint)?;
            *delta = cfg.get("hvac.delta", *delta)?;
            *capacity = cfg.get("hvac.capacity", *capacity)?;
            if !cfg.get("hvac.night_shutoff", shutoff.is_some())? {
                *shutoff = None;
            }
        }
        _ => {}
    }
    spec.validate()?;
    Ok(spec)
}

/// Prior from `prior.<name>` keys; every parameter must be given.
pub fn prior_from_keys(cfg: &KeyValueConfig) -> Result<Option<AggregateParams>> {
    let mut v = [0.0; N_THETA];
    let mut found = 0;
    for (i, name) in AggregateParams::NAMES.iter().enumerate() {
        if let Some(x) = cfg.get_opt::<f64>(&format!("prior.{name}"))? {
            v[i] = x;
            found += 1;
        }
    }
    match found {
        0 => Ok(None),
        N_THETA => Ok(Some(AggregateParams::from_array(v))),
        _ => Err(cfg.error("prior", "either all seven `prior.*` keys or none must be set")),
    }
}

pub fn ident(cfg: &KeyValueConfig, prior: AggregateParams, seed: u64) -> Result<IdentConfig> {
    let mut c = IdentConfig::new(prior);
    c.lambda = cfg.get("ident.lambda", c.lambda)?;
    c.r = cfg.get("ident.r", c.r)?;
    c.alpha = cfg.get("ident.alpha", c.alpha)?;
    c.disturbance_scale = cfg.get("ident.disturbance_scale", c.disturbance_scale)?;
    let weight = cfg.get("ident.prior.weight", 0.1)?;
    if cfg.get("ident.prior.relative", false)? {
        let factor = cfg.get("ident.prior.box", 5.0)?;
        c = c.with_relative_prior(weight, factor)?;
    } else {
        for (i, row) in c.theta_weight.iter_mut().enumerate() {
            row[i] = weight;
        }
        let lo = cfg.get("ident.theta.lower", 1e-3)?;
        let hi = cfg.get("ident.theta.upper", 1e3)?;
        c.theta_bounds = [Bounds::new(lo, hi); N_THETA];
    }
    let q = cfg.get("ident.q_bound", "nonnegative".to_string())?;
    c.state_bounds.q_agg = match q.as_str() {
        "nonnegative" => Bounds::new(0.0, f64::INFINITY),
        "free" => Bounds::FREE,
        other => {
            return Err(cfg.error(
                "ident.q_bound",
                format!("expected `nonnegative` or `free`, got `{other}`"),
            ))
        }
    };
    let starts = cfg.get("ident.multistart.starts", 1usize)?;
    let spread = cfg.get("ident.multistart.spread", 0.5)?;
    if starts > 1 {
        c.multistart = Some(MultiStart { starts, seed, spread });
    }

    let s = &mut c.solver;
    let inner = cfg.get("solver.inner", "newton".to_string())?;
    let memory = cfg.get("solver.lbfgs_memory", 10usize)?;
    s.inner = match inner.as_str() {
        "newton" => InnerSolver::ProjectedNewton,
        "lbfgs" => InnerSolver::ProjectedLbfgs { memory },
        other => {
            return Err(cfg.error(
                "solver.inner",
                format!("expected `newton` or `lbfgs`, got `{other}`"),
            ))
        }
    };
    s.kkt_tol = cfg.get("solver.kkt_tol", s.kkt_tol)?;
    s.constraint_tol = cfg.get("solver.constraint_tol", s.constraint_tol)?;
    s.max_outer = cfg.get("solver.max_outer", s.max_outer)?;
    s.max_inner = cfg.get("solver.max_inner", s.max_inner)?;
    c.validate()?;
    Ok(c)
}

pub fn report(cfg: &KeyValueConfig) -> Result<(ReportOptions, (f64, f64))> {
    let mut opts = ReportOptions::default();
    if let Some(list) = cfg.get_str("report.kinds") {
        opts.kinds = list
            .split(',')
            .map(|s| {
                let s = s.trim();
                SignalKind::from_name(s).ok_or_else(|| cfg.error("report.kinds", format!("unknown signal `{s}`")))
            })
            .collect::<Result<_>>()?;
    }
    opts.window_hours = cfg.get("report.window_hours", opts.window_hours)?;
    let day = (cfg.get("report.day_start", 8.0)?, cfg.get("report.day_end", 18.0)?);
    Ok((opts, day))
}
