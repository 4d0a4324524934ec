use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};

use aggtherm::aggregation::{average_signals, AggregateData, AggregateParams};
use aggtherm::config::KeyValueConfig;
use aggtherm::estimation::{predict_from_data, solve_batch, EstimationResult};
use aggtherm::heuristics::{day_night_means, variance_report};
use aggtherm::io::{
    aggregate_from_table, aggregate_table, read_params_csv, read_table, read_zone_csv, write_params_csv,
    write_results_csv, write_table, write_text, write_zone_csv, ColumnTable,
};
use aggtherm::scenarios::generate;

use crate::settings;

pub enum Outcome {
    Done,
    NotConverged,
}

pub struct RunContext {
    pub cfg: KeyValueConfig,
    pub out: PathBuf,
    pub seed: u64,
}

impl RunContext {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn finish(&self) -> Result<()> {
        self.cfg.check_unused()?;
        write_text(&self.path("config.effective"), &self.cfg.effective())?;
        Ok(())
    }
}

fn is_zone_file(path: &Path) -> Result<bool> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let header = text.lines().next().unwrap_or("");
    Ok(header.split(',').any(|h| h.trim() == "zone_id"))
}

/// Aggregate data from either a zone file or an aggregate table, cut to the
/// `data.from..data.to` sample range. Also returns the range and the full length.
fn load_aggregate(ctx: &RunContext, input: &Path) -> Result<(AggregateData, (usize, usize, usize))> {
    let data = if is_zone_file(input)? {
        average_signals(&read_zone_csv(input)?)?
    } else {
        aggregate_from_table(&read_table(input)?, input)?
    };
    let n = data.len();
    let from = ctx.cfg.get("data.from", 0usize)?;
    let to = ctx.cfg.get("data.to", n)?;
    if from >= to || to > n {
        bail!("sample range {from}..{to} is outside the {n} samples of {}", input.display());
    }
    Ok((data.window(from, to), (from, to, n)))
}

pub fn simulate(ctx: &RunContext) -> Result<Outcome> {
    let spec = settings::scenario(&ctx.cfg, ctx.seed)?;
    ctx.finish()?;
    let sc = generate(&spec)?;
    write_zone_csv(&ctx.path("zones.csv"), &sc.traces)?;
    let mut truth = aggregate_table(&sc.truth.aggregate);
    truth
        .push("w_tilde_z", sc.truth.errors.w_tilde_z.values.clone())
        .push("w_tilde_w", sc.truth.errors.w_tilde_w.values.clone())
        .push("q_bar_agg", sc.truth.errors.q_bar_agg.values.clone());
    write_table(&ctx.path("truth.csv"), &truth)?;
    write_params_csv(&ctx.path("params_true.csv"), &sc.truth.params, Some(&sc.truth.params))?;
    println!(
        "simulated {} zones x {} samples into {}",
        sc.traces.n_zones(),
        sc.traces.len(),
        ctx.out.display()
    );
    Ok(Outcome::Done)
}

pub fn aggregate(ctx: &RunContext, input: &Path) -> Result<Outcome> {
    ctx.finish()?;
    let zones = read_zone_csv(input)?;
    let data = average_signals(&zones)?;
    write_table(&ctx.path("aggregate.csv"), &aggregate_table(&data))?;
    println!("averaged {} zones x {} samples", zones.n_zones(), zones.len());
    Ok(Outcome::Done)
}

fn summary(result: &EstimationResult, seconds: f64) -> String {
    let mut s = String::new();
    s += &format!("converged = {}\n", result.converged);
    s += &format!("objective = {}\n", result.objective);
    s += &format!("kkt_residual = {}\n", result.kkt_residual);
    s += &format!("constraint_violation = {}\n", result.constraint_violation);
    s += &format!("outer_iterations = {}\n", result.outer_iterations);
    s += &format!("inner_iterations = {}\n", result.iterations);
    s += &format!("seconds = {seconds:.3}\n");
    for (name, v) in AggregateParams::NAMES.iter().zip(result.theta_hat.to_array()) {
        s += &format!("theta.{name} = {v}\n");
    }
    s
}

pub fn identify(
    ctx: &RunContext,
    input: &Path,
    prior_file: Option<&Path>,
    truth_file: Option<&Path>,
) -> Result<Outcome> {
    let (data, _) = load_aggregate(ctx, input)?;
    let prior = match (prior_file, settings::prior_from_keys(&ctx.cfg)?) {
        (Some(_), Some(_)) => bail!("give the prior either with --prior or with prior.* keys, not both"),
        (Some(p), None) => read_params_csv(p)?.0,
        (None, Some(p)) => p,
        (None, None) => bail!("no parameter prior: pass --prior <params.csv> or set all prior.* keys"),
    };
    let truth = match truth_file {
        Some(p) => Some(
            read_params_csv(p)?
                .1
                .ok_or_else(|| anyhow!("{} has no complete `True Value` column", p.display()))?,
        ),
        None => None,
    };
    let config = settings::ident(&ctx.cfg, prior, ctx.seed)?;
    ctx.finish()?;

    let t0 = Instant::now();
    let result = solve_batch(&data, &config)?;
    let seconds = t0.elapsed().as_secs_f64();

    write_results_csv(&ctx.path("results.csv"), &data, &result)?;
    write_params_csv(&ctx.path("params.csv"), &result.theta_hat, truth.as_ref())?;
    let mut load = ColumnTable::new(data.start_time(), data.t_s());
    load.push("T_bar_z", data.t_bar_z.values.clone())
        .push("T_bar_z_hat", result.t_bar_z_hat.values.clone())
        .push("q_agg_hat", result.q_agg_hat.values.clone())
        .push("q_bar_ac", data.q_bar_ac.values.clone());
    if let Some(q) = &data.q_bar_int {
        load.push("q_bar_int", q.values.clone());
    }
    write_table(&ctx.path("load.csv"), &load)?;
    let mut conv = String::from("outer,merit_before,merit_after,penalty,violation\n");
    for (i, m) in result.merit_history.iter().enumerate() {
        conv += &format!("{},{},{},{},{}\n", i + 1, m.before, m.after, m.penalty, m.violation);
    }
    write_text(&ctx.path("convergence.csv"), &conv)?;
    write_text(&ctx.path("summary.txt"), &summary(&result, seconds))?;

    println!(
        "identified from {} samples in {seconds:.2} s, converged = {}, KKT residual {:.2e}",
        data.len(),
        result.converged,
        result.kkt_residual
    );
    Ok(if result.converged {
        Outcome::Done
    } else {
        Outcome::NotConverged
    })
}

pub fn predict(ctx: &RunContext, input: &Path, params: &Path, load_file: Option<&Path>) -> Result<Outcome> {
    let (data, (from, to, full)) = load_aggregate(ctx, input)?;
    let theta = read_params_csv(params)?.0;
    let n = data.len();
    let source = ctx.cfg.get(
        "predict.load",
        if load_file.is_some() { "file" } else { "q_bar_int" }.to_string(),
    )?;
    let disturbance = match source.as_str() {
        "zero" => vec![0.0; n],
        "q_bar_int" => data
            .q_bar_int
            .as_ref()
            .ok_or_else(|| anyhow!("input has no q_bar_int; choose another predict.load"))?
            .values
            .clone(),
        "file" => {
            let path = load_file.ok_or_else(|| anyhow!("predict.load = file needs --load <csv>"))?;
            let column = ctx.cfg.get("predict.load_column", "q_agg_hat".to_string())?;
            let table = read_table(path)?;
            let v = table
                .column(&column)
                .ok_or_else(|| anyhow!("{} has no column `{column}`", path.display()))?;
            // A trace covering the whole input is cut like the input.
            if v.len() == full && full != n {
                v[from..to].to_vec()
            } else if v.len() == n {
                v.to_vec()
            } else {
                bail!("load trace has {} samples, the prediction horizon {n}", v.len());
            }
        }
        other => bail!("predict.load must be `zero`, `q_bar_int` or `file`, got `{other}`"),
    };
    let t_z0 = ctx.cfg.get("predict.x0.t_z", data.t_bar_z.values[0])?;
    let t_w_default = data.t_bar_w.as_ref().map_or(t_z0, |w| w.values[0]);
    let t_w0 = ctx.cfg.get("predict.x0.t_w", t_w_default)?;
    ctx.finish()?;

    let pred = predict_from_data(&theta, &data, &disturbance, [t_z0, t_w0])?;
    let mut table = ColumnTable::new(data.start_time(), data.t_s());
    table
        .push("T_bar_z", data.t_bar_z.values.clone())
        .push("T_bar_z_pred", pred.t_bar_z.clone())
        .push("T_bar_w_pred", pred.t_bar_w.clone())
        .push("load", disturbance);
    write_table(&ctx.path("prediction.csv"), &table)?;
    let rmse = pred.rmse.unwrap_or(f64::NAN);
    write_text(&ctx.path("summary.txt"), &format!("samples = {n}\nrmse_t_bar_z = {rmse}\n"))?;
    println!("predicted {n} samples, T_bar_z RMSE {rmse:.4} degC");
    Ok(Outcome::Done)
}

pub fn variance(ctx: &RunContext, input: &Path) -> Result<Outcome> {
    let (opts, day) = settings::report(&ctx.cfg)?;
    ctx.finish()?;
    let zones = read_zone_csv(input)?;
    let report = variance_report(&zones, &opts)?;
    let mut table = ColumnTable::new(report.start_time, report.t_s);
    let mut text = format!("window_samples = {}\n", report.window);
    for t in &report.traces {
        let name = t.kind.name();
        match (&t.variance, &t.windowed) {
            (Some(v), Some(w)) => {
                table
                    .push(&format!("var_{name}"), v.clone())
                    .push(&format!("var_{name}_windowed"), w.clone());
                let (d, nt) = day_night_means(v, report.start_time, report.t_s, day);
                let fmt = |x: Option<f64>| x.map_or("undefined".to_string(), |x| x.to_string());
                text += &format!("var_{name}.day_mean = {}\n", fmt(d));
                text += &format!("var_{name}.night_mean = {}\n", fmt(nt));
            }
            _ => text += &format!("var_{name} = undefined\n"),
        }
    }
    if let Some(ix) = &report.index {
        table.push("index", ix.clone());
    }
    if table.columns.is_empty() {
        println!("no variance is defined for this data set (a single zone?)");
    } else {
        write_table(&ctx.path("variance.csv"), &table)?;
    }
    write_text(&ctx.path("summary.txt"), &text)?;
    print!("{text}");
    Ok(Outcome::Done)
}
