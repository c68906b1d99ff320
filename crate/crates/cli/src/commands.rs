//! The four subcommands. Each returns `Ok(())` or a [`CliError`] whose kind
//! selects the exit code.

use std::path::Path;
use std::time::Instant;

use driftctl::bellman_ode::find_beta_star_ode_with;
use driftctl::policies::{best_static, randomized_static_cost, static_cost};
use driftctl::simulate::{simulate_policy, trace_first_replication};
use driftctl::{find_beta_star, Execution, Policy, ProblemInstance, SolveResult};
use serde_json::json;

use crate::instance::{InstanceFile, SweepParam};
use crate::output::{sig, write_file, write_json, Cell, Csv};
use crate::CliError;

pub const SOLVE_GRID_POINTS: usize = 601;
/// Upper bound on the number of rows in a trace file.
pub const TRACE_MAX_ROWS: u64 = 100_000;

fn solve(file: &InstanceFile, inst: &ProblemInstance, beta_tol: Option<f64>) -> Result<SolveResult, CliError> {
    Ok(find_beta_star(inst, file.beta_tol(inst, beta_tol))?)
}

pub fn cmd_solve(instance: &Path, out: &Path, beta_tol: Option<f64>) -> Result<(), CliError> {
    let start = Instant::now();
    let file = InstanceFile::read(instance)?;
    let inst = file.instance()?;
    let tol = file.beta_tol(&inst, beta_tol);
    if !(tol > 0.0) {
        return Err(CliError::Input(format!("beta_tol must be > 0 (got {tol})")));
    }
    let result = solve(&file, &inst, beta_tol)?;
    let ode = find_beta_star_ode_with(&inst, tol, &file.ode_options(&inst))?;
    let delta = (ode.beta_star - result.beta_star).abs();

    write_json(
        out,
        json!({
            "schema": "driftctl.solve.v1",
            "beta_star": result.beta_star,
            "thresholds": result.thresholds,
            "beta_lower": result.beta_lower,
            "bracket_lower": result.bracket_lower,
            "bracket_upper": result.bracket_upper,
            "tail_residual": result.tail_coefficient_residual,
            "max_bellman_residual": result.max_bellman_residual,
            "method": result.method,
            "ode_beta_star": ode.beta_star,
            "ode_cross_check_delta": delta,
            "iterations": result.iterations,
            "ode_iterations": ode.iterations,
        }),
    )?;

    let z1 = result.value_function.z1();
    let span = if z1 > 0.0 { 1.5 * z1 } else { 0.75 * result.diagnostic_span(&inst) };
    let mut csv = Csv::new("driftctl.solve-grid.v1", &["z".into(), "v".into(), "f".into(), "theta_star".into()]);
    for i in 0..SOLVE_GRID_POINTS {
        let z = span * i as f64 / (SOLVE_GRID_POINTS - 1) as f64;
        csv.row(vec![
            z.into(),
            result.v_eval(z).into(),
            result.f_eval(&inst, z).into(),
            result.policy_eval(&inst, z).into(),
        ]);
    }
    write_file(&out.with_extension("csv"), csv.as_str())?;

    println!("beta* = {:.6}  thresholds = {:?}", result.beta_star, result.thresholds);
    println!("ode cross-check delta = {delta:.3e}");
    eprintln!("solved in {:.3} s", start.elapsed().as_secs_f64());
    Ok(())
}

/// Parse a comma-separated list of numbers.
pub fn parse_list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::Input(format!("not a number: {s:?}")))
        })
        .collect()
}

/// `dynamic`, `static:<theta>` or `mix:<w_0,...,w_K>`.
pub fn parse_policy(
    selector: &str,
    file: &InstanceFile,
    inst: &ProblemInstance,
    beta_tol: Option<f64>,
) -> Result<Policy, CliError> {
    let bad = || {
        CliError::Input(format!(
            "invalid policy {selector:?}; expected dynamic, static:<theta> or mix:<w_0,...,w_K>"
        ))
    };
    if selector == "dynamic" {
        let result = solve(file, inst, beta_tol)?;
        return Ok(Policy::dynamic(inst, &result));
    }
    let (kind, arg) = selector.split_once(':').ok_or_else(bad)?;
    match kind {
        "static" => {
            let theta: f64 = arg.trim().parse().map_err(|_| bad())?;
            Ok(Policy::static_drift(inst, theta).map_err(|e| CliError::Input(e.to_string()))?)
        }
        "mix" => {
            let weights = parse_list(arg)?;
            Ok(Policy::randomized(inst, weights).map_err(|e| CliError::Input(e.to_string()))?)
        }
        _ => Err(bad()),
    }
}

pub fn cmd_compare(instance: &Path, out: &Path, mixes: &[String], beta_tol: Option<f64>) -> Result<(), CliError> {
    let file = InstanceFile::read(instance)?;
    let inst = file.instance()?;
    let mixtures = mixes
        .iter()
        .map(|m| {
            let w = parse_list(m)?;
            let cost = randomized_static_cost(&inst, &w).map_err(|e| CliError::Input(e.to_string()))?;
            Ok((w, cost))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let result = solve(&file, &inst, beta_tol)?;
    let beta = result.beta_star;
    let best = best_static(&inst);

    let gap = |cost: f64| 100.0 * (cost - beta) / cost;
    let mut csv = Csv::new(
        "driftctl.compare.v1",
        &["row".into(), "label".into(), "theta".into(), "cost".into(), "savings_pct".into()],
    );
    for (k, &theta) in inst.ladder().iter().enumerate().filter(|(_, &t)| t < 0.0) {
        let cost = static_cost(&inst, theta)?;
        csv.row(vec![
            "static_ladder".into(),
            format!("theta_{k}").into(),
            theta.into(),
            cost.into(),
            gap(cost).into(),
        ]);
    }
    csv.row(vec![
        "static_continuous".into(),
        "best".into(),
        best.continuous.theta.into(),
        best.continuous.cost.into(),
        gap(best.continuous.cost).into(),
    ]);
    for (w, cost) in &mixtures {
        let theta = driftctl::policies::mixture_drift(&inst, w)?;
        let label: Vec<String> = w.iter().map(|x| x.to_string()).collect();
        csv.row(vec![
            "mixture".into(),
            format!("\"{}\"", label.join(",")).into(),
            theta.into(),
            (*cost).into(),
            gap(*cost).into(),
        ]);
    }
    csv.row(vec!["dynamic".into(), "beta_star".into(), Cell::Empty, beta.into(), 0.0.into()]);
    write_file(out, csv.as_str())?;

    let savings = gap(best.ladder.cost);
    let savings = if savings.abs() < 5e-5 { 0.0 } else { savings };
    println!(
        "savings: {:.0}% ({savings:.2}%): best ladder static {:.4} at theta = {} vs dynamic {:.4}",
        savings,
        best.ladder.cost,
        sig(best.ladder.theta),
        beta
    );
    println!(
        "best continuous static {:.4} at theta = {:.6} ({:.2}% above dynamic)",
        best.continuous.cost,
        best.continuous.theta,
        gap(best.continuous.cost)
    );
    for (w, cost) in &mixtures {
        println!("mixture {w:?}: {cost:.4} ({:.2}% above dynamic)", gap(*cost));
    }
    Ok(())
}

pub fn cmd_simulate(
    instance: &Path,
    out: &Path,
    selector: &str,
    trace: bool,
    seed: Option<u64>,
    beta_tol: Option<f64>,
) -> Result<(), CliError> {
    let file = InstanceFile::read(instance)?;
    let inst = file.instance()?;
    let cfg = file.sim_config(seed);
    cfg.validate().map_err(|e| CliError::Input(e.to_string()))?;
    let policy = parse_policy(selector, &file, &inst, beta_tol)?;
    let report = simulate_policy(&inst, &policy, &cfg)?;
    let mut value = serde_json::to_value(&report).expect("report serializes");
    value["schema"] = json!("driftctl.simulate.v1");
    write_json(out, value)?;

    if trace {
        let steps = (cfg.horizon / cfg.dt).round() as u64;
        let every = (steps / TRACE_MAX_ROWS).max(1) as usize;
        let path = trace_first_replication(&inst, &policy, &cfg, every)?;
        let mut csv = Csv::new("driftctl.trace.v1", &["t".into(), "z".into(), "cumulative_l".into()]);
        for pt in path {
            csv.row(vec![pt.t.into(), pt.z.into(), pt.cumulative_l.into()]);
        }
        write_file(&out.with_extension("trace.csv"), csv.as_str())?;
    }

    println!(
        "{}: mean cost rate {:.4} +/- {:.4} (95% CI, {} replications)",
        report.policy, report.mean_total_cost_rate, report.ci95_half_width, report.replications
    );
    Ok(())
}

/// `start:stop:count`, inclusive of both ends.
pub fn parse_range(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Input(format!("invalid range {text:?}; expected start:stop:count"));
    let parts: Vec<&str> = text.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(bad());
    };
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(bad());
    }
    Ok(match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    })
}

pub fn cmd_sweep(
    instance: &Path,
    out: &Path,
    param: SweepParam,
    values: Option<&str>,
    range: Option<&str>,
    beta_tol: Option<f64>,
) -> Result<(), CliError> {
    let file = InstanceFile::read(instance)?;
    let mut values = match (values, range) {
        (Some(v), None) => parse_list(v)?,
        (None, Some(r)) => parse_range(r)?,
        _ => return Err(CliError::Input("give exactly one of --values or --range".into())),
    };
    if values.is_empty() {
        return Err(CliError::Input("empty sweep range".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Input("sweep values must be finite".into()));
    }
    values.sort_by(f64::total_cmp);
    values.dedup();

    let files: Vec<InstanceFile> = values.iter().map(|&v| file.with_param(param, v)).collect();
    let instances = files
        .iter()
        .map(|f| f.instance())
        .collect::<Result<Vec<_>, _>>()?;
    let results = Execution::default().map_indexed(files.len(), |i| solve(&files[i], &instances[i], beta_tol));
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let k = instances[0].num_activities();
    let mut header = vec![param.name().to_string(), "beta_star".into()];
    header.extend((1..=k).map(|i| format!("z_{i}")));
    header.push("beta_nondecreasing".into());
    let mut csv = Csv::new("driftctl.sweep.v1", &header);
    let mut monotone = true;
    let mut prev = f64::NEG_INFINITY;
    for (value, r) in values.iter().zip(&results) {
        let slack = 1e-9 * r.bracket_upper.max(1.0);
        let ok = r.beta_star >= prev - slack;
        monotone &= ok;
        prev = r.beta_star;
        let mut row: Vec<Cell> = vec![(*value).into(), r.beta_star.into()];
        row.extend(r.thresholds.iter().map(|&z| Cell::from(z)));
        row.push(ok.into());
        csv.row(row);
    }
    write_file(out, csv.as_str())?;
    println!(
        "swept {} over {} values; beta* {} in {}",
        param.name(),
        values.len(),
        if monotone { "nondecreasing" } else { "NOT monotone" },
        param.name()
    );
    Ok(())
}
