use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, Context, Result};

use aoi_core::mdp::{build_model, relative_value_iteration, solve_optimal, OptimalPolicy, MIN_TRUNCATION};
use aoi_core::metrics::{average_aoi, moment, sweep, Component, SweepOptions};
use aoi_core::sim::{simulate, SimConfig, GENERATOR};
use aoi_core::{check_causality, solve, Agent, AoiError, DecisionMatrix, Distribution, NetworkParams, Policy, SolverConfig, State};

use crate::args::{
    parse_range, Format, IterationArgs, OptimalArgs, ParamArgs, PolicySource, SimulateArgs, SolveArgs, SweepArgs,
    SweepPolicy,
};
use crate::report::{emit, sibling, Report};
use crate::{invalid, Streams};

const RVI_MAX_SWEEPS: usize = 200_000;

pub(crate) fn params(a: &ParamArgs) -> Result<NetworkParams> {
    NetworkParams::new(a.p, a.q).map_err(|e| invalid(e.to_string()))
}

pub(crate) fn check_iteration(it: &IterationArgs) -> Result<()> {
    if it.n_trunc < MIN_TRUNCATION {
        return Err(invalid(format!("--n must be >= {MIN_TRUNCATION}, got {}", it.n_trunc)));
    }
    if it.tol.is_nan() || it.tol <= 0.0 {
        return Err(invalid(format!("--tol must be > 0, got {}", it.tol)));
    }
    if it.max_iter == 0 {
        return Err(invalid("--max-iter must be >= 1".into()));
    }
    Ok(())
}

pub(crate) fn check_size(size: usize, min: usize) -> Result<()> {
    if size < min {
        return Err(invalid(format!("--size must be >= {min}, got {size}")));
    }
    Ok(())
}

fn iteration_config(report: &mut Report, it: &IterationArgs) {
    report.config("n", it.n_trunc);
    report.config("tol", it.tol);
    report.config("max_iter", it.max_iter);
}

/// Policy iteration, falling back to relative value iteration if it does
/// not settle within the iteration budget.
pub(crate) fn optimal(params: &NetworkParams, it: &IterationArgs, s: &mut Streams) -> Result<(OptimalPolicy, &'static str)> {
    check_iteration(it)?;
    let model = build_model(params, it.n_trunc)?;
    match solve_optimal(&model, it.tol, it.max_iter) {
        Ok(op) => Ok((op, "policy-iteration")),
        Err(AoiError::PolicyIterationNotConverged { iterations, .. }) => {
            writeln!(s.err, "warning: policy iteration did not settle in {iterations} sweeps; using value iteration")?;
            let op = relative_value_iteration(&model, it.tol, RVI_MAX_SWEEPS)?;
            Ok((op, "relative-value-iteration"))
        }
        Err(e) => Err(e.into()),
    }
}

pub(crate) fn resolve_policy(
    source: &PolicySource,
    params: &NetworkParams,
    it: &IterationArgs,
    report: &mut Report,
    s: &mut Streams,
) -> Result<Policy> {
    report.config("policy", source.to_string());
    match source {
        PolicySource::MaxWeight => Ok(Policy::max_weight()),
        PolicySource::Optimal => {
            iteration_config(report, it);
            let (op, method) = optimal(params, it, s)?;
            report.result("op_method", method);
            report.result("op_iterations", op.iterations);
            report.result("op_mdp_gain", op.gain);
            Ok(op.policy)
        }
        PolicySource::File(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading policy file {}", path.display()))?;
            let (matrix, _) = DecisionMatrix::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
            Ok(Policy::tabular(matrix, source.to_string()))
        }
    }
}

fn distribution_csv(dist: &Distribution, report: &Report) -> String {
    let n = dist.size();
    let mut out = report.comment_block();
    out.push_str("x,y,probability\n");
    for x in 1..=n {
        for y in 1..=n {
            let _ = writeln!(out, "{x},{y},{:.16e}", dist.get(x, y));
        }
    }
    out
}

/// Primary artifact in the requested format, the optional JSON summary, and
/// the terminal summary when the artifact went to a file.
fn finish_distribution(dist: &Distribution, report: &Report, output: &crate::args::OutputArgs, s: &mut Streams) -> Result<()> {
    let format = output.format.unwrap_or(Format::Grid);
    let body = match format {
        Format::Grid => dist.to_grid_string(&report.header_lines()),
        Format::Csv => distribution_csv(dist, report),
        Format::Json => report.to_json(),
    };
    emit(output.out.as_deref(), &body, s.out)?;
    if let Some(path) = &output.summary {
        emit(Some(path), &report.to_json(), s.out)?;
    }
    if output.out.is_some() && format != Format::Json {
        s.out.write_all(report.to_text().as_bytes())?;
    }
    Ok(())
}

pub fn cmd_solve(a: &SolveArgs, s: &mut Streams) -> Result<()> {
    let params = params(&a.params)?;
    check_size(a.size, 4)?;
    let mut report = Report::new("solve");
    report.config("p", params.p());
    report.config("q", params.q());
    report.config("y_hat", a.size);
    report.config("format", a.output.format.unwrap_or(Format::Grid).name());
    let policy = resolve_policy(&a.policy, &params, &a.iteration, &mut report, s)?;
    let dist = solve(&policy, &params, &SolverConfig::with_size(a.size))?;
    let avg = average_aoi(&dist)?;
    report.result("avg_aoi", avg.value);
    report.result("avg_aoi_truncation_bound", avg.truncation_bound);
    report.result("mean_x", moment(&dist, 1, Component::First)?);
    report.result("mean_y", moment(&dist, 1, Component::Second)?);
    report.result("moment2_total", moment(&dist, 2, Component::Total)?);
    report.result("moment3_total", moment(&dist, 3, Component::Total)?);
    report.result("norm_constant", dist.norm_constant());
    report.result("tail_mass", dist.tail_mass());
    finish_distribution(&dist, &report, &a.output, s)
}

pub fn cmd_simulate(a: &SimulateArgs, s: &mut Streams) -> Result<()> {
    let params = params(&a.params)?;
    if a.steps == 0 {
        return Err(invalid("--steps must be >= 1".into()));
    }
    check_size(a.size, 2)?;
    let mut report = Report::new("simulate");
    report.config("p", params.p());
    report.config("q", params.q());
    report.config("y_hat", a.size);
    report.config("steps", a.steps);
    report.config("seed", a.seed);
    report.config("burn_in", a.burn_in);
    report.config("generator", GENERATOR);
    report.config("format", a.output.format.unwrap_or(Format::Grid).name());
    let reference = match &a.diff_against {
        Some(path) => {
            report.config("diff_against", path.display().to_string());
            let grid = read_grid(path)?;
            if grid.params() != &params {
                return Err(invalid(format!(
                    "{} holds p = {}, q = {}, but the simulation uses p = {}, q = {}",
                    path.display(),
                    grid.params().p(),
                    grid.params().q(),
                    params.p(),
                    params.q()
                )));
            }
            Some(grid)
        }
        None => None,
    };
    let policy = resolve_policy(&a.policy, &params, &a.iteration, &mut report, s)?;
    let config = SimConfig { steps: a.steps, seed: a.seed, y_hat: a.size, burn_in: a.burn_in };
    let sim = simulate(&policy, &params, &config)?;
    report.result("avg_aoi", sim.avg_aoi);
    report.result("moment2_total", sim.second_moment);
    report.result("outside_fraction", sim.empirical.tail_mass());
    if let Some(reference) = &reference {
        let diff = reference.abs_difference(&sim.empirical);
        let worst = diff.values().iter().copied().fold(0.0, f64::max);
        report.result("max_abs_diff", worst);
        let target = a.diff_out.clone().or_else(|| a.output.out.as_deref().map(|o| sibling(o, ".diff")));
        if let Some(path) = target {
            emit(Some(&path), &diff.to_grid_string(&report.header_lines()), s.out)?;
        }
    }
    finish_distribution(&sim.empirical, &report, &a.output, s)
}

/// Overlay codes: 0 both agent 1, 1 only OP resets agent 2, 2 only MW
/// resets agent 2, 3 both agent 2.
fn overlay_grid(op: &DecisionMatrix, params: &NetworkParams, report: &Report) -> String {
    let n = op.size();
    let mut out = report.comment_block();
    out.push_str("# overlay 0 = both agent 1, 1 = OP agent 2 only, 2 = MW agent 2 only, 3 = both agent 2\n");
    for x in 1..=n {
        for y in 1..=n {
            let st = State { x, y };
            let mw2 = Policy::max_weight().decide(st, params) == Agent::Second;
            let op2 = op.get(st) == Agent::Second;
            let _ = writeln!(out, "{x} {y} {}", u8::from(op2) + 2 * u8::from(mw2));
        }
        out.push('\n');
    }
    out
}

pub fn cmd_optimal(a: &OptimalArgs, s: &mut Streams) -> Result<()> {
    let params = params(&a.params)?;
    check_iteration(&a.iteration)?;
    check_size(a.size, 4)?;
    let mut report = Report::new("optimal");
    report.config("p", params.p());
    report.config("q", params.q());
    report.config("y_hat", a.size);
    report.config("format", a.output.format.unwrap_or(Format::Grid).name());
    iteration_config(&mut report, &a.iteration);
    let (op, method) = optimal(&params, &a.iteration, s)?;
    report.result("method", method);
    report.result("iterations", op.iterations);
    report.result("mdp_gain", op.gain);
    report.result("gain_history", &op.gain_history);
    let violations = check_causality(&op.policy, &params, a.iteration.n_trunc - 1);
    report.result("causality_violations", violations.len());
    let mut failure = None;
    if violations.is_empty() {
        let config = SolverConfig::with_size(a.size);
        let avg_mw = average_aoi(&solve(&Policy::max_weight(), &params, &config)?)?.value;
        let avg_op = average_aoi(&solve(&op.policy, &params, &config)?)?.value;
        report.result("avg_aoi_mw", avg_mw);
        report.result("avg_aoi_op", avg_op);
        report.result("gain_percent", 100.0 * (avg_mw - avg_op) / avg_mw);
    } else {
        let listed: Vec<String> = violations.iter().take(20).map(|v| format!("({}, {})", v.x, v.y)).collect();
        writeln!(s.err, "optimal policy is not causal at {} states: {}", violations.len(), listed.join(" "))?;
        failure = Some(anyhow!("optimal policy violates causality; exact evaluation skipped"));
    }

    let matrix = op.matrix();
    let format = a.output.format.unwrap_or(Format::Grid);
    let body = match format {
        Format::Grid => matrix.to_file_string(&report.header_lines()),
        Format::Csv => {
            let mut out = report.comment_block();
            out.push_str("x,y,agent\n");
            for x in 1..=matrix.size() {
                for y in 1..=matrix.size() {
                    let _ = writeln!(out, "{x},{y},{}", matrix.get(State { x, y }).index());
                }
            }
            out
        }
        Format::Json => report.to_json(),
    };
    emit(a.output.out.as_deref(), &body, s.out)?;
    let overlay = a.overlay.clone().or_else(|| a.output.out.as_deref().map(|o| sibling(o, ".overlay")));
    if let Some(path) = overlay {
        emit(Some(&path), &overlay_grid(matrix, &params, &report), s.out)?;
    }
    if let Some(path) = &a.output.summary {
        emit(Some(path), &report.to_json(), s.out)?;
    }
    if a.output.out.is_some() && format != Format::Json {
        s.out.write_all(report.to_text().as_bytes())?;
    }
    failure.map_or(Ok(()), Err)
}

pub fn cmd_sweep(a: &SweepArgs, s: &mut Streams) -> Result<()> {
    let p_values = parse_range(&a.p).map_err(invalid)?;
    let q_values = parse_range(&a.q).map_err(invalid)?;
    check_size(a.size, 4)?;
    let include_op = a.policy == SweepPolicy::Op;
    if include_op {
        check_iteration(&a.iteration)?;
    }
    let mut report = Report::new("sweep");
    report.config("p", &a.p);
    report.config("q", &a.q);
    report.config("policy", if include_op { "op" } else { "mw" });
    report.config("y_hat", a.size);
    report.config("format", a.output.format.unwrap_or(Format::Csv).name());
    if include_op {
        iteration_config(&mut report, &a.iteration);
    }
    let opts = SweepOptions {
        y_hat: a.size,
        n_trunc: a.iteration.n_trunc,
        include_op,
        pi_tol: a.iteration.tol,
        pi_max_iter: a.iteration.max_iter,
        threads: a.threads,
    };
    let table = sweep(&p_values, &q_values, &opts).map_err(|e| match e {
        AoiError::InvalidParameter(m) => invalid(m),
        other => other.into(),
    })?;
    let failed: Vec<_> = table.errors().collect();
    for r in &failed {
        writeln!(s.err, "cell p = {}, q = {} failed: {}", r.p, r.q, r.error.as_deref().unwrap_or(""))?;
    }
    report.result("cells", table.rows.len());
    report.result("failed_cells", failed.len());
    if include_op {
        let best = table.rows.iter().filter(|r| r.error.is_none()).map(|r| r.gain_percent).fold(f64::NAN, f64::max);
        report.result("max_gain_percent", best);
    }
    let format = a.output.format.unwrap_or(Format::Csv);
    let surface = || format!("{}{}", report.comment_block(), table.to_surface_grid());
    let body = match format {
        Format::Csv => format!("{}{}", report.comment_block(), table.to_csv()),
        Format::Grid => surface(),
        Format::Json => {
            let mut v = report.to_json_value();
            v["rows"] = table
                .rows
                .iter()
                .map(|r| {
                    serde_json::json!({
                        "p": r.p, "q": r.q, "avg_mw": r.avg_mw, "avg_op": r.avg_op,
                        "gain_percent": r.gain_percent, "error": r.error,
                    })
                })
                .collect();
            format!("{}\n", serde_json::to_string_pretty(&v)?)
        }
    };
    emit(a.output.out.as_deref(), &body, s.out)?;
    if let Some(path) = &a.surface {
        emit(Some(path.as_path()), &surface(), s.out)?;
    }
    if let Some(path) = &a.output.summary {
        emit(Some(path), &report.to_json(), s.out)?;
    }
    if a.output.out.is_some() && format != Format::Json {
        s.out.write_all(report.to_text().as_bytes())?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(anyhow!("{} of {} sweep cells failed", failed.len(), table.rows.len()))
    }
}

pub(crate) fn read_grid(path: &Path) -> Result<Distribution> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Distribution::parse_grid(&text).with_context(|| format!("parsing {}", path.display()))?.0)
}
