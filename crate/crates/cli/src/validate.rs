use anyhow::{anyhow, Result};

use aoi_core::oracle::{build_operator, stationary};
use aoi_core::{
    check_causality, pantograph_residual, solve, solve_mw_closed_form, AoiError, Distribution, NetworkParams, Policy,
    SolverConfig, State,
};

use crate::args::{Format, PolicySource, ValidateArgs};
use crate::commands::{check_size, params, resolve_policy};
use crate::report::{emit, Report};
use crate::{invalid, Streams};

pub const CHECKS: [&str; 7] =
    ["causality", "normalization", "diagonal-zero", "diagonal-law", "closed-form", "pantograph", "oracle"];

const NORMALIZATION_TOL: f64 = 1e-12;
const CLOSED_FORM_TOL: f64 = 1e-12;
const PANTOGRAPH_TOL: f64 = 1e-13;
const ORACLE_TOL: f64 = 1e-8;
const ORACLE_POWER_TOL: f64 = 1e-15;
const ORACLE_MAX_ITER: usize = 1_000_000;
const LISTED_STATES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
    Skip,
}

impl Status {
    fn name(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        }
    }
}

struct Outcome {
    name: &'static str,
    status: Status,
    detail: String,
}

fn judged(name: &'static str, value: f64, tol: f64) -> Outcome {
    let status = if value <= tol { Status::Pass } else { Status::Fail };
    Outcome { name, status, detail: format!("{value:.3e} (tolerance {tol:e})") }
}

fn skip(name: &'static str, why: impl Into<String>) -> Outcome {
    Outcome { name, status: Status::Skip, detail: why.into() }
}

fn list_states(states: &[State]) -> String {
    let shown: Vec<String> = states.iter().take(LISTED_STATES).map(|s| s.to_string()).collect();
    let more = if states.len() > LISTED_STATES { format!(" and {} more", states.len() - LISTED_STATES) } else { String::new() };
    format!("{} violating state(s): {}{more}", states.len(), shown.join(" "))
}

fn selected(requested: &[String]) -> Result<Vec<&'static str>> {
    if requested.iter().any(|c| c == "all") {
        return Ok(CHECKS.to_vec());
    }
    let mut out = Vec::new();
    for name in requested {
        let known = CHECKS
            .iter()
            .find(|c| **c == name.trim())
            .ok_or_else(|| invalid(format!("unknown check {name:?}; expected one of {} or all", CHECKS.join(", "))))?;
        if !out.contains(known) {
            out.push(*known);
        }
    }
    Ok(out)
}

fn diagonal_zero(d: &Distribution) -> f64 {
    (1..=d.size()).map(|k| d.get(k, k).abs()).fold(0.0, f64::max)
}

/// Largest relative deviation from `f(x+1, y+1) = f(x, y)·(1 − success of the scheduled agent)`.
fn diagonal_law(d: &Distribution, policy: &Policy, params: &NetworkParams) -> f64 {
    let n = d.size();
    let mut worst = 0.0f64;
    for x in 1..n {
        for y in 1..n {
            let s = State { x: x as u32, y: y as u32 };
            let expected = d.get(x, y) * params.failure(policy.decide(s, params));
            let got = d.get(x + 1, y + 1);
            let scale = expected.abs().max(f64::MIN_POSITIVE);
            worst = worst.max((got - expected).abs() / scale);
        }
    }
    worst
}

fn oracle_gap(d: &Distribution, policy: &Policy, params: &NetworkParams, oracle_n: u32) -> Result<(f64, usize)> {
    let reference = stationary(&build_operator(policy, params, oracle_n)?, ORACLE_POWER_TOL, ORACLE_MAX_ITER)?;
    let window = 40.min(oracle_n as usize / 3).min(d.size());
    let (u, v) = (d.window_normalized(window), reference.window_normalized(window));
    Ok((u.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max), window))
}

pub fn cmd_validate(a: &ValidateArgs, s: &mut Streams) -> Result<()> {
    let params = params(&a.params)?;
    check_size(a.size, 4)?;
    let checks = selected(&a.check)?;
    if checks.contains(&"oracle") && a.oracle_n < 6 {
        return Err(invalid(format!("--oracle-n must be >= 6, got {}", a.oracle_n)));
    }
    let mut report = Report::new("validate");
    report.config("p", params.p());
    report.config("q", params.q());
    report.config("y_hat", a.size);
    report.config("checks", &checks);
    report.config("oracle_n", a.oracle_n);
    let policy = resolve_policy(&a.policy, &params, &a.iteration, &mut report, s)?;
    let is_mw = matches!(a.policy, PolicySource::MaxWeight);

    let bound = match &policy {
        Policy::Tabular { matrix, .. } => matrix.size(),
        Policy::MaxWeight { .. } => a.size as u32,
    };
    let violations = check_causality(&policy, &params, bound);
    let solved = solve(&policy, &params, &SolverConfig::with_size(a.size));

    let mut outcomes = Vec::new();
    for &name in &checks {
        let outcome = match (name, &solved) {
            ("causality", _) => {
                if violations.is_empty() {
                    Outcome { name, status: Status::Pass, detail: format!("no violations on [1, {}]^2", bound.saturating_sub(1)) }
                } else {
                    Outcome { name, status: Status::Fail, detail: list_states(&violations) }
                }
            }
            (_, Err(e)) => skip(name, format!("no exact solution: {e}")),
            ("normalization", Ok(d)) => judged(name, (d.total() - 1.0).abs(), NORMALIZATION_TOL),
            ("diagonal-zero", Ok(d)) => judged(name, diagonal_zero(d), 0.0),
            ("diagonal-law", Ok(d)) => judged(name, diagonal_law(d, &policy, &params), 0.0),
            ("closed-form", Ok(d)) => {
                if is_mw {
                    let closed = solve_mw_closed_form(&params, &SolverConfig::with_size(a.size))?;
                    judged(name, d.max_abs_diff(&closed), CLOSED_FORM_TOL)
                } else {
                    skip(name, "closed form exists for MaxWeight only")
                }
            }
            ("pantograph", Ok(d)) => {
                if !is_mw {
                    skip(name, "identity holds for MaxWeight only")
                } else {
                    match pantograph_residual(d) {
                        Ok(r) => judged(name, r, PANTOGRAPH_TOL),
                        Err(AoiError::NonIntegerRatio { ratio }) => {
                            skip(name, format!("p/q = {ratio} is not an integer >= 1"))
                        }
                        Err(e) => return Err(e.into()),
                    }
                }
            }
            ("oracle", Ok(d)) => {
                let (gap, window) = oracle_gap(d, &policy, &params, a.oracle_n)?;
                let mut o = judged(name, gap, ORACLE_TOL);
                o.detail.push_str(&format!(" on window {window}, oracle N = {}", a.oracle_n));
                o
            }
            _ => unreachable!("check names come from CHECKS"),
        };
        outcomes.push(outcome);
    }

    let failed = outcomes.iter().filter(|o| o.status == Status::Fail).count();
    report.result("failed", failed);
    report.result("passed", outcomes.iter().filter(|o| o.status == Status::Pass).count());
    report.result("skipped", outcomes.iter().filter(|o| o.status == Status::Skip).count());

    let lines: String =
        outcomes.iter().map(|o| format!("{} {}: {}\n", o.status.name(), o.name, o.detail)).collect();
    let body = match a.output.format.unwrap_or(Format::Grid) {
        Format::Json => {
            let mut v = report.to_json_value();
            v["checks"] = outcomes
                .iter()
                .map(|o| serde_json::json!({"name": o.name, "status": o.status.name(), "detail": o.detail}))
                .collect();
            format!("{}\n", serde_json::to_string_pretty(&v)?)
        }
        _ => lines.clone(),
    };
    emit(a.output.out.as_deref(), &body, s.out)?;
    if a.output.out.is_some() {
        s.out.write_all(lines.as_bytes())?;
    }
    if let Some(path) = &a.output.summary {
        emit(Some(path), &report.to_json(), s.out)?;
    }
    if failed == 0 {
        Ok(())
    } else {
        Err(anyhow!("{failed} check(s) failed"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_selection() {
        assert_eq!(selected(&["all".into()]).unwrap().len(), CHECKS.len());
        assert_eq!(selected(&["oracle".into(), "causality".into(), "oracle".into()]).unwrap(), vec!["oracle", "causality"]);
        assert!(selected(&["speed".into()]).is_err());
    }
}
