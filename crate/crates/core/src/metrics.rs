//! Scalar summaries of distributions and the MW-vs-optimal comparison sweep.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::distribution::Distribution;
use crate::error::{AoiError, Result};
use crate::mdp::{build_model, solve_optimal};
use crate::model::{Agent, NetworkParams};
use crate::policy::Policy;
use crate::solver::{solve, SolverConfig};

/// Average AoI `E[x + y]` with an estimate of the contribution lost to truncation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AverageAoi {
    pub value: f64,
    pub truncation_bound: f64,
}

/// Which function of the state a moment is taken of.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    First,
    Second,
    Total,
}

fn require_normalized(dist: &Distribution) -> Result<()> {
    if dist.is_normalized() {
        Ok(())
    } else {
        Err(AoiError::Unnormalized)
    }
}

pub fn average_aoi(dist: &Distribution) -> Result<AverageAoi> {
    let value = moment(dist, 1, Component::Total)?;
    let params = dist.params();
    let r = params.failure(Agent::First).max(params.failure(Agent::Second));
    // mass beyond the grid sits at total age > ŷ and decays at rate ≤ r per slot
    let reach = if r < 1.0 { 2.0 * (dist.size() as f64 + 1.0 / (1.0 - r)) } else { f64::INFINITY };
    Ok(AverageAoi { value, truncation_bound: dist.tail_mass() * reach })
}

/// `Σ f(x, y) · g^k` with `g` one of `x`, `y`, `x + y`.
pub fn moment(dist: &Distribution, k: u32, which: Component) -> Result<f64> {
    require_normalized(dist)?;
    let k = i32::try_from(k).map_err(|_| AoiError::InvalidParameter("moment order too large".into()))?;
    Ok(dist
        .iter()
        .filter(|&(_, v)| v != 0.0)
        .map(|(s, v)| {
            let g = match which {
                Component::First => f64::from(s.x),
                Component::Second => f64::from(s.y),
                Component::Total => s.total_age() as f64,
            };
            v * g.powi(k)
        })
        .sum())
}

/// Relative drop in average AoI from `dist_mw` to `dist_op`, in percent.
pub fn performance_gain(dist_mw: &Distribution, dist_op: &Distribution) -> Result<f64> {
    if dist_mw.params() != dist_op.params() {
        return Err(AoiError::ParamsMismatch(format!(
            "({}, {}) vs ({}, {})",
            dist_mw.params().p(),
            dist_mw.params().q(),
            dist_op.params().p(),
            dist_op.params().q()
        )));
    }
    let mw = average_aoi(dist_mw)?.value;
    let op = average_aoi(dist_op)?.value;
    Ok(100.0 * (mw - op) / mw)
}

/// Settings shared by every cell of a [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub y_hat: usize,
    pub n_trunc: u32,
    /// Also compute the optimal policy and the gain; MW only otherwise.
    pub include_op: bool,
    pub pi_tol: f64,
    pub pi_max_iter: usize,
    /// Worker threads; 0 uses rayon's default.
    pub threads: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { y_hat: 1024, n_trunc: 256, include_op: true, pi_tol: 1e-9, pi_max_iter: 200, threads: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub p: f64,
    pub q: f64,
    pub avg_mw: f64,
    pub avg_op: f64,
    pub gain_percent: f64,
    /// Set when the cell failed; numeric fields are then NaN.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub p_values: Vec<f64>,
    pub q_values: Vec<f64>,
    pub options: SweepOptions,
    /// Row-major over `p` then `q`.
    pub rows: Vec<SweepRow>,
}

/// Exact average AoI under MW and the optimal policy for one `(p, q)` pair.
pub fn sweep_cell(p: f64, q: f64, opts: &SweepOptions) -> SweepRow {
    let run = || -> Result<(f64, f64)> {
        let params = NetworkParams::new(p, q)?;
        let config = SolverConfig::with_size(opts.y_hat);
        let mw = solve(&Policy::max_weight(), &params, &config)?;
        let avg_mw = average_aoi(&mw)?.value;
        if !opts.include_op {
            return Ok((avg_mw, f64::NAN));
        }
        let model = build_model(&params, opts.n_trunc)?;
        let op = solve_optimal(&model, opts.pi_tol, opts.pi_max_iter)?;
        let op_dist = solve(&op.policy, &params, &config)?;
        Ok((avg_mw, average_aoi(&op_dist)?.value))
    };
    match run() {
        Ok((avg_mw, avg_op)) => SweepRow {
            p,
            q,
            avg_mw,
            avg_op,
            gain_percent: 100.0 * (avg_mw - avg_op) / avg_mw,
            error: None,
        },
        Err(e) => SweepRow {
            p,
            q,
            avg_mw: f64::NAN,
            avg_op: f64::NAN,
            gain_percent: f64::NAN,
            error: Some(e.to_string()),
        },
    }
}

/// Evaluate every `(p, q)` combination. Cells run in parallel; the row order
/// is fixed by the input order, so the table does not depend on `threads`.
pub fn sweep(p_values: &[f64], q_values: &[f64], opts: &SweepOptions) -> Result<SweepTable> {
    if p_values.is_empty() || q_values.is_empty() {
        return Err(AoiError::InvalidParameter("sweep ranges must not be empty".into()));
    }
    for &v in p_values.iter().chain(q_values) {
        if !(v > 0.0 && v <= 1.0) {
            return Err(AoiError::InvalidParameter(format!("probability {v} outside (0, 1]")));
        }
    }
    let cells: Vec<(f64, f64)> =
        p_values.iter().flat_map(|&p| q_values.iter().map(move |&q| (p, q))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| AoiError::InvalidParameter(format!("thread pool: {e}")))?;
    let rows = pool.install(|| cells.par_iter().map(|&(p, q)| sweep_cell(p, q, opts)).collect());
    Ok(SweepTable { p_values: p_values.to_vec(), q_values: q_values.to_vec(), options: *opts, rows })
}

impl SweepTable {
    pub const CSV_HEADER: &'static str = "p,q,avg_mw,avg_op,gain_percent";

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{}", r.p, r.q, r.avg_mw, r.avg_op, r.gain_percent);
        }
        out
    }

    /// `p q gain` lines, one block per `p` separated by blank lines.
    pub fn to_surface_grid(&self) -> String {
        let mut out = String::from("# p q gain_fraction\n");
        for block in self.rows.chunks(self.q_values.len()) {
            for r in block {
                let _ = writeln!(out, "{} {} {:.16e}", r.p, r.q, r.gain_percent / 100.0);
            }
            out.push('\n');
        }
        out
    }

    pub fn errors(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.error.is_some())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_cycle() -> Distribution {
        let mut d = Distribution::zeros(4, NetworkParams::new(1.0, 1.0).unwrap(), "t");
        d.set(1, 2, 0.5);
        d.set(2, 1, 0.5);
        d.normalize().unwrap();
        d
    }

    #[test]
    fn hand_sums() {
        let d = two_cycle();
        assert_eq!(average_aoi(&d).unwrap().value, 3.0);
        assert_eq!(moment(&d, 1, Component::Total).unwrap(), 3.0);
        assert_eq!(moment(&d, 2, Component::Total).unwrap(), 9.0);
        assert_eq!(moment(&d, 1, Component::First).unwrap(), 1.5);
        assert_eq!(moment(&d, 2, Component::Second).unwrap(), 2.5);
        assert_eq!(performance_gain(&d, &d).unwrap(), 0.0);
    }

    #[test]
    fn rejects_unnormalized_and_mismatch() {
        let mut raw = Distribution::zeros(4, NetworkParams::new(1.0, 1.0).unwrap(), "t");
        raw.set(1, 2, 1.0);
        assert!(matches!(average_aoi(&raw), Err(AoiError::Unnormalized)));
        assert!(matches!(moment(&raw, 2, Component::First), Err(AoiError::Unnormalized)));
        let mut other = Distribution::zeros(4, NetworkParams::new(0.5, 1.0).unwrap(), "t");
        other.set(1, 2, 1.0);
        other.normalize().unwrap();
        assert!(matches!(performance_gain(&two_cycle(), &other), Err(AoiError::ParamsMismatch(_))));
    }

    #[test]
    fn sweep_validates_ranges() {
        let opts = SweepOptions { y_hat: 64, n_trunc: 16, ..SweepOptions::default() };
        assert!(sweep(&[], &[0.5], &opts).is_err());
        assert!(sweep(&[0.5], &[1.5], &opts).is_err());
    }

    #[test]
    fn failing_cell_is_recorded_in_row() {
        // x̂ < 2 at this size: the cell fails, the sweep does not
        let opts = SweepOptions { y_hat: 8, n_trunc: 8, include_op: false, ..SweepOptions::default() };
        let t = sweep(&[1.0, 0.5], &[0.1], &opts).unwrap();
        assert!(t.rows[0].error.is_some());
        assert!(t.rows[0].avg_mw.is_nan());
        assert_eq!(t.errors().count(), 1);
    }

    #[test]
    fn csv_layout() {
        let opts = SweepOptions { y_hat: 64, n_trunc: 16, include_op: true, ..SweepOptions::default() };
        let t = sweep(&[0.5], &[0.5, 0.4], &opts).unwrap();
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "p,q,avg_mw,avg_op,gain_percent");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0.5,0.5,"));
        let surf = t.to_surface_grid();
        assert_eq!(surf.lines().filter(|l| l.is_empty()).count(), 1);
    }
}
