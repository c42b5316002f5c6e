//! Scheduling policies: MaxWeight and tabular decision matrices.
//!
//! A policy maps every state to the agent that broadcasts in the next slot.
//! Besides the decision rule itself this module provides the causality scan
//! and the two switching-boundary functions the exact solver is built on:
//!
//! * `x'(y)`: the smallest `x` with `decide((x, y)) = 1`, i.e. the first
//!   state of row `y` from which the root `(1, y + 1)` is reachable.
//! * `y'(x)`: the smallest `y` with `decide((x, y)) = 2`.
//!
//! Causality makes both decision regions up-sets along their own axis, so
//! each row (column) splits into exactly two runs.

use std::fmt::Write as _;

use crate::error::{AoiError, Result};
use crate::model::{Agent, NetworkParams, State};

/// Relative tolerance under which `x·p` and `y·q` count as equal in the
/// MaxWeight comparison. Keeps exact-rational boundaries such as
/// `p/q = 3` from being shifted by binary rounding of `0.6` and `0.2`.
pub const MW_TIE_RTOL: f64 = 1e-12;

/// N×N grid of decisions. Row `k` is the slice `y = k`, column `j` is `x = j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionMatrix {
    n: u32,
    cells: Vec<Agent>,
}

impl DecisionMatrix {
    pub fn new(n: u32, cells: Vec<Agent>) -> Result<DecisionMatrix> {
        if n == 0 {
            return Err(AoiError::InvalidPolicy("matrix size must be >= 1".into()));
        }
        if cells.len() != (n as usize) * (n as usize) {
            return Err(AoiError::InvalidPolicy(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n as usize * n as usize,
                cells.len()
            )));
        }
        Ok(DecisionMatrix { n, cells })
    }

    /// Build a matrix by evaluating `f` on every in-range state.
    pub fn from_fn(n: u32, mut f: impl FnMut(State) -> Agent) -> DecisionMatrix {
        let mut cells = Vec::with_capacity(n as usize * n as usize);
        for y in 1..=n {
            for x in 1..=n {
                cells.push(f(State { x, y }));
            }
        }
        DecisionMatrix { n, cells }
    }

    pub fn constant(n: u32, agent: Agent) -> DecisionMatrix {
        DecisionMatrix { n, cells: vec![agent; n as usize * n as usize] }
    }

    pub fn size(&self) -> u32 {
        self.n
    }

    fn index(&self, s: State) -> usize {
        (s.y as usize - 1) * self.n as usize + (s.x as usize - 1)
    }

    /// Decision at `s`; states beyond the matrix are clamped componentwise.
    pub fn get(&self, s: State) -> Agent {
        self.cells[self.index(s.clamped(self.n))]
    }

    pub fn set(&mut self, s: State, agent: Agent) {
        assert!(s.x <= self.n && s.y <= self.n, "state {s} outside {0}x{0} matrix", self.n);
        let i = self.index(s);
        self.cells[i] = agent;
    }

    /// Same policy with the agents' roles exchanged.
    pub fn swapped(&self) -> DecisionMatrix {
        DecisionMatrix::from_fn(self.n, |s| self.get(s.transposed()).other())
    }

    /// Parse the plain-text policy format. Returns the matrix and the comment
    /// lines (without the leading `#`) in file order.
    pub fn parse(text: &str) -> Result<(DecisionMatrix, Vec<String>)> {
        let mut comments = Vec::new();
        let mut declared: Option<u32> = None;
        let mut rows: Vec<Vec<Agent>> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            if let Some(c) = raw.strip_prefix('#') {
                comments.push(c.to_string());
                continue;
            }
            let trimmed = raw.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(size) = trimmed.strip_prefix('N') {
                if declared.is_some() || !rows.is_empty() {
                    return Err(AoiError::Parse { line, msg: "size line must come first".into() });
                }
                let n = size.trim().parse::<u32>().map_err(|e| AoiError::Parse {
                    line,
                    msg: format!("bad size: {e}"),
                })?;
                declared = Some(n);
                continue;
            }
            let row = trimmed
                .split(' ')
                .map(|tok| match tok {
                    "1" => Ok(Agent::First),
                    "2" => Ok(Agent::Second),
                    other => Err(AoiError::Parse {
                        line,
                        msg: format!("decision entry must be 1 or 2, got {other:?}"),
                    }),
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let n = rows.len() as u32;
        if n == 0 {
            return Err(AoiError::Parse { line: 0, msg: "no matrix rows".into() });
        }
        if let Some(d) = declared {
            if d != n {
                return Err(AoiError::Parse {
                    line: 0,
                    msg: format!("declared size {d} but found {n} rows"),
                });
            }
        }
        for (k, row) in rows.iter().enumerate() {
            if row.len() as u32 != n {
                return Err(AoiError::Parse {
                    line: 0,
                    msg: format!("row {} has {} entries, expected {n}", k + 1, row.len()),
                });
            }
        }
        let matrix = DecisionMatrix::new(n, rows.into_iter().flatten().collect())?;
        Ok((matrix, comments))
    }

    /// Emit the matrix in the policy file format: comments, size line, rows.
    pub fn to_file_string(&self, comments: &[String]) -> String {
        let mut out = String::with_capacity(self.cells.len() * 2 + 64);
        for c in comments {
            let _ = writeln!(out, "#{c}");
        }
        let _ = writeln!(out, "N {}", self.n);
        for row in self.cells.chunks(self.n as usize) {
            let line: Vec<&str> = row
                .iter()
                .map(|a| if *a == Agent::First { "1" } else { "2" })
                .collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

/// A stationary deterministic scheduling policy.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    /// Activate the agent with the larger `age · success probability`;
    /// exact ties go to `ties`.
    MaxWeight { ties: Agent },
    /// Decision matrix; `label` names its origin in output headers.
    Tabular { matrix: DecisionMatrix, label: String },
}

impl Policy {
    /// MaxWeight with the non-strict `x·p ≥ y·q` rule (ties to agent 1).
    pub fn max_weight() -> Policy {
        Policy::MaxWeight { ties: Agent::First }
    }

    pub fn tabular(matrix: DecisionMatrix, label: impl Into<String>) -> Policy {
        Policy::Tabular { matrix, label: label.into() }
    }

    pub fn is_max_weight(&self) -> bool {
        matches!(self, Policy::MaxWeight { .. })
    }

    pub fn id(&self) -> String {
        match self {
            Policy::MaxWeight { ties: Agent::First } => "mw".to_string(),
            Policy::MaxWeight { ties: Agent::Second } => "mw-ties2".to_string(),
            Policy::Tabular { label, .. } => label.clone(),
        }
    }

    pub fn decide(&self, s: State, params: &NetworkParams) -> Agent {
        match self {
            Policy::MaxWeight { ties } => mw_choice(s, params, *ties),
            Policy::Tabular { matrix, .. } => matrix.get(s),
        }
    }

    /// The same policy expressed with agents relabeled (x ↔ y, p ↔ q).
    pub fn swapped(&self) -> Policy {
        match self {
            Policy::MaxWeight { ties } => Policy::MaxWeight { ties: ties.other() },
            Policy::Tabular { matrix, label } => {
                Policy::Tabular { matrix: matrix.swapped(), label: label.clone() }
            }
        }
    }

    /// Tabulate the policy on an `n × n` grid.
    pub fn tabulate(&self, params: &NetworkParams, n: u32) -> DecisionMatrix {
        DecisionMatrix::from_fn(n, |s| self.decide(s, params))
    }
}

/// Signed MaxWeight margin `x·p − y·q`, snapped to zero inside the tie tolerance.
fn mw_margin(s: State, params: &NetworkParams) -> f64 {
    let wx = f64::from(s.x) * params.p();
    let wy = f64::from(s.y) * params.q();
    let diff = wx - wy;
    if diff.abs() <= MW_TIE_RTOL * wx.max(wy) {
        0.0
    } else {
        diff
    }
}

fn mw_choice(s: State, params: &NetworkParams, ties: Agent) -> Agent {
    let m = mw_margin(s, params);
    if m > 0.0 {
        Agent::First
    } else if m < 0.0 {
        Agent::Second
    } else {
        ties
    }
}

/// MaxWeight decision: agent 1 whenever `x·p ≥ y·q`.
pub fn decide_mw(s: State, params: &NetworkParams) -> Agent {
    mw_choice(s, params, Agent::First)
}

pub fn decide_tabular(policy: &Policy, s: State) -> Result<Agent> {
    match policy {
        Policy::Tabular { matrix, .. } => Ok(matrix.get(s)),
        Policy::MaxWeight { .. } => {
            Err(AoiError::InvalidPolicy("decide_tabular called on a MaxWeight policy".into()))
        }
    }
}

/// Every state `a` with `decide(a) = i` but `decide(a + e^i) ≠ i`.
///
/// Scans `a ∈ [1, bound − 1]²`, so every probed successor `a + e^i` stays
/// within `[1, bound]²`.
pub fn check_causality(policy: &Policy, params: &NetworkParams, bound: u32) -> Vec<State> {
    let mut violations = Vec::new();
    for y in 1..bound {
        for x in 1..bound {
            let s = State { x, y };
            let agent = policy.decide(s, params);
            if policy.decide(s.bump(agent), params) != agent {
                violations.push(s);
            }
        }
    }
    violations
}

/// `x'(y)`: smallest `x` with `decide((x, y)) = 1`.
pub fn first_reachable_x(policy: &Policy, params: &NetworkParams, y: u32) -> Result<u32> {
    if y == 0 {
        return Err(AoiError::InvalidParameter("y must be >= 1".into()));
    }
    match policy {
        Policy::MaxWeight { ties } => {
            let ratio = params.q() / params.p();
            let mut x = ((ratio * f64::from(y)).ceil() as u32).max(1);
            let first = |x: u32| mw_choice(State { x, y }, params, *ties) == Agent::First;
            while x > 1 && first(x - 1) {
                x -= 1;
            }
            while !first(x) {
                x += 1;
            }
            Ok(x)
        }
        Policy::Tabular { matrix, .. } => (1..=matrix.size())
            .find(|&x| matrix.get(State { x, y }) == Agent::First)
            .ok_or(AoiError::BoundaryNotFound { y }),
    }
}

/// `y'(x)`: smallest `y ≤ limit` with `decide((x, y)) = 2`, if any.
pub fn first_reachable_y(policy: &Policy, params: &NetworkParams, x: u32, limit: u32) -> Option<u32> {
    match policy {
        Policy::MaxWeight { ties } => {
            let ratio = params.p() / params.q();
            let mut y = ((ratio * f64::from(x)).floor() as u32).max(1);
            let second = |y: u32| mw_choice(State { x, y }, params, *ties) == Agent::Second;
            while y > 1 && second(y - 1) {
                y -= 1;
            }
            while !second(y) {
                y += 1;
                if y > limit {
                    return None;
                }
            }
            (y <= limit).then_some(y)
        }
        Policy::Tabular { matrix, .. } => {
            let top = limit.min(matrix.size());
            (1..=top).find(|&y| matrix.get(State { x, y }) == Agent::Second)
        }
    }
}

/// `Δ(y) = x'(y) − x'(y−1) − 1`.
pub fn boundary_delta(policy: &Policy, params: &NetworkParams, y: u32) -> Result<i64> {
    if y < 2 {
        return Err(AoiError::InvalidParameter("boundary_delta requires y >= 2".into()));
    }
    let cur = first_reachable_x(policy, params, y)?;
    let prev = first_reachable_x(policy, params, y - 1)?;
    Ok(i64::from(cur) - i64::from(prev) - 1)
}
