//! Average-cost optimal scheduling on the AoI chain saturated at `N`.
//!
//! Policy evaluation exploits the chain's shape: every state moves either to
//! a root (a state with a component equal to 1) or to its diagonal successor.
//! The bias of every state is therefore an affine function of the biases of
//! the `2N − 1` roots and the gain, and the evaluation equations collapse to a
//! dense `2N × 2N` system instead of one of size `N²`, solved by LU with
//! full pivoting.

use nalgebra::{DMatrix, DVector};

use crate::error::{AoiError, Result};
use crate::model::{evolve_state, Agent, NetworkParams, State};
use crate::policy::{DecisionMatrix, Policy};

/// Smallest saturation level accepted by [`build_model`].
pub const MIN_TRUNCATION: u32 = 4;

/// Relative gap below which two action values count as tied.
const TIE_RTOL: f64 = 1e-10;

/// The AoI decision process with ages saturating at `n_trunc`; the cost of a
/// state is `x + y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdpModel {
    n_trunc: u32,
    params: NetworkParams,
}

pub fn build_model(params: &NetworkParams, n_trunc: u32) -> Result<MdpModel> {
    if n_trunc < MIN_TRUNCATION {
        return Err(AoiError::InvalidParameter(format!(
            "MDP truncation must be >= {MIN_TRUNCATION}, got {n_trunc}"
        )));
    }
    Ok(MdpModel { n_trunc, params: *params })
}

impl MdpModel {
    pub fn size(&self) -> u32 {
        self.n_trunc
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn cost(&self, s: State) -> f64 {
        s.total_age() as f64
    }

    /// `[(success successor, p_i), (failure successor, 1 − p_i)]`.
    pub fn transitions(&self, s: State, action: Agent) -> [(State, f64); 2] {
        let ps = self.params.success(action);
        [
            (evolve_state(s, action, true).clamped(self.n_trunc), ps),
            (evolve_state(s, action, false).clamped(self.n_trunc), 1.0 - ps),
        ]
    }

    fn idx(&self, s: State) -> usize {
        (s.x as usize - 1) * self.n_trunc as usize + (s.y as usize - 1)
    }
}

/// Result of [`solve_optimal`].
#[derive(Debug, Clone)]
pub struct OptimalPolicy {
    pub policy: Policy,
    /// Long-run average cost of `policy` on the saturated model.
    pub gain: f64,
    pub iterations: usize,
    /// Gain of every evaluated policy, starting with the initial one.
    pub gain_history: Vec<f64>,
}

impl OptimalPolicy {
    pub fn matrix(&self) -> &DecisionMatrix {
        match &self.policy {
            Policy::Tabular { matrix, .. } => matrix,
            Policy::MaxWeight { .. } => unreachable!("optimal policy is always tabular"),
        }
    }
}

/// Gain and bias of a fixed decision matrix.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub gain: f64,
    /// Bias per state, indexed `(x − 1)·N + (y − 1)`, pinned to 0 at `(1, 2)`.
    pub bias: Vec<f64>,
}

/// Position of a root state in the reduced unknown vector.
fn root_slot(n: u32, s: State) -> Option<usize> {
    if s.x == 1 {
        Some(s.y as usize - 1)
    } else if s.y == 1 {
        Some(n as usize + s.x as usize - 2)
    } else {
        None
    }
}

/// Exact policy evaluation. Solves for the root biases and the gain, then
/// sweeps the remaining states against the diagonal direction.
pub fn evaluate(model: &MdpModel, decisions: &DecisionMatrix) -> Result<Evaluation> {
    let n = model.n_trunc;
    let nu = n as usize;
    let m = 2 * nu; // 2N − 1 root biases + gain
    let g_col = m - 1;
    let width = m + 1; // affine forms carry a trailing constant
    let konst = m;

    let step = |s: State| -> (f64, State, State) {
        let a = decisions.get(s);
        let [(reset, ps), (next, _)] = model.transitions(s, a);
        (ps, reset, next)
    };

    // Affine forms of the biases on the saturated boundary x = N or y = N.
    // top[k] is (k, N), right[k] is (N, k); both index 1..=N.
    let mut top = vec![vec![0.0; width]; nu + 1];
    let mut right = vec![vec![0.0; width]; nu + 1];
    {
        let corner = State { x: n, y: n };
        let (ps, reset, _) = step(corner);
        let f = &mut top[nu];
        f[konst] = model.cost(corner) / ps;
        f[g_col] = -1.0 / ps;
        f[root_slot(n, reset).expect("reset lands on a root")] += 1.0;
        right[nu] = top[nu].clone();
    }
    for k in (1..nu).rev() {
        for horizontal in [true, false] {
            let s = if horizontal { State { x: k as u32, y: n } } else { State { x: n, y: k as u32 } };
            let (ps, reset, _) = step(s);
            let side = if horizontal { &mut top } else { &mut right };
            let mut f: Vec<f64> = side[k + 1].iter().map(|v| v * (1.0 - ps)).collect();
            f[konst] += model.cost(s);
            f[g_col] -= 1.0;
            f[root_slot(n, reset).expect("reset lands on a root")] += ps;
            side[k] = f;
        }
    }
    let boundary_form = |s: State| -> &Vec<f64> {
        if s.y == n {
            &top[s.x as usize]
        } else {
            &right[s.y as usize]
        }
    };

    // One equation per root: h(r) = (walk along its diagonal) + boundary form.
    let mut a = DMatrix::<f64>::zeros(m, m);
    let mut b = DVector::<f64>::zeros(m);
    let roots = (1..=n).map(|y| State { x: 1, y }).chain((2..=n).map(|x| State { x, y: 1 }));
    for r in roots {
        let row = root_slot(n, r).unwrap();
        let mut form = vec![0.0; width];
        let mut w = 1.0;
        let mut s = r;
        while s.x < n && s.y < n {
            let (ps, reset, next) = step(s);
            form[konst] += w * model.cost(s);
            form[g_col] -= w;
            form[root_slot(n, reset).unwrap()] += w * ps;
            w *= 1.0 - ps;
            s = next;
        }
        for (acc, v) in form.iter_mut().zip(boundary_form(s)) {
            *acc += w * v;
        }
        for c in 0..m {
            a[(row, c)] = -form[c];
        }
        a[(row, row)] += 1.0;
        b[row] = form[konst];
    }
    // Row `g_col` has no root equation; it carries the pin h(1,2) = 0.
    let pin = root_slot(n, State { x: 1, y: 2 }).unwrap();
    let r = g_col;
    for c in 0..m {
        a[(r, c)] = 0.0;
    }
    a[(r, pin)] = 1.0;
    b[r] = 0.0;

    // The gain column makes partial pivoting prone to exponential growth.
    let u = a.full_piv_lu().solve(&b).ok_or(AoiError::SingularSystem)?;
    let gain = u[g_col];

    let mut bias = vec![0.0; nu * nu];
    let value = |f: &Vec<f64>| f[..m].iter().zip(u.iter()).map(|(c, v)| c * v).sum::<f64>() + f[konst];
    for k in 1..=nu {
        bias[model.idx(State { x: k as u32, y: n })] = value(&top[k]);
        bias[model.idx(State { x: n, y: k as u32 })] = value(&right[k]);
    }
    for x in (1..n).rev() {
        for y in (1..n).rev() {
            let s = State { x, y };
            let (ps, reset, next) = step(s);
            let h_reset = u[root_slot(n, reset).unwrap()];
            bias[model.idx(s)] = model.cost(s) - gain + ps * h_reset + (1.0 - ps) * bias[model.idx(next)];
        }
    }
    Ok(Evaluation { gain, bias })
}

/// Greedy improvement: the action minimizing the one-step lookahead, ties
/// toward agent 1.
fn improve(model: &MdpModel, bias: &[f64]) -> DecisionMatrix {
    DecisionMatrix::from_fn(model.n_trunc, |s| {
        let look = |a: Agent| {
            model.transitions(s, a).iter().map(|&(t, w)| w * bias[model.idx(t)]).sum::<f64>()
        };
        let (q1, q2) = (look(Agent::First), look(Agent::Second));
        let scale = q1.abs().max(q2.abs()).max(1.0);
        if q1 <= q2 + TIE_RTOL * scale {
            Agent::First
        } else {
            Agent::Second
        }
    })
}

/// Average-cost policy iteration started from MaxWeight. Stops when the
/// improvement step reproduces the current decision matrix.
pub fn solve_optimal(model: &MdpModel, tol: f64, max_iter: usize) -> Result<OptimalPolicy> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(AoiError::InvalidParameter("tolerance must be > 0".into()));
    }
    let mut current = Policy::max_weight().tabulate(&model.params, model.n_trunc);
    let mut history: Vec<f64> = Vec::new();
    for it in 1..=max_iter {
        let eval = evaluate(model, &current)?;
        if let Some(&prev) = history.last() {
            assert!(
                eval.gain <= prev + tol * prev.abs().max(1.0),
                "policy iteration increased the gain: {prev} -> {}",
                eval.gain
            );
        }
        history.push(eval.gain);
        let next = improve(model, &eval.bias);
        if next == current {
            return Ok(OptimalPolicy {
                policy: Policy::tabular(current, "op"),
                gain: eval.gain,
                iterations: it,
                gain_history: history,
            });
        }
        current = next;
    }
    let gain = *history.last().unwrap_or(&f64::NAN);
    Err(AoiError::PolicyIterationNotConverged {
        iterations: max_iter,
        last: Box::new(Policy::tabular(current, "op")),
        gain,
    })
}

/// Relative value iteration on the lazy chain `½(I + P)` (same gain and
/// optimal actions, but aperiodic). Stops once the span of successive value
/// differences drops below `tol`.
pub fn relative_value_iteration(model: &MdpModel, tol: f64, max_iter: usize) -> Result<OptimalPolicy> {
    const LAZY: f64 = 0.5;
    let n = model.n_trunc;
    let len = n as usize * n as usize;
    let reference = model.idx(State { x: 1, y: 2 });
    let mut h = vec![0.0; len];
    let mut next = vec![0.0; len];
    let mut span = f64::INFINITY;
    for it in 1..=max_iter {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for x in 1..=n {
            for y in 1..=n {
                let s = State { x, y };
                let i = model.idx(s);
                let look = |a: Agent| {
                    model.transitions(s, a).iter().map(|&(t, w)| w * h[model.idx(t)]).sum::<f64>()
                };
                let best = look(Agent::First).min(look(Agent::Second));
                let v = model.cost(s) + LAZY * best + (1.0 - LAZY) * h[i];
                let diff = v - h[i];
                lo = lo.min(diff);
                hi = hi.max(diff);
                next[i] = v;
            }
        }
        span = hi - lo;
        let offset = next[reference];
        for (dst, src) in h.iter_mut().zip(&next) {
            *dst = src - offset;
        }
        if span < tol {
            let matrix = improve(model, &h);
            let gain = 0.5 * (lo + hi);
            return Ok(OptimalPolicy {
                policy: Policy::tabular(matrix, "op-rvi"),
                gain,
                iterations: it,
                gain_history: vec![gain],
            });
        }
    }
    Err(AoiError::NotConverged { method: "relative value iteration", iterations: max_iter, residual: span })
}
