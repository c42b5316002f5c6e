//! Brute-force reference: the explicit transition operator of the AoI chain
//! saturated at `N`, and its stationary law by power iteration.

use crate::distribution::Distribution;
use crate::error::{AoiError, Result};
use crate::model::{evolve_state, NetworkParams, State};
use crate::policy::Policy;

/// Sparse row-stochastic operator on the states `[1, N]²`. Every state has
/// exactly two successor entries: success and failure of the scheduled agent.
#[derive(Debug, Clone)]
pub struct TransitionOperator {
    n: u32,
    rows: Vec<[(usize, f64); 2]>,
    params: NetworkParams,
    policy_id: String,
}

impl TransitionOperator {
    pub fn size(&self) -> u32 {
        self.n
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn index(&self, s: State) -> usize {
        (s.x as usize - 1) * self.n as usize + (s.y as usize - 1)
    }

    pub fn state(&self, i: usize) -> State {
        let n = self.n as usize;
        State { x: (i / n + 1) as u32, y: (i % n + 1) as u32 }
    }

    /// Successors of `s` with their probabilities, merged if they coincide.
    pub fn successors(&self, s: State) -> Vec<(State, f64)> {
        let [(a, pa), (b, pb)] = self.rows[self.index(s)];
        if a == b {
            vec![(self.state(a), pa + pb)]
        } else {
            [(a, pa), (b, pb)]
                .into_iter()
                .filter(|&(_, w)| w > 0.0)
                .map(|(i, w)| (self.state(i), w))
                .collect()
        }
    }

    /// One step of the chain: `π ↦ π P`.
    pub fn apply(&self, pi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; pi.len()];
        for (i, row) in self.rows.iter().enumerate() {
            let m = pi[i];
            if m == 0.0 {
                continue;
            }
            for &(j, w) in row {
                out[j] += m * w;
            }
        }
        out
    }
}

pub fn build_operator(policy: &Policy, params: &NetworkParams, n: u32) -> Result<TransitionOperator> {
    if n < 4 {
        return Err(AoiError::InvalidParameter(format!("oracle size must be >= 4, got {n}")));
    }
    let mut rows = Vec::with_capacity(n as usize * n as usize);
    let idx = |s: State| (s.x as usize - 1) * n as usize + (s.y as usize - 1);
    for x in 1..=n {
        for y in 1..=n {
            let s = State { x, y };
            let agent = policy.decide(s, params);
            let ok = evolve_state(s, agent, true).clamped(n);
            let fail = evolve_state(s, agent, false).clamped(n);
            let ps = params.success(agent);
            rows.push([(idx(ok), ps), (idx(fail), 1.0 - ps)]);
        }
    }
    Ok(TransitionOperator { n, rows, params: *params, policy_id: policy.id() })
}

fn iterate(op: &TransitionOperator, tol: f64, max_iter: usize, damping: f64) -> std::result::Result<Vec<f64>, f64> {
    let len = op.rows.len();
    let mut pi = vec![1.0 / len as f64; len];
    let mut change = f64::INFINITY;
    for _ in 0..max_iter {
        let stepped = op.apply(&pi);
        let next: Vec<f64> = if damping > 0.0 {
            pi.iter().zip(&stepped).map(|(a, b)| damping * a + (1.0 - damping) * b).collect()
        } else {
            stepped
        };
        change = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        pi = next;
        if change <= tol {
            return Ok(pi);
        }
    }
    Err(change)
}

/// Stationary distribution by power iteration from the uniform law. If the
/// undamped iteration does not settle (periodic chains), it is retried on
/// the lazy chain `½(I + P)`, which has the same fixed point.
pub fn stationary(op: &TransitionOperator, tol: f64, max_iter: usize) -> Result<Distribution> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(AoiError::InvalidParameter("tolerance must be > 0".into()));
    }
    let pi = match iterate(op, tol, max_iter, 0.0) {
        Ok(pi) => pi,
        Err(_) => iterate(op, tol, max_iter, 0.5).map_err(|residual| AoiError::NotConverged {
            method: "power iteration",
            iterations: max_iter,
            residual,
        })?,
    };
    let n = op.n as usize;
    let mut dist = Distribution::zeros(n, op.params, format!("oracle:{}", op.policy_id));
    for (i, v) in pi.into_iter().enumerate() {
        let s = op.state(i);
        dist.set(s.x as usize, s.y as usize, v);
    }
    dist.normalize()?;
    Ok(dist)
}

/// Long-run average of `x + y` under the stationary law of `op`.
pub fn average_cost(dist: &Distribution) -> f64 {
    dist.iter().map(|(s, v)| v * s.total_age() as f64).sum()
}
