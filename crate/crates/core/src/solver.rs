//! Exact stationary distribution by root-state recursion.
//!
//! Every state off the axes is reachable only from its diagonal predecessor,
//! by a failed transmission. A state's probability is therefore its root's
//! probability times the product of failure probabilities along the diagonal.
//! The roots on the y-axis obey a one-step recursion driven by the policy's
//! switching boundary `x'(y)`; once they are known, the x-axis roots follow
//! from column sums over the already evaluated half of the grid.
//!
//! All work happens in the orientation `p ≥ q`. Inputs with `p < q` are
//! relabeled first and the finished grid is transposed back.

use crate::distribution::Distribution;
use crate::error::{AoiError, Result};
use crate::model::{Agent, NetworkParams, State};
use crate::policy::{check_causality, first_reachable_x, first_reachable_y, Policy};

/// Truncation settings for [`solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Grid size `ŷ`; the solver evaluates states `(1,1) ..= (ŷ,ŷ)`.
    pub y_hat: usize,
    /// Tail mass above which results are flagged by callers; not used by the recursion.
    pub tail_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { y_hat: 1024, tail_tolerance: 1e-12 }
    }
}

impl SolverConfig {
    pub fn with_size(y_hat: usize) -> SolverConfig {
        SolverConfig { y_hat, ..SolverConfig::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.y_hat < 4 {
            return Err(AoiError::InvalidParameter(format!(
                "truncation size must be >= 4, got {}",
                self.y_hat
            )));
        }
        if self.tail_tolerance.is_nan() || self.tail_tolerance < 0.0 {
            return Err(AoiError::InvalidParameter("tail tolerance must be >= 0".into()));
        }
        Ok(())
    }
}

/// Product of the failure probabilities met on the diagonal walk from the
/// root of `s` to `s` (1 for a root itself).
pub fn diagonal_attenuation(policy: &Policy, params: &NetworkParams, s: State) -> f64 {
    let root = s.root();
    let mut d = 1.0;
    for k in 0..(s.x - root.x) {
        let prev = State { x: root.x + k, y: root.y + k };
        d *= params.failure(policy.decide(prev, params));
    }
    d
}

/// Fill the diagonal starting at `root` from the root's value already stored
/// in `dist`, until the walk leaves the grid.
pub fn propagate_diagonal(dist: &mut Distribution, root: State, policy: &Policy, params: &NetworkParams) {
    let n = dist.size();
    let (mut x, mut y) = (root.x as usize, root.y as usize);
    let mut v = dist.get(x, y);
    while x < n && y < n {
        let fail = params.failure(policy.decide(State { x: x as u32, y: y as u32 }, params));
        v *= fail;
        x += 1;
        y += 1;
        dist.set(x, y, v);
    }
}

/// `x̂ = ⌊(q/p)·ŷ⌋ + 1`, capped at `ŷ`, in the `p ≥ q` orientation.
pub fn last_x_root(params: &NetworkParams, y_hat: usize) -> usize {
    let x_hat = ((params.q() / params.p()) * y_hat as f64).floor() as usize + 1;
    x_hat.min(y_hat)
}

/// Policy and parameters relabeled so that `p ≥ q`.
struct Oriented {
    policy: Policy,
    params: NetworkParams,
    swapped: bool,
}

fn orient(policy: &Policy, params: &NetworkParams) -> Oriented {
    if params.p() < params.q() {
        Oriented { policy: policy.swapped(), params: params.swapped(), swapped: true }
    } else {
        Oriented { policy: policy.clone(), params: *params, swapped: false }
    }
}

/// Boundary `x'(y)` for `y = 1 ..= ŷ − 1` (index 0 unused), checked against
/// the requirement that referenced states stay on or above the diagonal.
fn boundaries(policy: &Policy, params: &NetworkParams, y_hat: usize) -> Result<Vec<u32>> {
    let mut xp = vec![0u32; y_hat];
    for y in 1..y_hat as u32 {
        let b = first_reachable_x(policy, params, y)?;
        if b > y + 1 {
            return Err(AoiError::BoundaryAboveDiagonal { y, x_prime: b });
        }
        xp[y as usize] = b;
    }
    Ok(xp)
}

fn check_inputs(policy: &Policy, params: &NetworkParams, config: &SolverConfig) -> Result<()> {
    config.validate()?;
    if let Policy::Tabular { matrix, .. } = policy {
        let bound = (matrix.size() + 1).min(config.y_hat as u32);
        let violations = check_causality(policy, params, bound);
        if !violations.is_empty() {
            return Err(AoiError::NonCausal(violations));
        }
    }
    let x_hat = last_x_root(params, config.y_hat);
    if x_hat < 2 {
        return Err(AoiError::TruncationTooSmall { y_hat: config.y_hat, x_hat });
    }
    Ok(())
}

/// Roots on the x-axis: `f(x+1, 1) = q · Σ_{y = y'(x)}^{ŷ} f(x, y)`,
/// each followed by its diagonal. Returns the last root with support.
fn fill_x_axis(dist: &mut Distribution, policy: &Policy, params: &NetworkParams) -> usize {
    let n = dist.size();
    let mut last = 1;
    for x in 1..n {
        let Some(start) = first_reachable_y(policy, params, x as u32, n as u32) else {
            if policy.is_max_weight() {
                break;
            }
            continue;
        };
        let column: f64 = (start as usize..=n).map(|y| dist.get(x, y)).sum();
        let root = params.q() * column;
        dist.set(x + 1, 1, root);
        propagate_diagonal(dist, State { x: x as u32 + 1, y: 1 }, policy, params);
        if root > 0.0 {
            last = x + 1;
        }
    }
    last
}

/// Normalize, then rebuild every diagonal from its scaled root so the
/// diagonal law holds exactly on the returned grid.
fn finish(mut dist: Distribution, o: &Oriented, policy_id: String) -> Result<Distribution> {
    let tail = tail_mass_bound(&dist, &o.params);
    dist.set_tail_mass(tail);
    dist.normalize()?;
    for k in 1..=dist.size() as u32 {
        propagate_diagonal(&mut dist, State { x: 1, y: k }, &o.policy, &o.params);
        propagate_diagonal(&mut dist, State { x: k, y: 1 }, &o.policy, &o.params);
    }
    dist.set_policy_id(policy_id);
    Ok(if o.swapped { dist.transposed() } else { dist })
}

/// Exact stationary distribution under any causal policy.
///
/// The y-axis roots follow
/// `f(1,y+1) = p̄·f(1,y) + p·C(y)`, where the correction `C(y)` depends on
/// `Δ(y) = x'(y) − x'(y−1) − 1`: for `Δ < 0` it adds the `|Δ|` states
/// `(x'(y) .. x'(y−1), y)` that newly reach `(1, y+1)`, for `Δ > 0` it
/// subtracts the `Δ` states `(x'(y−1)+1 .. x'(y)−1, y)` that dropped out.
/// Those states lie on or above the diagonal, so their values are already
/// known from earlier y-axis roots.
pub fn solve(policy: &Policy, params: &NetworkParams, config: &SolverConfig) -> Result<Distribution> {
    let o = orient(policy, params);
    check_inputs(&o.policy, &o.params, config)?;
    let n = config.y_hat;
    let xp = boundaries(&o.policy, &o.params, n)?;
    let (p, pbar) = (o.params.p(), o.params.failure(Agent::First));

    let mut dist = Distribution::zeros(n, o.params, o.policy.id());
    dist.set(1, 2, 1.0);
    propagate_diagonal(&mut dist, State { x: 1, y: 2 }, &o.policy, &o.params);

    for y in 2..n {
        let (cur, prev) = (xp[y] as usize, xp[y - 1] as usize);
        let delta = cur as i64 - prev as i64 - 1;
        let correction = match delta.cmp(&0) {
            std::cmp::Ordering::Less => (cur..=prev).map(|x| dist.get(x, y)).sum::<f64>(),
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Greater => -((prev + 1)..cur).map(|x| dist.get(x, y)).sum::<f64>(),
        };
        let root = (pbar * dist.get(1, y) + p * correction).max(0.0);
        dist.set(1, y + 1, root);
        propagate_diagonal(&mut dist, State { x: 1, y: y as u32 + 1 }, &o.policy, &o.params);
    }

    fill_x_axis(&mut dist, &o.policy, &o.params);
    finish(dist, &o, policy.id())
}

/// MaxWeight specialization with the closed-form boundary `x'(y) = ⌈(q/p)·y⌉`:
/// `f(1,y+1) = p̄·f(1,y) + p·f(1, y−x'(y)+1)·q̄^{x'(y)−1}` when `x'(y) = x'(y−1)`,
/// and `p̄·f(1,y)` otherwise.
pub fn solve_mw_closed_form(params: &NetworkParams, config: &SolverConfig) -> Result<Distribution> {
    let policy = Policy::max_weight();
    let o = orient(&policy, params);
    check_inputs(&o.policy, &o.params, config)?;
    let n = config.y_hat;
    let (p, pbar, qbar) = (o.params.p(), o.params.failure(Agent::First), o.params.failure(Agent::Second));
    let xp = boundaries(&o.policy, &o.params, n)?;

    let mut dist = Distribution::zeros(n, o.params, o.policy.id());
    dist.set(1, 2, 1.0);
    for y in 2..n {
        let mut root = pbar * dist.get(1, y);
        if xp[y] == xp[y - 1] {
            let b = xp[y] as usize;
            root += p * dist.get(1, y - b + 1) * qbar.powi(b as i32 - 1);
        }
        dist.set(1, y + 1, root);
    }
    for y in 2..=n {
        propagate_diagonal(&mut dist, State { x: 1, y: y as u32 }, &o.policy, &o.params);
    }

    fill_x_axis(&mut dist, &o.policy, &o.params);
    finish(dist, &o, policy.id())
}

/// Estimate of the mass the true distribution puts outside the grid, in the
/// grid's own scale (normalized or not).
///
/// Two parts: every diagonal leaving the grid with last value `v` carries at
/// most `v·r/(1−r)` beyond it, `r = max(p̄, q̄)`; and the roots that were never
/// started (y-axis beyond `ŷ`, x-axis beyond the last evaluated root) are
/// extrapolated geometrically from the last five boundary values, each
/// carrying its own diagonal of mass at most `root/(1−r)`. Returns infinity
/// when the boundary values do not decay.
pub fn tail_mass_bound(dist: &Distribution, params: &NetworkParams) -> f64 {
    let r = params.failure(Agent::First).max(params.failure(Agent::Second));
    if r == 0.0 {
        return 0.0;
    }
    let n = dist.size();
    let diag_factor = 1.0 / (1.0 - r);

    let mut exiting = 0.0;
    for k in 1..=n {
        exiting += dist.get(n, k);
        if k < n {
            exiting += dist.get(k, n);
        }
    }
    let mut bound = exiting * r * diag_factor;

    let y_roots: Vec<f64> = (2..=n).map(|y| dist.get(1, y)).collect();
    let x_roots: Vec<f64> = (2..=n).map(|x| dist.get(x, 1)).collect();
    for roots in [y_roots, x_roots] {
        bound += geometric_tail(&roots) * diag_factor;
    }
    bound
}

/// Sum beyond the last positive entry of a sequence. The amplitude is the
/// largest of the last five values; the decay rate compares that block with
/// the five-value block `lag` entries earlier, so that the oscillation of the
/// roots under switching policies does not masquerade as growth.
fn geometric_tail(seq: &[f64]) -> f64 {
    const BLOCK: usize = 5;
    let Some(end) = seq.iter().rposition(|&v| v > 0.0) else {
        return 0.0;
    };
    let len = end + 1;
    if len < 2 * BLOCK {
        return 0.0;
    }
    let lag = ((len - BLOCK) / 2).clamp(BLOCK, 64);
    let block_max = |hi: usize| seq[hi + 1 - BLOCK..=hi].iter().copied().fold(0.0, f64::max);
    let (recent, earlier) = (block_max(end), block_max(end - lag));
    if earlier <= 0.0 {
        return 0.0;
    }
    let rate = (recent / earlier).powf(1.0 / lag as f64);
    if rate >= 1.0 {
        return f64::INFINITY;
    }
    recent * rate / (1.0 - rate)
}

/// Largest violation of the proportional-delay identity
/// `f(1,κm+1) = p̄·f(1,κm) + p·q̄^{m−1}·f(1,(κ−1)m+1)`, `κ = p/q ∈ ℕ`,
/// over all `m` with `2 ≤ κm` and `κm + 1 ≤ ŷ`.
pub fn pantograph_residual(d: &Distribution) -> Result<f64> {
    let params = d.params();
    let ratio = params.p() / params.q();
    let kappa = ratio.round();
    if (ratio - kappa).abs() > 1e-9 || kappa < 1.0 {
        return Err(AoiError::NonIntegerRatio { ratio });
    }
    let kappa = kappa as usize;
    let (p, pbar, qbar) = (params.p(), 1.0 - params.p(), 1.0 - params.q());
    let mut worst = 0.0f64;
    let mut m = 1usize;
    while kappa * m < d.size() {
        if kappa * m >= 2 {
            let lhs = d.get(1, kappa * m + 1);
            let rhs = pbar * d.get(1, kappa * m) + p * qbar.powi(m as i32 - 1) * d.get(1, (kappa - 1) * m + 1);
            worst = worst.max((lhs - rhs).abs());
        }
        m += 1;
    }
    Ok(worst)
}
