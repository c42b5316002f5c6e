//! Truncated state-space distributions and their plot-ready grid file format.
//!
//! The grid file lists one `x y value` line per state, x-major, with a blank
//! line after each x-block (the layout surface plotters such as gnuplot and
//! pgfplots read directly). Header lines start with `#` and carry the
//! metadata needed to reconstruct the [`Distribution`].

use std::fmt::Write as _;

use crate::error::{AoiError, Result};
use crate::model::{NetworkParams, State};

/// Probabilities over the `size × size` grid of states `(1,1) ..= (size,size)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    size: usize,
    grid: Vec<f64>,
    params: NetworkParams,
    policy_id: String,
    normalized: bool,
    tail_mass: f64,
    norm_constant: f64,
}

impl Distribution {
    /// All-zero, unnormalized grid.
    pub fn zeros(size: usize, params: NetworkParams, policy_id: impl Into<String>) -> Distribution {
        Distribution {
            size,
            grid: vec![0.0; size * size],
            params,
            policy_id: policy_id.into(),
            normalized: false,
            tail_mass: 0.0,
            norm_constant: 1.0,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn policy_id(&self) -> &str {
        &self.policy_id
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Upper estimate of the probability outside the grid.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Constant `A` with `f = A · f_A`.
    pub fn norm_constant(&self) -> f64 {
        self.norm_constant
    }

    pub fn set_tail_mass(&mut self, t: f64) {
        self.tail_mass = t;
    }

    pub fn set_policy_id(&mut self, id: impl Into<String>) {
        self.policy_id = id.into();
    }

    #[inline]
    fn idx(&self, x: usize, y: usize) -> usize {
        (x - 1) * self.size + (y - 1)
    }

    #[inline]
    pub fn contains(&self, s: State) -> bool {
        s.x as usize <= self.size && s.y as usize <= self.size
    }

    /// Probability of `(x, y)`; zero outside the grid.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        if x == 0 || y == 0 || x > self.size || y > self.size {
            return 0.0;
        }
        self.grid[self.idx(x, y)]
    }

    #[inline]
    pub fn at(&self, s: State) -> f64 {
        self.get(s.x as usize, s.y as usize)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        let i = self.idx(x, y);
        self.grid[i] = v;
    }

    pub fn add(&mut self, x: usize, y: usize, v: f64) {
        let i = self.idx(x, y);
        self.grid[i] += v;
    }

    pub fn values(&self) -> &[f64] {
        &self.grid
    }

    /// Iterate `(state, probability)` in file order.
    pub fn iter(&self) -> impl Iterator<Item = (State, f64)> + '_ {
        let n = self.size;
        self.grid.iter().enumerate().map(move |(i, &v)| {
            let s = State { x: (i / n + 1) as u32, y: (i % n + 1) as u32 };
            (s, v)
        })
    }

    pub fn total(&self) -> f64 {
        self.grid.iter().sum()
    }

    /// Scale to unit sum. Records the scale factor as the normalization
    /// constant and rescales the tail estimate with it.
    pub fn normalize(&mut self) -> Result<()> {
        let total = self.total();
        if !(total.is_finite() && total > 0.0) {
            return Err(AoiError::InvalidParameter(format!(
                "cannot normalize a grid with total mass {total}"
            )));
        }
        let a = 1.0 / total;
        for v in &mut self.grid {
            *v *= a;
        }
        self.tail_mass *= a;
        self.norm_constant *= a;
        self.normalized = true;
        Ok(())
    }

    /// Mark an externally normalized grid (e.g. empirical frequencies).
    pub fn mark_normalized(&mut self, tail_mass: f64) {
        self.normalized = true;
        self.tail_mass = tail_mass;
    }

    /// Mirror the grid across the diagonal, swapping the agents' roles.
    pub fn transposed(&self) -> Distribution {
        let mut out = self.clone();
        out.params = self.params.swapped();
        for x in 1..=self.size {
            for y in 1..=self.size {
                let v = self.get(y, x);
                out.set(x, y, v);
            }
        }
        out
    }

    /// Values on the window `[1, w]²`, rescaled to sum to one.
    pub fn window_normalized(&self, w: usize) -> Vec<f64> {
        let w = w.min(self.size);
        let mut out = Vec::with_capacity(w * w);
        for x in 1..=w {
            for y in 1..=w {
                out.push(self.get(x, y));
            }
        }
        let total: f64 = out.iter().sum();
        if total > 0.0 {
            for v in &mut out {
                *v /= total;
            }
        }
        out
    }

    /// Largest entrywise absolute difference on the common part of both grids.
    pub fn max_abs_diff(&self, other: &Distribution) -> f64 {
        let n = self.size.min(other.size);
        let mut worst = 0.0f64;
        for x in 1..=n {
            for y in 1..=n {
                worst = worst.max((self.get(x, y) - other.get(x, y)).abs());
            }
        }
        worst
    }

    /// Entrywise `|self − other|` on the common part of both grids.
    pub fn abs_difference(&self, other: &Distribution) -> Distribution {
        let n = self.size.min(other.size);
        let mut out = Distribution::zeros(n, self.params, format!("|{} - {}|", self.policy_id, other.policy_id));
        for x in 1..=n {
            for y in 1..=n {
                out.set(x, y, (self.get(x, y) - other.get(x, y)).abs());
            }
        }
        out
    }

    /// Serialize in the grid file format. `extra` lines are written as
    /// additional `#` comments after the standard header.
    pub fn to_grid_string(&self, extra: &[String]) -> String {
        let mut out = String::with_capacity(self.grid.len() * 32 + 256);
        let _ = writeln!(out, "# p {}", self.params.p());
        let _ = writeln!(out, "# q {}", self.params.q());
        let _ = writeln!(out, "# policy {}", self.policy_id);
        let _ = writeln!(out, "# y_hat {}", self.size);
        let _ = writeln!(out, "# tail_mass {:e}", self.tail_mass);
        let _ = writeln!(out, "# norm_constant {:e}", self.norm_constant);
        let _ = writeln!(out, "# normalized {}", self.normalized);
        for line in extra {
            let _ = writeln!(out, "#{line}");
        }
        for x in 1..=self.size {
            for y in 1..=self.size {
                let _ = writeln!(out, "{x} {y} {:.16e}", self.get(x, y));
            }
            out.push('\n');
        }
        out
    }

    /// Parse the grid file format. Returns the distribution and any header
    /// comment lines that are not part of the standard metadata.
    pub fn parse_grid(text: &str) -> Result<(Distribution, Vec<String>)> {
        let mut p = None;
        let mut q = None;
        let mut policy = String::new();
        let mut size = None;
        let mut tail_mass = 0.0;
        let mut norm_constant = 1.0;
        let mut normalized = false;
        let mut extra = Vec::new();
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();

        let bad = |line: usize, msg: String| AoiError::Parse { line, msg };
        let num = |line: usize, s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|e| bad(line, format!("bad number {s:?}: {e}")))
        };

        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            if let Some(c) = raw.strip_prefix('#') {
                let (key, val) = c.trim_start().split_once(' ').unwrap_or((c.trim(), ""));
                let standard = c.starts_with(' ');
                match (standard, key) {
                    (true, "p") => p = Some(num(line, val)?),
                    (true, "q") => q = Some(num(line, val)?),
                    (true, "policy") => policy = val.to_string(),
                    (true, "y_hat") => {
                        size = Some(val.trim().parse::<usize>().map_err(|e| bad(line, e.to_string()))?)
                    }
                    (true, "tail_mass") => tail_mass = num(line, val)?,
                    (true, "norm_constant") => norm_constant = num(line, val)?,
                    (true, "normalized") => normalized = val.trim() == "true",
                    _ => extra.push(c.to_string()),
                }
                continue;
            }
            if raw.trim().is_empty() {
                continue;
            }
            let mut it = raw.split(' ');
            let (Some(xs), Some(ys), Some(vs), None) = (it.next(), it.next(), it.next(), it.next()) else {
                return Err(bad(line, "expected `x y value`".into()));
            };
            let x = xs.parse::<usize>().map_err(|e| bad(line, e.to_string()))?;
            let y = ys.parse::<usize>().map_err(|e| bad(line, e.to_string()))?;
            entries.push((x, y, num(line, vs)?));
        }

        let params = NetworkParams::new(
            p.ok_or_else(|| bad(0, "missing `# p` header".into()))?,
            q.ok_or_else(|| bad(0, "missing `# q` header".into()))?,
        )?;
        let size = match size {
            Some(s) => s,
            None => entries.iter().map(|e| e.0.max(e.1)).max().unwrap_or(0),
        };
        let mut dist = Distribution::zeros(size, params, policy);
        for (x, y, v) in entries {
            if x == 0 || y == 0 || x > size || y > size {
                return Err(bad(0, format!("state ({x}, {y}) outside {size}x{size} grid")));
            }
            dist.set(x, y, v);
        }
        dist.tail_mass = tail_mass;
        dist.norm_constant = norm_constant;
        dist.normalized = normalized;
        Ok((dist, extra))
    }
}
