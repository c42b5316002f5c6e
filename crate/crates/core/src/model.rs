//! Network state, link parameters and the one-slot AoI evolution.

use std::fmt;

use crate::error::{AoiError, Result};

/// One of the two agents sharing the wireless resource.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Agent {
    First,
    Second,
}

impl Agent {
    /// 1-based index as used in policy files.
    pub fn index(self) -> u8 {
        match self {
            Agent::First => 1,
            Agent::Second => 2,
        }
    }

    pub fn from_index(i: u8) -> Option<Agent> {
        match i {
            1 => Some(Agent::First),
            2 => Some(Agent::Second),
            _ => None,
        }
    }

    pub fn other(self) -> Agent {
        match self {
            Agent::First => Agent::Second,
            Agent::Second => Agent::First,
        }
    }
}

impl fmt::Display for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// AoI pair `(x, y)`: age of agent 1's and agent 2's freshest update at the
/// other agent, in slots. Both components are at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    pub x: u32,
    pub y: u32,
}

impl State {
    pub fn new(x: u32, y: u32) -> Result<State> {
        if x == 0 || y == 0 {
            return Err(AoiError::InvalidParameter(format!(
                "state components must be >= 1, got ({x}, {y})"
            )));
        }
        Ok(State { x, y })
    }

    /// Age of the given agent.
    pub fn age(self, agent: Agent) -> u32 {
        match agent {
            Agent::First => self.x,
            Agent::Second => self.y,
        }
    }

    /// `self + e^i`: increment only the given agent's age.
    pub fn bump(self, agent: Agent) -> State {
        match agent {
            Agent::First => State { x: self.x + 1, y: self.y },
            Agent::Second => State { x: self.x, y: self.y + 1 },
        }
    }

    pub fn transposed(self) -> State {
        State { x: self.y, y: self.x }
    }

    /// Root of the diagonal this state lies on: the first state reached by
    /// walking `(-1, -1)` until one component equals 1.
    pub fn root(self) -> State {
        let m = self.x.min(self.y) - 1;
        State { x: self.x - m, y: self.y - m }
    }

    pub fn clamped(self, n: u32) -> State {
        State { x: self.x.min(n), y: self.y.min(n) }
    }

    pub fn total_age(self) -> u64 {
        u64::from(self.x) + u64::from(self.y)
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Per-agent transmission success probabilities `p` (agent 1) and `q` (agent 2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkParams {
    p: f64,
    q: f64,
}

impl NetworkParams {
    pub fn new(p: f64, q: f64) -> Result<NetworkParams> {
        for (name, v) in [("p", p), ("q", q)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(AoiError::InvalidParameter(format!(
                    "{name} must lie in (0, 1], got {v}"
                )));
            }
        }
        Ok(NetworkParams { p, q })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn success(&self, agent: Agent) -> f64 {
        match agent {
            Agent::First => self.p,
            Agent::Second => self.q,
        }
    }

    pub fn failure(&self, agent: Agent) -> f64 {
        1.0 - self.success(agent)
    }

    /// Parameters with the agents' roles exchanged.
    pub fn swapped(&self) -> NetworkParams {
        NetworkParams { p: self.q, q: self.p }
    }
}

/// Advance the AoI by one slot given the activated agent and whether its
/// broadcast got through.
pub fn evolve_state(s: State, chosen: Agent, success: bool) -> State {
    let reset = |agent: Agent, age: u32| {
        if chosen == agent && success {
            1
        } else {
            1 + age
        }
    };
    State { x: reset(Agent::First, s.x), y: reset(Agent::Second, s.y) }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(x: u32, y: u32) -> State {
        State::new(x, y).unwrap()
    }

    #[test]
    fn evolve_examples() {
        assert_eq!(evolve_state(st(3, 5), Agent::First, true), st(1, 6));
        assert_eq!(evolve_state(st(3, 5), Agent::First, false), st(4, 6));
        assert_eq!(evolve_state(st(1, 1), Agent::Second, true), st(2, 1));
    }

    #[test]
    fn evolve_exhaustive() {
        for x in 1..=30 {
            for y in 1..=30 {
                let s = st(x, y);
                for agent in [Agent::First, Agent::Second] {
                    let other = agent.other();
                    let fail = evolve_state(s, agent, false);
                    assert_eq!(fail, st(x + 1, y + 1));
                    let ok = evolve_state(s, agent, true);
                    assert_eq!(ok.age(agent), 1);
                    assert_eq!(ok.age(other), s.age(other) + 1);
                }
            }
        }
    }

    #[test]
    fn params_validation() {
        assert!(NetworkParams::new(0.0, 0.2).is_err());
        assert!(NetworkParams::new(0.5, 1.2).is_err());
        assert!(NetworkParams::new(f64::NAN, 0.5).is_err());
        let np = NetworkParams::new(1.0, 0.3).unwrap();
        assert_eq!(np.failure(Agent::First), 0.0);
        assert!((np.failure(Agent::Second) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn root_of_state() {
        assert_eq!(st(5, 7).root(), st(1, 3));
        assert_eq!(st(7, 1).root(), st(7, 1));
        assert_eq!(st(9, 4).root(), st(6, 1));
        assert!(State::new(0, 3).is_err());
    }
}
