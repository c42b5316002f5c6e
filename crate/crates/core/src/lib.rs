//! Exact Age-of-Information (AoI) analysis for two agents sharing one
//! wireless channel.
//!
//! Each slot one agent broadcasts; on success its age resets to 1, every
//! other age grows by one. This crate computes the stationary distribution
//! of the AoI pair `(x, y)` exactly for any causal scheduling policy, finds
//! the average-AoI-optimal policy by policy iteration, and provides a
//! Monte-Carlo simulator and a brute-force power-iteration oracle to check
//! the results against.
//!
//! ```
//! use aoi_core::{solve, NetworkParams, Policy, SolverConfig, metrics};
//!
//! let params = NetworkParams::new(0.6, 0.2).unwrap();
//! let dist = solve(&Policy::max_weight(), &params, &SolverConfig::with_size(256)).unwrap();
//! let avg = metrics::average_aoi(&dist).unwrap();
//! assert!(avg.value > 3.0);
//! ```

pub mod distribution;
pub mod error;
pub mod mdp;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod policy;
pub mod sim;
pub mod solver;

pub use distribution::Distribution;
pub use error::{AoiError, Result};
pub use model::{evolve_state, Agent, NetworkParams, State};
pub use policy::{
    boundary_delta, check_causality, decide_mw, decide_tabular, first_reachable_x, first_reachable_y,
    DecisionMatrix, Policy,
};
pub use solver::{
    diagonal_attenuation, pantograph_residual, propagate_diagonal, solve, solve_mw_closed_form, tail_mass_bound,
    SolverConfig,
};
