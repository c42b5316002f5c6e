use thiserror::Error;

use crate::model::State;
use crate::policy::Policy;

/// Errors produced by the AoI library.
#[derive(Debug, Error)]
pub enum AoiError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("policy is not causal; {} violating state(s), first at ({}, {})", .0.len(), .0[0].x, .0[0].y)]
    NonCausal(Vec<State>),

    #[error("boundary not found: policy never activates agent 1 in row y = {y}")]
    BoundaryNotFound { y: u32 },

    #[error("switching boundary lies above the diagonal: x'({y}) = {x_prime} > {y} + 1")]
    BoundaryAboveDiagonal { y: u32, x_prime: u32 },

    #[error("truncation size {y_hat} too small: last x-axis root {x_hat} < 2")]
    TruncationTooSmall { y_hat: usize, x_hat: usize },

    #[error("distribution is not normalized")]
    Unnormalized,

    #[error("parameter mismatch between distributions: {0}")]
    ParamsMismatch(String),

    #[error("pantograph check requires integer ratio (p/q = {ratio})")]
    NonIntegerRatio { ratio: f64 },

    #[error("policy iteration did not converge within {iterations} iterations")]
    PolicyIterationNotConverged { iterations: usize, last: Box<Policy>, gain: f64 },

    #[error("{method} did not converge within {iterations} iterations (last change {residual:e})")]
    NotConverged { method: &'static str, iterations: usize, residual: f64 },

    #[error("singular linear system in policy evaluation")]
    SingularSystem,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AoiError>;
