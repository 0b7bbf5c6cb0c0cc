// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors raised by the extrapolation library.
#[derive(Debug, Error)]
pub enum ZneError {
    #[error("degenerate nodes: x[{i}] = {xi} and x[{j}] = {xj} are not distinct")]
    DegenerateNodes { i: usize, j: usize, xi: f64, xj: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid node set: {0}")]
    InvalidNodes(String),

    #[error("no x1 reaches overhead {target} for {family} with n = {n} (bracket exceeded {limit:e})")]
    NoSolution { family: String, n: usize, target: f64, limit: f64 },

    #[error("insufficient budget: {n_tot} shots cannot cover {nodes} nodes at a floor of {floor}")]
    InsufficientBudget { n_tot: u64, nodes: usize, floor: u64 },

    #[error("node {node} has nonzero weight but no shots")]
    ZeroShots { node: usize },

    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("bias unavailable: the noise model has no known zero-noise value")]
    BiasUnavailable,

    #[error("x = {x} lies outside the tabulated range [{lo}, {hi}]")]
    ExtrapolationRefused { x: f64, lo: f64, hi: f64 },

    #[error("invalid fake-node map: {0}")]
    InvalidMap(String),

    #[error("numerical integration failed: {0}")]
    Integration(String),

    #[error("every row failed; first error: {first}")]
    AllRowsFailed { first: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = ZneError> = std::result::Result<T, E>;
