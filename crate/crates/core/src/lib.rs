// SPDX-License-Identifier: Apache-2.0

//! Zero-noise extrapolation with Lagrange weights: node spacings, shot
//! allocation, noise models, estimators and numerical checks.
//!
//! The node, weight and noise code is generic over [`scalar::Real`]
//! (`f32` or `f64`); analysis and simulation run in `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod analysis;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod integrate;
pub mod nodes;
pub mod noise;
pub mod optim;
pub mod scalar;

pub use error::{Result, ZneError};
pub use nodes::SpacingFamily;

pub type NodeSet64 = nodes::NodeSet<f64>;
pub type NodeSet32 = nodes::NodeSet<f32>;
pub type WeightVector64 = nodes::WeightVector<f64>;
pub type WeightVector32 = nodes::WeightVector<f32>;
pub type NoiseModel64 = noise::NoiseModel<f64>;
pub type NoiseModel32 = noise::NoiseModel<f32>;
