// SPDX-License-Identifier: Apache-2.0

//! Richardson estimates, exact bias, shot-noise simulation and fake nodes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::allocation::ShotPlan;
use crate::error::{Result, ZneError};
use crate::nodes::{lagrange_weights, NodeSet, WeightVector};
use crate::noise::NoiseModel;
use crate::scalar::{compensated_dot, compensated_sum, Real};

/// Outcome of one mitigated experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MitigationReport {
    pub estimate: f64,
    /// `estimate - E*` when the model's zero-noise value is known.
    pub bias: Option<f64>,
    /// `sigma / sqrt(N_eff)`.
    pub std_dev: f64,
    pub nodes: Vec<f64>,
    pub gammas: Vec<f64>,
    pub shots: Vec<u64>,
    pub lambda_overhead: f64,
    pub n_eff: f64,
}

/// Monotone reparameterization `S` with `S(0) = 0` and `S(1) = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FakeNodeMap<T> {
    Identity,
    /// `S(x) = x^2`: even-polynomial extrapolation.
    Square,
    /// `S(x) = x^p`, invertible on `[0, inf)` for `p > 0`.
    Power(T),
}

impl<T: Real> FakeNodeMap<T> {
    pub fn forward(&self, x: T) -> T {
        match *self {
            FakeNodeMap::Identity => x,
            FakeNodeMap::Square => x * x,
            FakeNodeMap::Power(p) => x.powf(p),
        }
    }

    pub fn inverse(&self, y: T) -> T {
        match *self {
            FakeNodeMap::Identity => y,
            FakeNodeMap::Square => y.sqrt(),
            FakeNodeMap::Power(p) => y.powf(p.recip()),
        }
    }

    fn check(&self) -> Result<()> {
        if let FakeNodeMap::Power(p) = *self {
            if !(p > T::zero()) || !p.is_finite() {
                return Err(ZneError::InvalidMap(format!("x^{p} is not increasing on [0, inf)")));
            }
        }
        Ok(())
    }
}

/// `R_n = sum_j gamma_j E_j`, accumulated with compensation.
pub fn richardson_estimate<T: Real>(values: &[T], weights: &WeightVector<T>) -> Result<T> {
    if values.len() != weights.gammas.len() {
        return Err(ZneError::ShapeMismatch { expected: weights.gammas.len(), got: values.len() });
    }
    Ok(compensated_dot(values, &weights.gammas))
}

/// Exact model values at every node.
pub fn node_values<T: Real>(model: &NoiseModel<T>, nodes: &NodeSet<T>) -> Result<Vec<T>> {
    nodes.xs().iter().map(|&x| model.evaluate(x)).collect()
}

/// `R_n - E*` from exact model values.
pub fn exact_bias<T: Real>(model: &NoiseModel<T>, nodes: &NodeSet<T>) -> Result<T> {
    let e_star = model.e_star.ok_or(ZneError::BiasUnavailable)?;
    let weights = lagrange_weights(nodes)?;
    let values = node_values(model, nodes)?;
    // E* joins the compensated sum so the final cancellation is not lost
    let terms = values.iter().zip(&weights.gammas).map(|(&v, &g)| v * g).chain(std::iter::once(-e_star));
    Ok(compensated_sum(terms))
}

/// Simulates measuring every node with Gaussian sample-mean noise of standard
/// deviation `sigma / sqrt(N_j)` and extrapolates.
pub fn simulate_experiment(
    model: &NoiseModel<f64>,
    nodes: &NodeSet<f64>,
    plan: &ShotPlan,
    sigma: f64,
    seed: u64,
) -> Result<MitigationReport> {
    simulate_fake_experiment(model, nodes, plan, sigma, seed, FakeNodeMap::Identity)
}

/// [`simulate_experiment`] on fake nodes: node `x~_j` is measured at noise
/// level `S^-1(x~_j)`. The report lists the fake nodes.
pub fn simulate_fake_experiment(
    model: &NoiseModel<f64>,
    fake_nodes: &NodeSet<f64>,
    plan: &ShotPlan,
    sigma: f64,
    seed: u64,
    map: FakeNodeMap<f64>,
) -> Result<MitigationReport> {
    let weights = lagrange_weights(fake_nodes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_with_rng(model, fake_nodes, &weights, plan, sigma, map, &mut rng)
}

/// Same as [`simulate_fake_experiment`] with precomputed weights and a caller-owned generator.
pub fn simulate_with_rng<R: rand::Rng>(
    model: &NoiseModel<f64>,
    nodes: &NodeSet<f64>,
    weights: &WeightVector<f64>,
    plan: &ShotPlan,
    sigma: f64,
    map: FakeNodeMap<f64>,
    rng: &mut R,
) -> Result<MitigationReport> {
    map.check()?;
    let len = nodes.len();
    if weights.gammas.len() != len {
        return Err(ZneError::ShapeMismatch { expected: len, got: weights.gammas.len() });
    }
    if plan.shots.len() != len {
        return Err(ZneError::ShapeMismatch { expected: len, got: plan.shots.len() });
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(ZneError::InvalidParameter(format!("sigma must be finite and >= 0, got {sigma}")));
    }
    let standard = Normal::new(0.0, 1.0).expect("unit normal");
    let mut values = Vec::with_capacity(len);
    let exact_values = fake_node_values(model, nodes, map)?;
    for (j, (&exact, &n)) in exact_values.iter().zip(&plan.shots).enumerate() {
        if n == 0 {
            if weights.gammas[j] != 0.0 {
                return Err(ZneError::ZeroShots { node: j });
            }
            values.push(exact);
            continue;
        }
        let noise = standard.sample(rng) * sigma / (n as f64).sqrt();
        values.push(exact + noise);
    }
    let estimate = richardson_estimate(&values, weights)?;
    let n_eff = plan.n_tot as f64 / weights.overhead();
    Ok(MitigationReport {
        estimate,
        bias: model.e_star.map(|e| estimate - e),
        std_dev: sigma / n_eff.sqrt(),
        nodes: nodes.xs().to_vec(),
        gammas: weights.gammas.clone(),
        shots: plan.shots.clone(),
        lambda_overhead: weights.lambda_overhead,
        n_eff,
    })
}

/// Extrapolates on fake nodes `x~_j` with the model sampled at `S^-1(x~_j)`.
pub fn fake_node_estimate<T: Real>(model: &NoiseModel<T>, fake_nodes: &NodeSet<T>, map: FakeNodeMap<T>) -> Result<T> {
    map.check()?;
    let weights = lagrange_weights(fake_nodes)?;
    let values = fake_node_values(model, fake_nodes, map)?;
    richardson_estimate(&values, &weights)
}

/// Bias of [`fake_node_estimate`] against the model's `E*`.
pub fn fake_node_bias<T: Real>(model: &NoiseModel<T>, fake_nodes: &NodeSet<T>, map: FakeNodeMap<T>) -> Result<T> {
    let e_star = model.e_star.ok_or(ZneError::BiasUnavailable)?;
    map.check()?;
    let weights = lagrange_weights(fake_nodes)?;
    let values = fake_node_values(model, fake_nodes, map)?;
    let terms = values.iter().zip(&weights.gammas).map(|(&v, &g)| v * g).chain(std::iter::once(-e_star));
    Ok(compensated_sum(terms))
}

fn fake_node_values<T: Real>(model: &NoiseModel<T>, fake_nodes: &NodeSet<T>, map: FakeNodeMap<T>) -> Result<Vec<T>> {
    fake_nodes
        .xs()
        .iter()
        .map(|&fake| {
            let real = map.inverse(fake);
            if !real.is_finite() || real < T::zero() {
                return Err(ZneError::InvalidMap(format!("no real node maps to fake node {fake}")));
            }
            model.evaluate(real)
        })
        .collect()
}
