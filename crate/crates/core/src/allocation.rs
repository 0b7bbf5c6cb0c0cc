// SPDX-License-Identifier: Apache-2.0

//! Shot allocation proportional to `|gamma_j|`.
//!
//! With `N_j = N_tot |gamma_j| / Lambda` the estimator variance is
//! `sigma^2 Lambda^2 / N_tot`, independent of the number of nodes.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ZneError};
use crate::nodes::WeightVector;
use crate::scalar::Real;

/// Integer measurement counts per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotPlan {
    pub shots: Vec<u64>,
    pub n_tot: u64,
    /// `N_tot / Lambda^2`.
    pub n_eff: f64,
    /// `Lambda^2`.
    pub overhead: f64,
}

impl ShotPlan {
    pub fn min_shots(&self) -> u64 {
        self.shots.iter().copied().min().unwrap_or(0)
    }
}

/// Real-valued optimal allocation `N_tot |gamma_j| / Lambda` before rounding.
pub fn ideal_allocation<T: Real>(weights: &WeightVector<T>, n_tot: f64) -> Vec<f64> {
    let lambda = weights.lambda_overhead.as_f64();
    weights.gammas.iter().map(|g| n_tot * g.as_f64().abs() / lambda).collect()
}

/// Allocates `n_tot` shots with a floor of one shot per weighted node.
pub fn allocate_shots<T: Real>(weights: &WeightVector<T>, n_tot: u64) -> Result<ShotPlan> {
    allocate_shots_with_floor(weights, n_tot, 1)
}

/// Allocates `n_tot` shots by largest-remainder apportionment of the optimal
/// real allocation, then raises every weighted node below `floor` by taking
/// shots from the currently largest allocation.
pub fn allocate_shots_with_floor<T: Real>(weights: &WeightVector<T>, n_tot: u64, floor: u64) -> Result<ShotPlan> {
    let nodes = weights.gammas.len();
    if n_tot < nodes as u64 * floor.max(1) {
        return Err(ZneError::InsufficientBudget { n_tot, nodes, floor: floor.max(1) });
    }
    let targets = ideal_allocation(weights, n_tot as f64);
    let mut shots: Vec<u64> = targets.iter().map(|t| t.floor() as u64).collect();
    let assigned: u64 = shots.iter().sum();
    // float rounding can leave the floors a hair above the budget
    let mut remaining = n_tot as i64 - assigned as i64;
    while remaining < 0 {
        let j = argmax(&shots);
        shots[j] -= 1;
        remaining += 1;
    }
    let mut order: Vec<usize> = (0..nodes).collect();
    order.sort_by(|&a, &b| {
        let fa = targets[a] - targets[a].floor();
        let fb = targets[b] - targets[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &j in order.iter().cycle().take(remaining as usize) {
        shots[j] += 1;
    }

    for j in 0..nodes {
        if weights.gammas[j].is_zero() {
            continue;
        }
        while shots[j] < floor {
            let donor = argmax(&shots);
            if donor == j || shots[donor] <= floor {
                break;
            }
            shots[donor] -= 1;
            shots[j] += 1;
        }
    }

    let overhead = weights.overhead().as_f64();
    Ok(ShotPlan { shots, n_tot, n_eff: n_tot as f64 / overhead, overhead })
}

fn argmax(values: &[u64]) -> usize {
    let mut best = 0;
    for (j, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = j;
        }
    }
    best
}

/// `sum_j gamma_j^2 sigma^2 / N_j` with a common `sigma`.
pub fn estimator_variance<T: Real>(weights: &WeightVector<T>, plan: &ShotPlan, sigma: f64) -> Result<f64> {
    let sigmas = vec![sigma; weights.gammas.len()];
    estimator_variance_per_node(weights, plan, &sigmas)
}

/// `sum_j gamma_j^2 sigma_j^2 / N_j` with per-node standard deviations.
pub fn estimator_variance_per_node<T: Real>(weights: &WeightVector<T>, plan: &ShotPlan, sigmas: &[f64]) -> Result<f64> {
    let nodes = weights.gammas.len();
    if plan.shots.len() != nodes {
        return Err(ZneError::ShapeMismatch { expected: nodes, got: plan.shots.len() });
    }
    if sigmas.len() != nodes {
        return Err(ZneError::ShapeMismatch { expected: nodes, got: sigmas.len() });
    }
    if let Some(s) = sigmas.iter().find(|s| !(**s >= 0.0)) {
        return Err(ZneError::InvalidParameter(format!("sigma must be >= 0, got {s}")));
    }
    let mut var = 0.0;
    for (j, ((g, &n), &s)) in weights.gammas.iter().zip(&plan.shots).zip(sigmas).enumerate() {
        let g = g.as_f64();
        if g == 0.0 {
            continue;
        }
        if n == 0 {
            return Err(ZneError::ZeroShots { node: j });
        }
        var += g * g * s * s / n as f64;
    }
    Ok(var)
}

/// Variance under the unrounded optimal allocation: `sigma^2 Lambda^2 / N_tot`.
pub fn ideal_variance<T: Real>(weights: &WeightVector<T>, n_tot: f64, sigma: f64) -> f64 {
    sigma * sigma * weights.overhead().as_f64() / n_tot
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nodes::{lagrange_weights, nodes_for_overhead, NodeSet, SpacingFamily};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn weights(xs: &[f64]) -> WeightVector<f64> {
        lagrange_weights(&NodeSet::new(xs.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn three_node_allocation() {
        let w = weights(&[1.0, 2.0, 3.0]);
        let plan = allocate_shots(&w, 700).unwrap();
        assert_eq!(plan.shots, vec![300, 300, 100]);
        assert!((plan.n_eff - 700.0 / 49.0).abs() < 1e-12);
        assert_eq!(plan.overhead, 49.0);
    }

    #[test]
    fn unmitigated_allocation() {
        let w = weights(&[1.0]);
        let plan = allocate_shots(&w, 1000).unwrap();
        assert_eq!(plan.shots, vec![1000]);
        assert_eq!(plan.n_eff, 1000.0);
    }

    #[test]
    fn largest_remainder_two_nodes() {
        // targets 266.67 and 133.33
        let plan = allocate_shots(&weights(&[1.0, 2.0]), 400).unwrap();
        assert_eq!(plan.shots, vec![267, 133]);
    }

    #[test]
    fn overhead_from_budgets() {
        // N_tot = 1e6 with N_eff = 1024 means Lambda = sqrt(N_tot / N_eff)
        let lambda = (1e6f64 / 1024.0).sqrt();
        assert!((lambda * lambda - 976.5625).abs() < 1e-9);
        assert!((lambda - 32.0).abs() < 1.0);
    }

    #[test]
    fn insufficient_budget() {
        let w = weights(&[1.0, 2.0, 3.0]);
        assert!(matches!(allocate_shots(&w, 2), Err(ZneError::InsufficientBudget { .. })));
        assert!(matches!(allocate_shots_with_floor(&w, 20, 10), Err(ZneError::InsufficientBudget { .. })));
    }

    #[test]
    fn floor_raises_starved_nodes() {
        let nodes = nodes_for_overhead(SpacingFamily::TiltedChebyshev, 9, 4.0).unwrap();
        let w = lagrange_weights(&nodes).unwrap();
        let plan = allocate_shots(&w, 10).unwrap();
        assert_eq!(plan.shots.iter().sum::<u64>(), 10);
        assert!(plan.shots.iter().all(|&s| s >= 1));

        let plan = allocate_shots_with_floor(&w, 1000, 50).unwrap();
        assert_eq!(plan.shots.iter().sum::<u64>(), 1000);
        assert!(plan.shots.iter().all(|&s| s >= 50));
    }

    #[test]
    fn variance_examples() {
        let w = weights(&[1.0, 2.0, 3.0]);
        let plan = ShotPlan { shots: vec![300, 300, 100], n_tot: 700, n_eff: 700.0 / 49.0, overhead: 49.0 };
        let v = estimator_variance(&w, &plan, 1.0).unwrap();
        assert!((v - 0.07).abs() < 1e-15);
        assert!((v - 49.0 / 700.0).abs() < 1e-15);
        assert_eq!(estimator_variance(&w, &plan, 0.0).unwrap(), 0.0);

        let w = weights(&[1.0]);
        let plan = allocate_shots(&w, 250).unwrap();
        assert!((estimator_variance(&w, &plan, 0.3).unwrap() - 0.09 / 250.0).abs() < 1e-18);
    }

    #[test]
    fn variance_errors() {
        let w = weights(&[1.0, 2.0]);
        let plan = ShotPlan { shots: vec![10, 0], n_tot: 10, n_eff: 10.0 / 9.0, overhead: 9.0 };
        assert!(matches!(estimator_variance(&w, &plan, 1.0), Err(ZneError::ZeroShots { node: 1 })));
        let plan = ShotPlan { shots: vec![10], n_tot: 10, n_eff: 1.0, overhead: 9.0 };
        assert!(matches!(estimator_variance(&w, &plan, 1.0), Err(ZneError::ShapeMismatch { .. })));
        let plan = allocate_shots(&w, 100).unwrap();
        assert!(estimator_variance(&w, &plan, -1.0).is_err());
    }

    #[test]
    fn per_node_sigma_reduces_to_constant() {
        let w = weights(&[1.0, 1.7, 2.9]);
        let plan = allocate_shots(&w, 5000).unwrap();
        let a = estimator_variance(&w, &plan, 0.8).unwrap();
        let b = estimator_variance_per_node(&w, &plan, &[0.8, 0.8, 0.8]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ideal_allocation_is_minimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for family in SpacingFamily::ALL {
            for n in [1, 3, 6] {
                let w = lagrange_weights(&nodes_for_overhead(family, n, 8.0).unwrap()).unwrap();
                let n_tot = 10_000.0;
                let ideal = ideal_allocation(&w, n_tot);
                let var = |alloc: &[f64]| -> f64 { w.gammas.iter().zip(alloc).map(|(g, a)| g * g / a).sum() };
                let best = var(&ideal);
                assert!((best - ideal_variance(&w, n_tot, 1.0)).abs() <= 1e-12 * best);
                for _ in 0..100 {
                    let mut alloc: Vec<f64> = ideal.iter().map(|a| a * rng.gen_range(0.5..1.5)).collect();
                    let s: f64 = alloc.iter().sum();
                    alloc.iter_mut().for_each(|a| *a *= n_tot / s);
                    assert!(var(&alloc) >= best * (1.0 - 1e-12));
                }
            }
        }
    }

    #[test]
    fn ideal_variance_independent_of_n() {
        for family in SpacingFamily::ALL {
            for n in 1..=12 {
                let w = lagrange_weights(&nodes_for_overhead(family, n, 32.0).unwrap()).unwrap();
                let v = ideal_variance(&w, 1e6, 1.0);
                assert!((v - 1024.0 / 1e6).abs() <= 1e-7 * v);
            }
        }
    }

    proptest! {
        #[test]
        fn allocation_totals_and_rounding_bound(n in 0usize..=9, target in 2.0f64..64.0, n_tot in 10u64..200_000) {
            let family = SpacingFamily::TiltedChebyshev;
            let w = lagrange_weights(&nodes_for_overhead(family, n, target).unwrap()).unwrap();
            prop_assume!(n_tot > n as u64);
            let plan = allocate_shots(&w, n_tot).unwrap();
            prop_assert_eq!(plan.shots.iter().sum::<u64>(), n_tot);
            prop_assert!(plan.shots.iter().all(|&s| s >= 1));
            prop_assert!(plan.n_eff <= n_tot as f64);
            if plan.min_shots() >= 20 {
                let rounded = estimator_variance(&w, &plan, 1.0).unwrap();
                let ideal = ideal_variance(&w, n_tot as f64, 1.0);
                prop_assert!(rounded <= 1.05 * ideal);
            }
        }
    }
}
