// SPDX-License-Identifier: Apache-2.0

//! Grids, sweeps, node-count selection and numerical optimality checks.

use std::f64::consts::PI;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Result, ZneError};
use crate::estimator::{exact_bias, fake_node_bias, FakeNodeMap};
use crate::nodes::{cn_ratio, lagrange_weights, nodes_for_overhead, solve_gap_for_overhead, NodeSet, SpacingFamily};
use crate::noise::NoiseModel;
use crate::optim::{nelder_mead, SimplexOptions};

/// One cell of the `(n+1)!/C_n` grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub family: SpacingFamily,
    pub n: usize,
    pub lambda: f64,
    pub cn: f64,
    pub ratio: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
}

impl GridResult {
    pub fn get(&self, family: SpacingFamily, n: usize, lambda: f64) -> Option<&GridRow> {
        self.rows.iter().find(|r| r.family == family && r.n == n && r.lambda == lambda)
    }
}

/// `(n+1)!/C_n` for every `(family, n, Lambda)`; each cell solves for `x1`.
///
/// Failing cells keep their error message and carry `NaN` values; the call
/// fails only when every cell failed.
pub fn density_grid(families: &[SpacingFamily], ns: &[usize], lambdas: &[f64]) -> Result<GridResult> {
    let mut rows = Vec::with_capacity(families.len() * ns.len() * lambdas.len());
    for &family in families {
        for &n in ns {
            for &lambda in lambdas {
                let row = match grid_cell(family, n, lambda) {
                    Ok((cn, ratio)) => GridRow { family, n, lambda, cn, ratio, error: None },
                    Err(e) => GridRow {
                        family,
                        n,
                        lambda,
                        cn: f64::NAN,
                        ratio: f64::NAN,
                        error: Some(format!("{family} n={n} lambda={lambda}: {e}")),
                    },
                };
                rows.push(row);
            }
        }
    }
    if !rows.is_empty() && rows.iter().all(|r| r.error.is_some()) {
        return Err(ZneError::AllRowsFailed { first: rows[0].error.clone().unwrap_or_default() });
    }
    Ok(GridResult { rows })
}

fn grid_cell(family: SpacingFamily, n: usize, lambda: f64) -> Result<(f64, f64)> {
    let nodes = nodes_for_overhead(family, n, lambda)?;
    let w = lagrange_weights(&nodes)?;
    Ok((w.ln_cn.exp(), cn_ratio(&w)))
}

/// Node count in `1..=n_max` maximizing `(n+1)!/C_n` at overhead root `lambda`.
/// Ties go to the smaller `n`.
pub fn n_hat(family: SpacingFamily, lambda_overhead: f64, n_max: usize) -> Result<usize> {
    if !(lambda_overhead > 1.0) {
        return Err(ZneError::InvalidParameter(format!("overhead root must be > 1, got {lambda_overhead}")));
    }
    if n_max == 0 {
        return Err(ZneError::InvalidParameter("n_max must be >= 1".into()));
    }
    let mut best: Option<(usize, f64)> = None;
    let mut first_error = None;
    for n in 1..=n_max {
        match grid_cell(family, n, lambda_overhead) {
            Ok((_, ratio)) => {
                if best.is_none_or(|(_, r)| ratio > r) {
                    best = Some((n, ratio));
                }
            }
            Err(e) => {
                warn!("skipping n = {n} for {family} at lambda = {lambda_overhead}: {e}");
                first_error.get_or_insert(e.to_string());
            }
        }
    }
    best.map(|(n, _)| n).ok_or_else(|| ZneError::AllRowsFailed { first: first_error.unwrap_or_default() })
}

/// Noise model used by the sweeps; the closed forms can be scanned in
/// `lambda0` or `eta`, a table only in `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SweepNoise {
    Markovian {
        lambda0: f64,
    },
    #[serde(rename = "nonmarkovian")]
    NonMarkovian {
        eta: f64,
        lambda0: f64,
    },
    Table {
        model: NoiseModel<f64>,
    },
}

/// Which parameter the sweep scans.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SweepAxis {
    Lambda0(Vec<f64>),
    Eta(Vec<f64>),
    /// Scan the node counts in `SweepSpec::ns` at fixed noise.
    N,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Lambda0(_) => "lambda0",
            SweepAxis::Eta(_) => "eta",
            SweepAxis::N => "n",
        }
    }

    /// Default `lambda0` grid: 50 log-spaced points in `[0.01, 1]`.
    pub fn default_lambda0() -> Self {
        SweepAxis::Lambda0(log_grid(0.01, 1.0, 50))
    }

    /// Default `eta` grid: 101 points in `[0, 1]`.
    pub fn default_eta() -> Self {
        SweepAxis::Eta(linear_grid(0.0, 1.0, 101))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub noise: SweepNoise,
    pub axis: SweepAxis,
    pub families: Vec<SpacingFamily>,
    pub lambdas: Vec<f64>,
    pub ns: Vec<usize>,
    /// Also report the bias with fake nodes under `S(x) = x^2`.
    pub fake_square: bool,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ZneError::InvalidParameter(msg));
        if let Some(l) = self.lambdas.iter().find(|l| !(**l > 1.0)) {
            return bad(format!("every overhead root must be > 1, got {l}"));
        }
        let (eta, lambda0) = match self.noise {
            SweepNoise::Markovian { lambda0 } => (0.0, lambda0),
            SweepNoise::NonMarkovian { eta, lambda0 } => (eta, lambda0),
            SweepNoise::Table { .. } if self.axis != SweepAxis::N => {
                return bad(format!("a tabulated curve cannot be swept in {}", self.axis.name()));
            }
            SweepNoise::Table { .. } => (0.0, 1.0),
        };
        if !(lambda0 > 0.0) {
            return bad(format!("lambda0 must be > 0, got {lambda0}"));
        }
        if !(0.0..=1.0).contains(&eta) {
            return bad(format!("eta must lie in [0, 1], got {eta}"));
        }
        match &self.axis {
            SweepAxis::Lambda0(v) if v.iter().any(|l| !(*l > 0.0)) => bad("lambda0 values must be > 0".into()),
            SweepAxis::Eta(v) if v.iter().any(|e| !(0.0..=1.0).contains(e)) => {
                bad("eta values must lie in [0, 1]".into())
            }
            SweepAxis::Eta(_) if matches!(self.noise, SweepNoise::Markovian { .. }) => {
                bad("an eta sweep needs the non-Markovian model".into())
            }
            _ => Ok(()),
        }
    }

    fn model_at(&self, axis_value: f64) -> Result<NoiseModel<f64>> {
        match (&self.noise, &self.axis) {
            (SweepNoise::Table { model }, _) => Ok(model.clone()),
            (SweepNoise::Markovian { .. }, SweepAxis::Lambda0(_)) => NoiseModel::markovian(axis_value),
            (SweepNoise::Markovian { lambda0 }, _) => NoiseModel::markovian(*lambda0),
            (SweepNoise::NonMarkovian { eta, .. }, SweepAxis::Lambda0(_)) => {
                NoiseModel::non_markovian(*eta, axis_value)
            }
            (SweepNoise::NonMarkovian { lambda0, .. }, SweepAxis::Eta(_)) => {
                NoiseModel::non_markovian(axis_value, *lambda0)
            }
            (SweepNoise::NonMarkovian { eta, lambda0 }, SweepAxis::N) => NoiseModel::non_markovian(*eta, *lambda0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasRow {
    pub family: SpacingFamily,
    pub n: usize,
    pub lambda: f64,
    pub axis_name: &'static str,
    pub axis_value: f64,
    pub abs_bias: f64,
    pub abs_bias_unmitigated: f64,
    pub abs_bias_fake_square: Option<f64>,
    pub error: Option<String>,
}

/// `|bias|` for every `(family, n, Lambda, axis value)`, alongside the
/// unmitigated `|E(1) - E*|`.
pub fn bias_sweep(spec: &SweepSpec) -> Result<Vec<BiasRow>> {
    spec.validate()?;
    let mut rows = Vec::new();
    for &family in &spec.families {
        for &n in &spec.ns {
            for &lambda in &spec.lambdas {
                let nodes = nodes_for_overhead(family, n, lambda);
                let axis_values: Vec<f64> = match &spec.axis {
                    SweepAxis::Lambda0(v) | SweepAxis::Eta(v) => v.clone(),
                    SweepAxis::N => vec![n as f64],
                };
                for axis_value in axis_values {
                    let row = nodes
                        .as_ref()
                        .map_err(|e| e.to_string())
                        .and_then(|nodes| bias_cell(spec, nodes, axis_value).map_err(|e| e.to_string()));
                    rows.push(match row {
                        Ok((bias, unmitigated, fake)) => BiasRow {
                            family,
                            n,
                            lambda,
                            axis_name: spec.axis.name(),
                            axis_value,
                            abs_bias: bias,
                            abs_bias_unmitigated: unmitigated,
                            abs_bias_fake_square: fake,
                            error: None,
                        },
                        Err(e) => BiasRow {
                            family,
                            n,
                            lambda,
                            axis_name: spec.axis.name(),
                            axis_value,
                            abs_bias: f64::NAN,
                            abs_bias_unmitigated: f64::NAN,
                            abs_bias_fake_square: None,
                            error: Some(format!(
                                "{family} n={n} lambda={lambda} {}={axis_value}: {e}",
                                spec.axis.name()
                            )),
                        },
                    });
                }
            }
        }
    }
    if !rows.is_empty() && rows.iter().all(|r| r.error.is_some()) {
        return Err(ZneError::AllRowsFailed { first: rows[0].error.clone().unwrap_or_default() });
    }
    Ok(rows)
}

fn bias_cell(spec: &SweepSpec, nodes: &NodeSet<f64>, axis_value: f64) -> Result<(f64, f64, Option<f64>)> {
    let model = spec.model_at(axis_value)?;
    let bias = exact_bias(&model, nodes)?.abs();
    let unmitigated = exact_bias(&model, &NodeSet::unmitigated())?.abs();
    let fake = if spec.fake_square { Some(fake_node_bias(&model, nodes, FakeNodeMap::Square)?.abs()) } else { None };
    Ok((bias, unmitigated, fake))
}

pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp()).collect()
}

pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![lo];
    }
    (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
}

/// Result of one numerical verification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub check: &'static str,
    pub n: usize,
    pub lambda: Option<f64>,
    pub pass: bool,
    pub max_residual: f64,
}

/// Evaluates `Omega_k = sum_{j != k} (2cos^2(j a) + 2cos^2(k a) - d_k0 - d_j0) / (sin^2(j a) - sin^2(k a))`
/// with `a = pi / 2(n+1)` and compares it with `2n(n+1)` for `k = 0` and
/// `-2(n+1)` otherwise.
pub fn omega_values(n: usize) -> Vec<f64> {
    let alpha = PI / (2.0 * (n + 1) as f64);
    let sines: Vec<f64> = (0..=2 * n + 2).map(|m| (m as f64 * alpha).sin()).collect();
    let cos_sq: Vec<f64> = (0..=n).map(|j| (j as f64 * alpha).cos().powi(2)).collect();
    let delta = |i: usize| if i == 0 { 1.0 } else { 0.0 };
    (0..=n)
        .map(|k| {
            let mut sum = 0.0;
            for j in 0..=n {
                if j == k {
                    continue;
                }
                // sin^2(j a) - sin^2(k a) = sin((j-k) a) sin((j+k) a)
                let diff = if j > k { sines[j - k] } else { -sines[k - j] };
                let denom = diff * sines[j + k];
                sum += (2.0 * cos_sq[j] + 2.0 * cos_sq[k] - delta(k) - delta(j)) / denom;
            }
            sum
        })
        .collect()
}

pub fn verify_omega(n: usize) -> Result<CheckResult> {
    if n == 0 {
        return Err(ZneError::InvalidParameter("the Omega identity needs n >= 1".into()));
    }
    let target0 = 2.0 * (n * (n + 1)) as f64;
    let target = -2.0 * (n + 1) as f64;
    let max_residual = omega_values(n)
        .iter()
        .enumerate()
        .map(|(k, &o)| {
            let t = if k == 0 { target0 } else { target };
            ((o - t) / t).abs()
        })
        .fold(0.0f64, f64::max);
    let tol = if n > 200 { 1e-6 } else { 1e-8 };
    Ok(CheckResult { check: "omega", n, lambda: None, pass: max_residual <= tol, max_residual })
}

/// Checks the Lagrange stationarity conditions `mu phi_k = -n C_n` (k = 0) and
/// `mu phi_k = C_n` (k >= 1) for tilted nodes at overhead root `lambda`, with
/// `phi_k = sum_{j != k} ((-1)^j x_j g_j + (-1)^k x_k g_k) / (x_j - x_k)` and
/// `mu = -C_n (x1 - 1) / (2 sin^2(a) x_0 g_0 (n + 1))`.
pub fn stationarity_check(n: usize, lambda: f64) -> Result<CheckResult> {
    if n == 0 {
        return Err(ZneError::InvalidParameter("stationarity needs n >= 1".into()));
    }
    let nodes = nodes_for_overhead(SpacingFamily::TiltedChebyshev, n, lambda)?;
    let w = lagrange_weights(&nodes)?;
    let xs = nodes.xs();
    let g = &w.gammas;
    let alpha = PI / (2.0 * (n + 1) as f64);
    let signed = |j: usize| if j.is_multiple_of(2) { xs[j] * g[j] } else { -xs[j] * g[j] };
    // mu / C_n, so C_n itself never has to be formed
    let mu_over_cn = -(xs[1] - 1.0) / (2.0 * alpha.sin().powi(2) * xs[0] * g[0] * (n + 1) as f64);
    let mut max_residual: f64 = 0.0;
    for k in 0..=n {
        let phi: f64 = (0..=n).filter(|&j| j != k).map(|j| (signed(j) + signed(k)) / (xs[j] - xs[k])).sum();
        let target = if k == 0 { -(n as f64) } else { 1.0 };
        max_residual = max_residual.max(((mu_over_cn * phi - target) / target).abs());
    }
    Ok(CheckResult { check: "stationarity", n, lambda: Some(lambda), pass: max_residual <= 1e-8, max_residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// No start converged; says nothing about the nodes.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalityCheck {
    pub n: usize,
    pub lambda: f64,
    pub verdict: Verdict,
    pub best_cn: f64,
    pub tilted_cn: f64,
    pub best_nodes: Vec<f64>,
    pub tilted_nodes: Vec<f64>,
    /// Largest `|x_best / x_tilted - 1|`.
    pub max_node_deviation: f64,
    pub converged_starts: usize,
}

impl OptimalityCheck {
    pub fn as_check_result(&self) -> CheckResult {
        let cn_gap = ((self.tilted_cn - self.best_cn) / self.tilted_cn).max(0.0);
        CheckResult {
            check: "optimality",
            n: self.n,
            lambda: Some(self.lambda),
            pass: self.verdict == Verdict::Pass,
            max_residual: self.max_node_deviation.max(cn_gap),
        }
    }
}

/// Nodes `1, 1 + s c_1, ..., 1 + s c_n` with offsets `c_1 = 1`,
/// `c_{k+1} = c_k + exp(u_k)` and `s` chosen to meet the overhead root.
fn shaped_nodes(log_gaps: &[f64], lambda: f64) -> Result<NodeSet<f64>> {
    let mut offsets = Vec::with_capacity(log_gaps.len() + 2);
    offsets.push(0.0);
    offsets.push(1.0);
    for u in log_gaps {
        let last = *offsets.last().expect("non-empty");
        offsets.push(last + u.exp());
    }
    if offsets.iter().any(|c| !c.is_finite()) {
        return Err(ZneError::InvalidParameter("gap overflow".into()));
    }
    let build = |s: f64| NodeSet::new(offsets.iter().map(|c| 1.0 + s * c).collect());
    let scale = solve_gap_for_overhead(build, lambda)?;
    build(scale)
}

/// Minimizes `C_n` subject to `sum |gamma_j| = lambda` and `x_0 = 1` by
/// downhill simplex over log-gap ratios from `starts` seeded random points, and
/// compares the best node set with the tilted Chebyshev nodes.
pub fn verify_optimality(n: usize, lambda: f64, starts: usize, seed: u64) -> Result<OptimalityCheck> {
    if n == 0 {
        return Err(ZneError::InvalidParameter("optimality needs n >= 1".into()));
    }
    if !(lambda > 1.0) {
        return Err(ZneError::InvalidParameter(format!("overhead root must be > 1, got {lambda}")));
    }
    let tilted = nodes_for_overhead(SpacingFamily::TiltedChebyshev, n, lambda)?;
    let tilted_ln_cn = lagrange_weights(&tilted)?.ln_cn;

    let objective = |u: &[f64]| -> f64 {
        match shaped_nodes(u, lambda).and_then(|nodes| lagrange_weights(&nodes)) {
            Ok(w) => w.ln_cn,
            Err(_) => f64::INFINITY,
        }
    };
    let opts = SimplexOptions { step: 0.5, f_tol: 1e-15, x_tol: 1e-10, max_iter: 20_000 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut converged_starts = 0;
    for _ in 0..starts.max(1) {
        let start: Vec<f64> = (0..n - 1).map(|_| StandardNormal.sample(&mut rng)).collect();
        let res = nelder_mead(objective, &start, opts);
        if !res.converged || !res.value.is_finite() {
            continue;
        }
        converged_starts += 1;
        if best.as_ref().is_none_or(|(v, _)| res.value < *v) {
            best = Some((res.value, res.x));
        }
    }

    let tilted_cn = tilted_ln_cn.exp();
    let Some((best_ln_cn, best_u)) = best else {
        return Ok(OptimalityCheck {
            n,
            lambda,
            verdict: Verdict::Inconclusive,
            best_cn: f64::NAN,
            tilted_cn,
            best_nodes: Vec::new(),
            tilted_nodes: tilted.xs().to_vec(),
            max_node_deviation: f64::NAN,
            converged_starts,
        });
    };
    let best_nodes = shaped_nodes(&best_u, lambda)?;
    let max_node_deviation =
        best_nodes.xs().iter().zip(tilted.xs()).map(|(b, t)| (b / t - 1.0).abs()).fold(0.0f64, f64::max);
    let no_lower = best_ln_cn >= tilted_ln_cn + (1.0 - 1e-6f64).ln();
    let verdict = if no_lower && max_node_deviation <= 1e-4 { Verdict::Pass } else { Verdict::Fail };
    Ok(OptimalityCheck {
        n,
        lambda,
        verdict,
        best_cn: best_ln_cn.exp(),
        tilted_cn,
        best_nodes: best_nodes.xs().to_vec(),
        tilted_nodes: tilted.xs().to_vec(),
        max_node_deviation,
        converged_starts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ln_factorial;

    #[test]
    fn omega_small_cases() {
        let o = omega_values(1);
        assert!((o[0] - 4.0).abs() < 1e-12 && (o[1] + 4.0).abs() < 1e-12);
        let o = omega_values(2);
        assert!((o[0] - 12.0).abs() < 1e-12);
        assert!((o[1] + 6.0).abs() < 1e-12 && (o[2] + 6.0).abs() < 1e-12);
        for n in 1..=60 {
            assert!(verify_omega(n).unwrap().pass);
        }
        assert!(verify_omega(0).is_err());
    }

    #[test]
    fn stationarity_holds_for_tilted_nodes() {
        for n in [1, 2, 5, 13, 50] {
            for lambda in [4.0, 32.0, 256.0] {
                let c = stationarity_check(n, lambda).unwrap();
                assert!(c.pass, "n={n} lambda={lambda}: {}", c.max_residual);
            }
        }
    }

    #[test]
    fn grid_unmitigated_row_and_direct_product() {
        let g = density_grid(&SpacingFamily::ALL, &[0], &[4.0]).unwrap();
        assert!(g.rows.iter().all(|r| r.ratio == 1.0 && r.cn == 1.0));

        let g = density_grid(&[SpacingFamily::TiltedChebyshev], &[2], &[7.0]).unwrap();
        let row = &g.rows[0];
        let nodes = nodes_for_overhead(SpacingFamily::TiltedChebyshev, 2, 7.0).unwrap();
        let product: f64 = nodes.xs().iter().product();
        assert!((row.cn - product).abs() <= 1e-12 * product);
        assert!((row.ratio - 6.0 / product).abs() <= 1e-12 * row.ratio);
        assert!(row.ratio > 0.0);
    }

    #[test]
    fn grid_records_row_failures() {
        // Lambda <= 1 has no solution for n >= 1, but n = 0 is always fine
        let g = density_grid(&[SpacingFamily::Linear], &[0, 2], &[1.0]).unwrap();
        assert!(g.rows[0].error.is_none());
        assert!(g.rows[1].error.as_deref().unwrap().contains("linear n=2"));
        assert!(g.rows[1].ratio.is_nan());
        assert!(matches!(density_grid(&[SpacingFamily::Linear], &[2], &[1.0]), Err(ZneError::AllRowsFailed { .. })));
    }

    #[test]
    fn ratio_grows_with_overhead() {
        let lambdas = [2.0, 4.0, 8.0, 32.0, 256.0];
        let g = density_grid(&SpacingFamily::ALL, &[1, 3, 6, 10], &lambdas).unwrap();
        for family in SpacingFamily::ALL {
            for n in [1, 3, 6, 10] {
                let ratios: Vec<f64> = lambdas.iter().map(|&l| g.get(family, n, l).unwrap().ratio).collect();
                assert!(ratios.windows(2).all(|w| w[1] > w[0]), "{family} n={n}: {ratios:?}");
            }
        }
    }

    #[test]
    fn n_hat_guidance() {
        assert_eq!(n_hat(SpacingFamily::TiltedChebyshev, 4.0, 15).unwrap(), 1);
        assert!([2, 3].contains(&n_hat(SpacingFamily::TiltedChebyshev, 32.0, 15).unwrap()));
        assert!([5, 6].contains(&n_hat(SpacingFamily::TiltedChebyshev, 256.0, 15).unwrap()));
        assert!(n_hat(SpacingFamily::TiltedChebyshev, 1.0, 5).is_err());
        assert!(n_hat(SpacingFamily::TiltedChebyshev, 4.0, 0).is_err());
    }

    #[test]
    fn ln_factorial_consistency() {
        let w = lagrange_weights(&NodeSet::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap()).unwrap();
        assert!((cn_ratio(&w) - (ln_factorial(4) - 24f64.ln()).exp()).abs() < 1e-14);
    }

    #[test]
    fn optimality_oracle_two_interior_shapes() {
        let c = verify_optimality(2, 7.0, 10, 1).unwrap();
        assert_eq!(c.verdict, Verdict::Pass, "{c:?}");
        // x_2 - 1 = 3 (x_1 - 1)
        let x = &c.best_nodes;
        assert!(((x[2] - 1.0) / (x[1] - 1.0) - 3.0).abs() < 1e-3);
        let c = verify_optimality(3, 10.0, 10, 2).unwrap();
        assert_eq!(c.verdict, Verdict::Pass, "{c:?}");
        assert!(((c.best_cn - c.tilted_cn) / c.tilted_cn).abs() < 1e-6);
    }

    #[test]
    fn tilted_product_falls_toward_one_with_spread() {
        // larger x1 means smaller Lambda and larger C_n; shrinking Lambda toward 1 must grow C_n
        let mut last = 0.0;
        for lambda in [64.0, 16.0, 4.0, 2.0, 1.2] {
            let w = lagrange_weights(&nodes_for_overhead(SpacingFamily::TiltedChebyshev, 2, lambda).unwrap()).unwrap();
            assert!(w.cn > last);
            assert!(w.cn > 1.0);
            last = w.cn;
        }
    }

    #[test]
    fn sweep_validation() {
        let mut spec = SweepSpec {
            noise: SweepNoise::Markovian { lambda0: 0.4 },
            axis: SweepAxis::default_eta(),
            families: vec![SpacingFamily::TiltedChebyshev],
            lambdas: vec![4.0],
            ns: vec![2],
            fake_square: false,
        };
        assert!(bias_sweep(&spec).is_err());
        spec.axis = SweepAxis::N;
        spec.lambdas = vec![0.5];
        assert!(bias_sweep(&spec).is_err());
        spec.lambdas = vec![4.0];
        let rows = bias_sweep(&spec).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].axis_name, "n");
        assert_eq!(rows[0].axis_value, 2.0);
        assert!((rows[0].abs_bias_unmitigated - (1.0 - (-0.4f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn sweep_rows_are_ordered_and_deterministic() {
        let spec = SweepSpec {
            noise: SweepNoise::NonMarkovian { eta: 0.5, lambda0: 0.4 },
            axis: SweepAxis::Eta(linear_grid(0.0, 1.0, 5)),
            families: vec![SpacingFamily::TiltedChebyshev, SpacingFamily::Linear],
            lambdas: vec![4.0, 32.0],
            ns: vec![4, 9],
            fake_square: true,
        };
        let a = bias_sweep(&spec).unwrap();
        assert_eq!(a, bias_sweep(&spec).unwrap());
        assert_eq!(a.len(), 2 * 2 * 2 * 5);
        assert_eq!(a[0].family, SpacingFamily::TiltedChebyshev);
        assert_eq!((a[0].n, a[0].lambda, a[0].axis_value), (4, 4.0, 0.0));
        assert_eq!(a[4].axis_value, 1.0);
        assert!(a.iter().all(|r| r.abs_bias_fake_square.is_some()));
    }

    #[test]
    fn grids() {
        let g = log_grid(0.01, 1.0, 50);
        assert_eq!(g.len(), 50);
        assert!((g[0] - 0.01).abs() < 1e-15 && (g[49] - 1.0).abs() < 1e-14);
        let e = linear_grid(0.0, 1.0, 101);
        assert_eq!(e[100], 1.0);
        assert!((e[10] - 0.1).abs() < 1e-15);
    }
}
