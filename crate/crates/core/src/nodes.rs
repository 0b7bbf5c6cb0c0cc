// SPDX-License-Identifier: Apache-2.0

//! Node sets, Lagrange extrapolation weights and the overhead solver.
//!
//! A node set is an ordered list of noise amplification factors
//! `1 = x_0 < x_1 < ... < x_n`. Extrapolating the polynomial through the
//! samples at these nodes to `x = 0` is a weighted sum with weights
//! `gamma_j = prod_{k != j} x_k / (x_k - x_j)`. The sum of their magnitudes is
//! the overhead root `Lambda`, and the product of the nodes `C_n` controls the
//! bias bound.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ZneError};
use crate::scalar::{compensated_sum, ln_factorial, Real};

/// Largest `n` for which weights are evaluated by direct products.
const DIRECT_PRODUCT_MAX_N: usize = 8;
/// Upper end of the bracket search for `x1`.
const X1_LIMIT: f64 = 1e9;
const SOLVER_MAX_ITER: usize = 200;

/// Node spacing rule. Every family is parameterized by `n` and `x1` alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpacingFamily {
    /// Equal steps: `x_j = 1 + j (x1 - 1)`.
    Linear,
    /// Powers: `x_j = x1^j`.
    Exponential,
    /// Extrema of the Chebyshev polynomial of order `n`, anchored at 1.
    #[serde(rename = "chebyshev")]
    ChebyshevExtremal,
    /// Extremal Chebyshev nodes of order `n + 1` with the last node dropped.
    #[serde(rename = "tilted")]
    TiltedChebyshev,
}

impl SpacingFamily {
    pub const ALL: [SpacingFamily; 4] = [
        SpacingFamily::Linear,
        SpacingFamily::Exponential,
        SpacingFamily::ChebyshevExtremal,
        SpacingFamily::TiltedChebyshev,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SpacingFamily::Linear => "linear",
            SpacingFamily::Exponential => "exponential",
            SpacingFamily::ChebyshevExtremal => "chebyshev",
            SpacingFamily::TiltedChebyshev => "tilted",
        }
    }
}

impl fmt::Display for SpacingFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpacingFamily {
    type Err = ZneError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" | "l" => Ok(SpacingFamily::Linear),
            "exponential" | "exp" | "e" => Ok(SpacingFamily::Exponential),
            "chebyshev" | "extremal" | "c" => Ok(SpacingFamily::ChebyshevExtremal),
            "tilted" | "t" => Ok(SpacingFamily::TiltedChebyshev),
            other => Err(ZneError::InvalidParameter(format!(
                "unknown spacing family '{other}' (expected linear, exponential, chebyshev or tilted)"
            ))),
        }
    }
}

/// Ordered amplification factors starting at exactly 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeSet<T> {
    xs: Vec<T>,
    family: Option<SpacingFamily>,
}

impl<T: Real> NodeSet<T> {
    /// Builds a node set from a raw list, checking `x_0 = 1` and strict ordering.
    pub fn new(xs: Vec<T>) -> Result<Self> {
        Self::validated(xs, None)
    }

    fn validated(xs: Vec<T>, family: Option<SpacingFamily>) -> Result<Self> {
        let Some(&first) = xs.first() else {
            return Err(ZneError::InvalidNodes("empty node list".into()));
        };
        if first != T::one() {
            return Err(ZneError::InvalidNodes(format!("x_0 must be 1, got {first}")));
        }
        for (j, w) in xs.windows(2).enumerate() {
            if !w[1].is_finite() {
                return Err(ZneError::InvalidNodes(format!("x_{} is not finite", j + 1)));
            }
            if w[1] <= w[0] {
                return Err(ZneError::InvalidNodes(format!(
                    "nodes must be strictly increasing: x_{} = {} >= x_{} = {}",
                    j,
                    w[0],
                    j + 1,
                    w[1]
                )));
            }
        }
        Ok(NodeSet { xs, family })
    }

    /// The single node `x_0 = 1` (the unmitigated estimator).
    pub fn unmitigated() -> Self {
        NodeSet { xs: vec![T::one()], family: None }
    }

    pub fn xs(&self) -> &[T] {
        &self.xs
    }

    pub fn family(&self) -> Option<SpacingFamily> {
        self.family
    }

    /// Index `n`; the set holds `n + 1` nodes.
    pub fn n(&self) -> usize {
        self.xs.len() - 1
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Largest node `x_n`.
    pub fn max(&self) -> T {
        *self.xs.last().expect("node set is never empty")
    }
}

/// Lagrange extrapolation weights at `x = 0` with derived summaries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightVector<T> {
    pub gammas: Vec<T>,
    /// `Lambda = sum |gamma_j|`.
    pub lambda_overhead: T,
    /// `C_n = prod x_j`; may be `inf` in narrow precision, see `ln_cn`.
    pub cn: T,
    pub ln_cn: f64,
}

impl<T: Real> WeightVector<T> {
    pub fn n(&self) -> usize {
        self.gammas.len() - 1
    }

    /// Sampling overhead `Lambda^2`.
    pub fn overhead(&self) -> T {
        self.lambda_overhead * self.lambda_overhead
    }
}

/// Computes `gamma_j = prod_{k != j} x_k / (x_k - x_j)`.
///
/// Small sets use direct products; above `n = 8` log-magnitudes and signs are
/// accumulated separately so wide node ranges neither overflow nor underflow.
pub fn lagrange_weights<T: Real>(nodes: &NodeSet<T>) -> Result<WeightVector<T>> {
    let xs = nodes.xs();
    let n = nodes.n();
    let rel = T::lit(1e-12).max(T::epsilon());
    for (j, w) in xs.windows(2).enumerate() {
        if (w[1] - w[0]) <= rel * w[1].abs() {
            return Err(ZneError::DegenerateNodes { i: j, j: j + 1, xi: w[0].as_f64(), xj: w[1].as_f64() });
        }
    }

    let gammas: Vec<T> = if n <= DIRECT_PRODUCT_MAX_N {
        (0..=n)
            .map(|j| {
                xs.iter().enumerate().filter(|&(k, _)| k != j).fold(T::one(), |acc, (_, &xk)| acc * (xk / (xk - xs[j])))
            })
            .collect()
    } else {
        (0..=n)
            .map(|j| {
                let mut log_mag = T::zero();
                let mut negative = false;
                for (k, &xk) in xs.iter().enumerate() {
                    if k == j {
                        continue;
                    }
                    let d = xk - xs[j];
                    log_mag += xk.abs().ln() - d.abs().ln();
                    negative ^= (d < T::zero()) != (xk < T::zero());
                }
                let mag = log_mag.exp();
                if negative {
                    -mag
                } else {
                    mag
                }
            })
            .collect()
    };

    let lambda_overhead = compensated_sum(gammas.iter().map(|g| g.abs()));
    let ln_cn: f64 = xs.iter().map(|x| x.as_f64().ln()).sum();
    let cn = xs.iter().fold(T::one(), |acc, &x| acc * x);
    Ok(WeightVector { gammas, lambda_overhead, cn, ln_cn })
}

/// Builds the `n + 1` nodes of `family` with first step `x1`.
pub fn make_nodes<T: Real>(family: SpacingFamily, n: usize, x1: T) -> Result<NodeSet<T>> {
    if n == 0 {
        let mut set = NodeSet::unmitigated();
        set.family = Some(family);
        return Ok(set);
    }
    if !(x1 > T::one()) || !x1.is_finite() {
        return Err(ZneError::InvalidParameter(format!("x1 must be finite and > 1, got {x1}")));
    }
    let step = x1 - T::one();
    let xs: Vec<T> = match family {
        SpacingFamily::Linear => (0..=n).map(|j| T::one() + T::from_count(j) * step).collect(),
        SpacingFamily::Exponential => {
            let mut xs = Vec::with_capacity(n + 1);
            let mut x = T::one();
            for _ in 0..=n {
                xs.push(x);
                x *= x1;
            }
            xs
        }
        SpacingFamily::ChebyshevExtremal => sine_squared_nodes(n, n, step),
        SpacingFamily::TiltedChebyshev => sine_squared_nodes(n, n + 1, step),
    };
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(ZneError::InvalidParameter(format!("{family} nodes with n = {n}, x1 = {x1} overflow")));
    }
    NodeSet::validated(xs, Some(family))
}

/// `x_j = 1 + sin^2(j pi / 2m) / sin^2(pi / 2m) * step` for `j = 0..=n`.
fn sine_squared_nodes<T: Real>(n: usize, m: usize, step: T) -> Vec<T> {
    let alpha = T::FRAC_PI_2() / T::from_count(m);
    let base = alpha.sin().powi(2);
    (0..=n)
        .map(|j| match j {
            0 => T::one(),
            1 => T::one() + step,
            _ => T::one() + (T::from_count(j) * alpha).sin().powi(2) / base * step,
        })
        .collect()
}

/// Overhead root `Lambda(x1)` for a family.
pub fn overhead_for<T: Real>(family: SpacingFamily, n: usize, x1: T) -> Result<T> {
    let nodes = make_nodes(family, n, x1)?;
    Ok(lagrange_weights(&nodes)?.lambda_overhead)
}

/// Finds `x1` such that the family's nodes have `sum |gamma_j| = lambda_target`.
///
/// `Lambda` diverges as `x1 -> 1` and tends to 1 as `x1 -> inf`. The gap
/// `x1 - 1` is bracketed geometrically and then bisected.
pub fn solve_x1_for_overhead<T: Real>(family: SpacingFamily, n: usize, lambda_target: T) -> Result<T> {
    if n == 0 {
        return Err(ZneError::InvalidParameter("the overhead solver needs n >= 1".into()));
    }
    let gap =
        solve_gap_for_overhead(|gap| make_nodes(family, n, T::one() + gap), lambda_target).map_err(|e| match e {
            ZneError::NoSolution { target, limit, .. } => {
                ZneError::NoSolution { family: family.to_string(), n, target, limit }
            }
            other => other,
        })?;
    Ok(T::one() + gap)
}

/// Solves `Lambda(build(gap)) = lambda_target` for a node-set builder whose
/// overhead decreases monotonically in `gap > 0`.
pub fn solve_gap_for_overhead<T, F>(build: F, lambda_target: T) -> Result<T>
where
    T: Real,
    F: Fn(T) -> Result<NodeSet<T>>,
{
    if !(lambda_target > T::one()) || !lambda_target.is_finite() {
        return Err(ZneError::InvalidParameter(format!(
            "target overhead root must be finite and > 1, got {lambda_target}"
        )));
    }
    // true when the gap is too small, i.e. Lambda is still above the target
    let too_tight = |gap: T| -> bool {
        match build(gap).and_then(|nodes| lagrange_weights(&nodes)) {
            Ok(w) => w.lambda_overhead.is_nan() || w.lambda_overhead >= lambda_target,
            Err(_) => true,
        }
    };
    let no_solution =
        || ZneError::NoSolution { family: "custom".into(), n: 0, target: lambda_target.as_f64(), limit: X1_LIMIT };
    let two = T::lit(2.0);
    let limit = T::lit(X1_LIMIT);
    let tiny = T::min_positive_value().sqrt();

    let (mut lo, mut hi);
    let mut gap = T::one();
    if too_tight(gap) {
        loop {
            lo = gap;
            gap *= two;
            if T::one() + gap > limit {
                return Err(no_solution());
            }
            if !too_tight(gap) {
                hi = gap;
                break;
            }
        }
    } else {
        loop {
            hi = gap;
            gap /= two;
            if gap < tiny {
                return Err(no_solution());
            }
            if too_tight(gap) {
                lo = gap;
                break;
            }
        }
    }

    // bisect to full precision; the bracket ratio is at most 2
    for _ in 0..SOLVER_MAX_ITER {
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        if too_tight(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / two)
}

/// Convenience: solve for `x1` and build the nodes in one step.
pub fn nodes_for_overhead<T: Real>(family: SpacingFamily, n: usize, lambda_target: T) -> Result<NodeSet<T>> {
    if n == 0 {
        let mut set = NodeSet::unmitigated();
        set.family = Some(family);
        return Ok(set);
    }
    let x1 = solve_x1_for_overhead(family, n, lambda_target)?;
    make_nodes(family, n, x1)
}

/// Bias figure of merit `(n + 1)! / C_n`, evaluated in log space.
pub fn cn_ratio<T: Real>(weights: &WeightVector<T>) -> T {
    T::lit((ln_factorial(weights.n() + 1) - weights.ln_cn).exp())
}
