// SPDX-License-Identifier: Apache-2.0

//! Noisy expectation curves `E(x)` as a function of the amplification factor.

mod master_equation;

use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::error::{Result, ZneError};
use crate::scalar::Real;

pub use master_equation::{integrate_toy_model, ode_oracle_nonmarkovian, OracleRun};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseKind<T> {
    /// `E* exp(-lambda0 x)` with `E* = 1`.
    Markovian { lambda0: T },
    /// Qubit with depolarization `(1 - eta) lambda` and coherent coupling
    /// `eta lambda` to an environment qubit; `E* = cos 2`.
    #[serde(rename = "nonmarkovian")]
    NonMarkovian { eta: T, lambda0: T },
    /// Sampled curve, linearly interpolated, never extrapolated.
    #[serde(rename = "table")]
    Tabulated { pairs: Vec<(T, T)> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseModel<T> {
    pub kind: NoiseKind<T>,
    pub e_star: Option<T>,
}

impl<T: Real> NoiseModel<T> {
    pub fn markovian(lambda0: T) -> Result<Self> {
        check_lambda0(lambda0)?;
        Ok(NoiseModel { kind: NoiseKind::Markovian { lambda0 }, e_star: Some(T::one()) })
    }

    pub fn non_markovian(eta: T, lambda0: T) -> Result<Self> {
        check_lambda0(lambda0)?;
        if !(eta >= T::zero() && eta <= T::one()) {
            return Err(ZneError::InvalidParameter(format!("eta must lie in [0, 1], got {eta}")));
        }
        Ok(NoiseModel { kind: NoiseKind::NonMarkovian { eta, lambda0 }, e_star: Some(T::lit(2.0).cos()) })
    }

    /// Tabulated curve from `(x, E)` samples with strictly increasing `x`.
    pub fn tabulated(pairs: Vec<(T, T)>, e_star: Option<T>) -> Result<Self> {
        if pairs.len() < 2 {
            return Err(ZneError::InvalidParameter("a tabulated curve needs at least two samples".into()));
        }
        if pairs.iter().any(|(x, e)| !x.is_finite() || !e.is_finite()) {
            return Err(ZneError::InvalidParameter("tabulated samples must be finite".into()));
        }
        if pairs.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(ZneError::InvalidParameter("tabulated x values must be strictly increasing".into()));
        }
        Ok(NoiseModel { kind: NoiseKind::Tabulated { pairs }, e_star })
    }

    /// Reads a two-column `x,E` CSV with a header row.
    pub fn from_csv_reader<R: Read>(reader: R, e_star: Option<T>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let mut pairs = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() < 2 {
                return Err(ZneError::InvalidParameter(format!("row {} has fewer than two columns", line + 2)));
            }
            let parse = |s: &str| -> Result<T> {
                s.parse::<f64>()
                    .map(T::lit)
                    .map_err(|e| ZneError::InvalidParameter(format!("row {}: cannot parse '{s}': {e}", line + 2)))
            };
            pairs.push((parse(&record[0])?, parse(&record[1])?));
        }
        Self::tabulated(pairs, e_star)
    }

    pub fn from_csv_path(path: impl AsRef<Path>, e_star: Option<T>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?, e_star)
    }

    /// `E(x)` at amplification factor `x >= 0`.
    pub fn evaluate(&self, x: T) -> Result<T> {
        if !(x >= T::zero()) || !x.is_finite() {
            return Err(ZneError::InvalidParameter(format!("x must be finite and >= 0, got {x}")));
        }
        match &self.kind {
            NoiseKind::Markovian { lambda0 } => Ok(markovian_value(*lambda0 * x)),
            NoiseKind::NonMarkovian { eta, lambda0 } => Ok(non_markovian_value(*eta, *lambda0 * x)),
            NoiseKind::Tabulated { pairs } => interpolate(pairs, x),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            NoiseKind::Markovian { .. } => "markovian",
            NoiseKind::NonMarkovian { .. } => "nonmarkovian",
            NoiseKind::Tabulated { .. } => "table",
        }
    }
}

fn check_lambda0<T: Real>(lambda0: T) -> Result<()> {
    if !(lambda0 > T::zero()) || !lambda0.is_finite() {
        return Err(ZneError::InvalidParameter(format!("lambda0 must be finite and > 0, got {lambda0}")));
    }
    Ok(())
}

/// `exp(-s)` with `s = lambda0 x`.
pub fn markovian_value<T: Real>(s: T) -> T {
    (-s).exp()
}

/// Closed-form toy-model curve at total noise `s = lambda0 x`:
/// `exp(-(1-eta) s) (cos(eta s) cos w + (eta s / w) sin(eta s) sin w)`, `w = sqrt(4 + (eta s)^2)`.
pub fn non_markovian_value<T: Real>(eta: T, s: T) -> T {
    let coupling = eta * s;
    let omega = (T::lit(4.0) + coupling * coupling).sqrt();
    let damping = (-(T::one() - eta) * s).exp();
    damping * (coupling.cos() * omega.cos() + coupling / omega * coupling.sin() * omega.sin())
}

fn interpolate<T: Real>(pairs: &[(T, T)], x: T) -> Result<T> {
    let (lo, hi) = (pairs[0].0, pairs[pairs.len() - 1].0);
    if x < lo || x > hi {
        return Err(ZneError::ExtrapolationRefused { x: x.as_f64(), lo: lo.as_f64(), hi: hi.as_f64() });
    }
    let idx = pairs.partition_point(|(px, _)| *px <= x);
    if idx == pairs.len() {
        return Ok(pairs[idx - 1].1);
    }
    let (x0, e0) = pairs[idx - 1];
    let (x1, e1) = pairs[idx];
    Ok(e0 + (e1 - e0) * (x - x0) / (x1 - x0))
}
