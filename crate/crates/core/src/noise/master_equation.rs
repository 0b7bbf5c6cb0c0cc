// SPDX-License-Identifier: Apache-2.0

//! Two-qubit master equation behind the non-Markovian curve.
//!
//! `d rho/dt = -i [H, rho] + lambda_m (I/2 (x) tr_1(rho) - rho)` with
//! `H = Z(x)I + lambda_nm X(x)X + I(x)Z`, started from `(I + X)/2 (x) I/2` and
//! measured with `X (x) I`. The depolarizer replaces the system qubit with the
//! maximally mixed state.

use nalgebra::{Complex, Matrix2, Matrix4};

use crate::error::{Result, ZneError};
use crate::integrate::{dopri5, Tolerances};

type C64 = Complex<f64>;
type Density = Matrix4<C64>;

/// Result of one master-equation integration.
#[derive(Debug, Clone, Copy)]
pub struct OracleRun {
    /// `tr(rho(tau) X(x)I)`.
    pub value: f64,
    pub steps: usize,
    /// Largest `|tr rho - 1|` seen at any accepted step.
    pub max_trace_error: f64,
    /// Largest entry of `|rho - rho^dagger|` seen at any accepted step.
    pub max_hermiticity_error: f64,
}

fn pauli() -> (Matrix2<C64>, Matrix2<C64>, Matrix2<C64>) {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    (Matrix2::identity(), Matrix2::new(o, l, l, o), Matrix2::new(l, o, o, -l))
}

fn kron(a: &Matrix2<C64>, b: &Matrix2<C64>) -> Matrix4<C64> {
    Matrix4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

/// `I/2 (x) tr_1(rho)`.
fn depolarize_first(rho: &Density) -> Density {
    let reduced = Matrix2::from_fn(|b, bp| rho[(b, bp)] + rho[(2 + b, 2 + bp)]);
    Matrix4::from_fn(|r, c| if r / 2 == c / 2 { reduced[(r % 2, c % 2)] * 0.5 } else { C64::new(0.0, 0.0) })
}

fn pack(rho: &Density) -> [f64; 32] {
    let mut y = [0.0; 32];
    for r in 0..4 {
        for c in 0..4 {
            let z = rho[(r, c)];
            y[2 * (4 * r + c)] = z.re;
            y[2 * (4 * r + c) + 1] = z.im;
        }
    }
    y
}

fn unpack(y: &[f64; 32]) -> Density {
    Matrix4::from_fn(|r, c| C64::new(y[2 * (4 * r + c)], y[2 * (4 * r + c) + 1]))
}

/// Integrates the toy model at total noise `lambda = lambda0 x` up to time `tau`.
pub fn integrate_toy_model(eta: f64, lambda: f64, tau: f64) -> Result<OracleRun> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(ZneError::InvalidParameter(format!("eta must lie in [0, 1], got {eta}")));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(ZneError::InvalidParameter(format!("lambda0 x must be finite and >= 0, got {lambda}")));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(ZneError::InvalidParameter(format!("tau must be finite and > 0, got {tau}")));
    }
    let damping = (1.0 - eta) * lambda;
    let coupling = eta * lambda;

    let (id, x, z) = pauli();
    let h = kron(&z, &id) + kron(&x, &x) * C64::new(coupling, 0.0) + kron(&id, &z);
    let observable = kron(&x, &id);
    let rho0 = kron(&((id + x) * C64::new(0.5, 0.0)), &(id * C64::new(0.5, 0.0)));
    let minus_i = C64::new(0.0, -1.0);

    let rhs = |_t: f64, y: &[f64; 32], dy: &mut [f64; 32]| {
        let rho = unpack(y);
        let drho = (h * rho - rho * h) * minus_i + (depolarize_first(&rho) - rho) * C64::new(damping, 0.0);
        *dy = pack(&drho);
    };

    let mut max_trace_error: f64 = 0.0;
    let mut max_hermiticity_error: f64 = 0.0;
    let observe = |_t: f64, y: &[f64; 32]| {
        let rho = unpack(y);
        max_trace_error = max_trace_error.max((rho.trace() - C64::new(1.0, 0.0)).norm());
        let herm = (rho - rho.adjoint()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        max_hermiticity_error = max_hermiticity_error.max(herm);
    };

    let (y, stats) = dopri5(rhs, 0.0, tau, pack(&rho0), Tolerances::default(), observe)?;
    let value = (unpack(&y) * observable).trace().re;
    Ok(OracleRun { value, steps: stats.accepted, max_trace_error, max_hermiticity_error })
}

/// `tr(rho(tau) X(x)I)` for the toy model at noise `lambda0 x`.
pub fn ode_oracle_nonmarkovian(eta: f64, lambda0: f64, x: f64, tau: f64) -> Result<f64> {
    Ok(integrate_toy_model(eta, lambda0 * x, tau)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{non_markovian_value, NoiseModel};

    #[test]
    fn noiseless_precession() {
        for eta in [0.0, 0.5, 1.0] {
            let v = ode_oracle_nonmarkovian(eta, 0.4, 0.0, 1.0).unwrap();
            assert!((v - 2f64.cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn agrees_with_closed_form_at_the_extremes() {
        let closed = NoiseModel::non_markovian(1.0, 0.4).unwrap().evaluate(1.0).unwrap();
        assert!((ode_oracle_nonmarkovian(1.0, 0.4, 1.0, 1.0).unwrap() - closed).abs() <= 1e-8);
        let markov = 2f64.cos() * (-0.4f64).exp();
        assert!((ode_oracle_nonmarkovian(0.0, 0.4, 1.0, 1.0).unwrap() - markov).abs() <= 1e-8);
    }

    #[test]
    fn density_matrix_stays_physical() {
        for eta in [0.0, 0.3, 1.0] {
            let run = integrate_toy_model(eta, 7.5, 1.0).unwrap();
            assert!(run.max_trace_error <= 1e-9, "trace drift {}", run.max_trace_error);
            assert!(run.max_hermiticity_error <= 1e-9);
            assert!(run.steps > 0);
        }
    }

    #[test]
    fn grid_agreement() {
        for eta in [0.0, 0.1, 0.5, 0.9, 1.0] {
            for i in 0..50 {
                let s = 10.0 * i as f64 / 49.0;
                let ode = integrate_toy_model(eta, s, 1.0).unwrap().value;
                assert!((ode - non_markovian_value(eta, s)).abs() <= 1e-8, "eta={eta} s={s}");
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(integrate_toy_model(1.5, 1.0, 1.0).is_err());
        assert!(integrate_toy_model(0.5, -1.0, 1.0).is_err());
        assert!(integrate_toy_model(0.5, 1.0, 0.0).is_err());
    }
}
