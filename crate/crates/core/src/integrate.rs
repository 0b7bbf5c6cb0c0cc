// SPDX-License-Identifier: Apache-2.0

//! Adaptive Dormand-Prince 5(4) integrator for small dense systems.

use crate::error::{Result, ZneError};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights equal the last row of A (FSAL)
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B_LOW: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub atol: f64,
    pub rtol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { atol: 1e-10, rtol: 1e-10, max_steps: 1_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Integrates `y' = f(t, y)` from `t0` to `t1`, calling `observe(t, y)` after
/// every accepted step.
pub fn dopri5<const N: usize, F, O>(
    mut f: F,
    t0: f64,
    t1: f64,
    y0: [f64; N],
    tol: Tolerances,
    mut observe: O,
) -> Result<([f64; N], Stats)>
where
    F: FnMut(f64, &[f64; N], &mut [f64; N]),
    O: FnMut(f64, &[f64; N]),
{
    let mut stats = Stats::default();
    let span = t1 - t0;
    if span == 0.0 {
        return Ok((y0, stats));
    }
    if !(span > 0.0) {
        return Err(ZneError::Integration(format!("invalid interval [{t0}, {t1}]")));
    }

    let mut t = t0;
    let mut y = y0;
    let mut k = [[0.0; N]; 7];
    f(t, &y, &mut k[0]);
    let mut h = initial_step(&y, &k[0], span, tol);
    let h_min = 1e-14 * span.max(1.0);

    while t < t1 {
        if stats.accepted + stats.rejected >= tol.max_steps {
            return Err(ZneError::Integration(format!("step limit {} reached at t = {t}", tol.max_steps)));
        }
        if t + h > t1 {
            h = t1 - t;
        }
        let mut stage = [0.0; N];
        for s in 1..7 {
            for i in 0..N {
                let mut acc = 0.0;
                for (r, a) in A[s][..s].iter().enumerate() {
                    acc += a * k[r][i];
                }
                stage[i] = y[i] + h * acc;
            }
            f(t + C[s] * h, &stage, &mut k[s]);
        }
        // stage now holds the fifth-order solution (row 7 of A)
        let y_new = stage;
        let mut err_sq = 0.0;
        for i in 0..N {
            let mut e = 0.0;
            for s in 0..7 {
                e += (B[s] - B_LOW[s]) * k[s][i];
            }
            let scale = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
            err_sq += (h * e / scale).powi(2);
        }
        let err = (err_sq / N as f64).sqrt();
        if !err.is_finite() {
            return Err(ZneError::Integration(format!("non-finite error estimate at t = {t}")));
        }
        if err <= 1.0 {
            t += h;
            y = y_new;
            k[0] = k[6];
            stats.accepted += 1;
            observe(t, &y);
        } else {
            stats.rejected += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < h_min && t < t1 {
            return Err(ZneError::Integration(format!("step size underflow at t = {t}")));
        }
    }
    Ok((y, stats))
}

fn initial_step<const N: usize>(y: &[f64; N], dy: &[f64; N], span: f64, tol: Tolerances) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..N {
        let scale = tol.atol + tol.rtol * y[i].abs();
        d0 += (y[i] / scale).powi(2);
        d1 += (dy[i] / scale).powi(2);
    }
    let (d0, d1) = ((d0 / N as f64).sqrt(), (d1 / N as f64).sqrt());
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span)
}
