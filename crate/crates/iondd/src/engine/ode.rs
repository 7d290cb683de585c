//! Dormand–Prince 5(4) with local extrapolation on complex state vectors.

use crate::error::{Error, Result};
use crate::linalg::{c, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    /// Max-norm bound on the estimated local error of each accepted step.
    pub tol: f64,
    pub h_max: f64,
    pub h_min: f64,
}

impl OdeOptions {
    pub fn new(tol: f64, h_max: f64) -> Self {
        Self { tol, h_max, h_min: 1e-18 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b − b̂ for the error estimate.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

/// Integrates y′ = f(t, y) from `t0` to `t1` in place. `h0` is the first
/// trial step; the last accepted step is returned for warm restarts.
pub fn integrate<F>(mut f: F, t0: f64, t1: f64, y: &mut [C64], h0: f64, opts: &OdeOptions, stats: &mut OdeStats) -> Result<f64>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let n = y.len();
    if t1 <= t0 {
        return Ok(h0);
    }
    let zero = c(0.0, 0.0);
    let mut k: Vec<Vec<C64>> = (0..7).map(|_| vec![zero; n]).collect();
    let mut tmp = vec![zero; n];
    let mut y5 = vec![zero; n];
    let mut t = t0;
    let mut h = h0.min(opts.h_max).min(t1 - t0).max(opts.h_min);
    f(t, y, &mut k[0]);
    stats.evaluations += 1;
    let mut last_h = h;
    while t < t1 {
        let remaining = t1 - t;
        let final_step = h >= remaining * (1.0 - 1e-12);
        if final_step {
            h = remaining;
        }
        let stage = |tmp: &mut [C64], k: &[Vec<C64>], coeffs: &[f64]| {
            for i in 0..n {
                let mut acc = zero;
                for (kk, &a) in k.iter().zip(coeffs) {
                    acc += kk[i] * a;
                }
                tmp[i] = y[i] + acc * h;
            }
        };
        stage(&mut tmp, &k[..1], &[A21]);
        f(t + C2 * h, &tmp, &mut k[1]);
        stage(&mut tmp, &k[..2], &[A31, A32]);
        f(t + C3 * h, &tmp, &mut k[2]);
        stage(&mut tmp, &k[..3], &[A41, A42, A43]);
        f(t + C4 * h, &tmp, &mut k[3]);
        stage(&mut tmp, &k[..4], &[A51, A52, A53, A54]);
        f(t + C5 * h, &tmp, &mut k[4]);
        stage(&mut tmp, &k[..5], &[A61, A62, A63, A64, A65]);
        f(t + h, &tmp, &mut k[5]);
        for i in 0..n {
            y5[i] = y[i] + (k[0][i] * B1 + k[2][i] * B3 + k[3][i] * B4 + k[4][i] * B5 + k[5][i] * B6) * h;
        }
        let (head, tail) = k.split_at_mut(6);
        f(t + h, &y5, &mut tail[0]);
        stats.evaluations += 7;
        let k7 = &tail[0];
        let mut err: f64 = 0.0;
        for i in 0..n {
            let e = (head[0][i] * E1 + head[2][i] * E3 + head[3][i] * E4 + head[4][i] * E5 + head[5][i] * E6 + k7[i] * E7) * h;
            err = err.max(e.norm());
        }
        if !err.is_finite() {
            return Err(Error::Convergence { what: "Runge-Kutta step produced a non-finite state", residual: err });
        }
        if err <= opts.tol {
            t = if final_step { t1 } else { t + h };
            y.copy_from_slice(&y5);
            k.swap(0, 6);
            stats.accepted += 1;
            last_h = h;
        } else {
            stats.rejected += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * (opts.tol / err).powf(0.2)).clamp(0.2, 5.0) };
        h = (h * factor).min(opts.h_max);
        if h < opts.h_min {
            return Err(Error::StepUnderflow { t, h });
        }
    }
    Ok(last_h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_phase() {
        // y' = iωy has y(t) = e^{iωt}.
        let w = 3.0;
        let mut y = vec![c(1.0, 0.0)];
        let mut stats = OdeStats::default();
        integrate(|_, y, dy| dy[0] = c(0.0, w) * y[0], 0.0, 10.0, &mut y, 1e-3, &OdeOptions::new(1e-12, 1.0), &mut stats)
            .unwrap();
        assert!((y[0] - crate::linalg::cis(30.0)).norm() < 1e-9);
        assert!(stats.rejected < stats.accepted);
    }
}
