// Copyright 2026 The coherence-lab Contributors
// SPDX-License-Identifier: Apache-2.0

//! Adaptive Dormand-Prince 5(4) integrator for real state vectors.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 2_000_000,
        }
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` and returns the state at each of the
/// nondecreasing output times (all `>= t0`). Steps land exactly on output
/// times, so no dense-output interpolation error is introduced.
pub fn dopri5<F>(mut f: F, t0: f64, y0: &[f64], t_out: &[f64], opts: OdeOptions) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y5 = vec![0.0; n];
    let mut out = Vec::with_capacity(t_out.len());
    let span = t_out.last().map_or(0.0, |&e| (e - t0).abs());
    let mut h = if span > 0.0 { span * 1e-3 } else { 1e-3 };
    f(t, &y, &mut k[0]);
    let mut steps = 0usize;
    for &target in t_out {
        if target < t {
            return Err(Error::domain("output times must be nondecreasing and >= t0"));
        }
        while t < target {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::Resolution(format!(
                    "ODE integrator exceeded {} steps at t = {t}",
                    opts.max_steps
                )));
            }
            let last = h >= target - t;
            let hs = if last { target - t } else { h };
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += hs * A[s][j] * kj[i];
                    }
                    tmp[i] = acc;
                }
                let (head, tail) = k.split_at_mut(s);
                let _ = head;
                f(t + C[s] * hs, &tmp, &mut tail[0]);
            }
            let mut err = 0.0f64;
            for i in 0..n {
                let mut a5 = y[i];
                let mut e = 0.0;
                for s in 0..7 {
                    a5 += hs * B5[s] * k[s][i];
                    e += hs * (B5[s] - B4[s]) * k[s][i];
                }
                y5[i] = a5;
                let sc = opts.atol + opts.rtol * y[i].abs().max(a5.abs());
                err = err.max((e / sc).abs());
            }
            if !err.is_finite() {
                return Err(Error::Resolution(format!("ODE state became non-finite at t = {t}")));
            }
            if err <= 1.0 {
                t = if last { target } else { t + hs };
                std::mem::swap(&mut y, &mut y5);
                // FSAL: the last stage is the derivative at the new point.
                k.swap(0, 6);
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            let proposed = hs * fac;
            if !(last && err <= 1.0) {
                h = proposed;
            } else {
                h = h.max(proposed);
            }
            if h < 1e-14 * (1.0 + t.abs()) {
                return Err(Error::Resolution(format!("ODE step size underflow at t = {t}")));
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let ts: Vec<f64> = (0..=10).map(|k| k as f64).collect();
        let ys = dopri5(
            |_, y, d| {
                d[0] = y[1];
                d[1] = -y[0];
            },
            0.0,
            &[1.0, 0.0],
            &ts,
            OdeOptions::default(),
        )
        .unwrap();
        for (t, y) in ts.iter().zip(ys) {
            assert!((y[0] - t.cos()).abs() < 1e-8, "t={t}");
            assert!((y[1] + t.sin()).abs() < 1e-8);
        }
    }

    #[test]
    fn output_at_start() {
        let ys = dopri5(|_, _, d| d[0] = 1.0, 0.0, &[2.0], &[0.0, 0.5], OdeOptions::default()).unwrap();
        assert_eq!(ys[0], vec![2.0]);
        assert!((ys[1][0] - 2.5).abs() < 1e-14);
    }
}
