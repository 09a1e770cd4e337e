// Copyright 2026 The coherence-lab Contributors
// SPDX-License-Identifier: Apache-2.0

//! Exact reduced dynamics from the retarded Green's function.
//!
//! The kernel `g_i(zeta) = -i [G(zeta + i0) phi]_i` is split into its pole
//! terms (roots of `det G^-1`, found on the continued sheet), two reference
//! terms that remove the `1/zeta` and `1/zeta^2` tails, and a smooth
//! remainder that is Fourier transformed numerically.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::bath::{Bath, Occupation};
use crate::error::{Error, Result};
use crate::model::{MultiBathSpec, SystemSpec};
use crate::moments::SecondMoments;
use crate::quad::{self, QuadOptions};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

type C2 = [[Complex64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    A,
    B,
}

impl Mode {
    pub fn index(self) -> usize {
        match self {
            Mode::A => 0,
            Mode::B => 1,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExactOptions {
    /// Largest internal time step of the convolution assembly.
    pub max_dt: f64,
    /// Frequency window half-width is `max(factor * scale, window_min)`.
    pub window_factor: f64,
    pub window_min: f64,
    /// Damping of the reference terms, `q = Omega - i kappa`.
    pub kappa: f64,
    /// Relative residual `|det| / max(1, Omega^2)` accepted for a root.
    pub root_tol: f64,
    pub max_newton: usize,
    /// Allowed acausal leakage of the numerical remainder, relative to the
    /// coupling amplitude.
    pub causality_tol: f64,
    /// Relative tolerance of the frequency integrals.
    pub spectral_rel_tol: f64,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions {
            max_dt: 0.02,
            window_factor: 20.0,
            window_min: 40.0,
            kappa: 1.0,
            root_tol: 1e-12,
            max_newton: 100,
            causality_tol: 1e-6,
            spectral_rel_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pole {
    pub zeta: Complex64,
    /// `|det G^-1(zeta)|` at the converged root.
    pub residual: f64,
}

/// Roots of `det G^-1` (of `d` for a single bath).
#[derive(Debug, Clone, PartialEq)]
pub struct PoleSet {
    pub poles: Vec<Pole>,
    /// Imaginary parts above this are stability violations.
    pub im_tolerance: f64,
}

impl PoleSet {
    pub fn violations(&self) -> Vec<Pole> {
        self.poles
            .iter()
            .copied()
            .filter(|p| p.zeta.im > self.im_tolerance)
            .collect()
    }

    /// The pole closest to the real axis.
    pub fn slowest(&self) -> Option<Pole> {
        self.poles
            .iter()
            .copied()
            .max_by(|a, b| a.zeta.im.total_cmp(&b.zeta.im))
    }
}

fn coupling_matrix(multi: &MultiBathSpec, zeta: Complex64) -> Result<C2> {
    let mut a = [[ZERO; 2]; 2];
    for t in multi.terms() {
        let k = t.bath.response_continued(zeta)?;
        for i in 0..2 {
            for j in 0..2 {
                a[i][j] += t.phi[i] * t.phi[j] * k;
            }
        }
    }
    Ok(a)
}

fn ginv_from(sys: &SystemSpec, a: &C2, zeta: Complex64) -> C2 {
    [
        [I * (sys.omega_a - zeta) + a[0][0], a[0][1]],
        [a[1][0], I * (sys.omega_b - zeta) + a[1][1]],
    ]
}

fn det2(m: &C2) -> Complex64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// `[G^-1(zeta)]_ij = i delta_ij (omega_i - zeta) + sum_n phi_i phi_j K_n*(zeta)`
/// with `K*` continued below the real axis.
pub fn green_inverse(multi: &MultiBathSpec, sys: &SystemSpec, zeta: Complex64) -> Result<C2> {
    Ok(ginv_from(sys, &coupling_matrix(multi, zeta)?, zeta))
}

/// `G(zeta)` by 2x2 inversion.
pub fn green_matrix(multi: &MultiBathSpec, sys: &SystemSpec, zeta: Complex64) -> Result<C2> {
    let m = green_inverse(multi, sys, zeta)?;
    let det = det2(&m);
    let scale = m.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max).powi(2);
    if det.norm() <= 1e-15 * scale || det.norm() == 0.0 {
        return Err(Error::Singular {
            condition: f64::INFINITY,
        });
    }
    Ok([
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ])
}

/// `det G^-1(zeta)`; for a single bath this is `d(zeta)`.
pub fn green_determinant(multi: &MultiBathSpec, sys: &SystemSpec, zeta: Complex64) -> Result<Complex64> {
    Ok(det2(&green_inverse(multi, sys, zeta)?))
}

/// `d(zeta) = -(w_a - zeta)(w_b - zeta) + i K*(zeta) [phi_a^2 (w_b - zeta) + phi_b^2 (w_a - zeta)]`.
pub fn denominator_d(sys: &SystemSpec, bath: &Bath, zeta: Complex64) -> Result<Complex64> {
    let k = bath.response_continued(zeta)?;
    let (pa2, pb2) = (sys.phi_a * sys.phi_a, sys.phi_b * sys.phi_b);
    Ok(-(sys.omega_a - zeta) * (sys.omega_b - zeta)
        + I * k * (pa2 * (sys.omega_b - zeta) + pb2 * (sys.omega_a - zeta)))
}

fn check_continuable(multi: &MultiBathSpec) -> Result<()> {
    if multi.terms().iter().all(|t| t.bath.has_continuation()) {
        Ok(())
    } else {
        Err(Error::Unsupported(
            "exact solution needs a spectral density with an analytic continuation".into(),
        ))
    }
}

fn derivative<F: Fn(Complex64) -> Result<Complex64>>(f: &F, z: Complex64, h: f64) -> Result<Complex64> {
    let h = Complex64::new(h, 0.0);
    Ok((-f(z + 2.0 * h)? + 8.0 * f(z + h)? - 8.0 * f(z - h)? + f(z - 2.0 * h)?) / (12.0 * h))
}

fn newton<F: Fn(Complex64) -> Result<Complex64>>(
    f: &F,
    det: &dyn Fn(Complex64) -> Result<Complex64>,
    seed: Complex64,
    tol: f64,
    max_iter: usize,
) -> Result<Pole> {
    let mut z = seed;
    for it in 0..max_iter {
        let v = f(z)?;
        if v == ZERO {
            return Ok(Pole { zeta: z, residual: 0.0 });
        }
        let h = 1e-7 * z.norm().max(1.0);
        let hc = Complex64::new(h, 0.0);
        let dv = (f(z + hc)? - f(z - hc)?) / (2.0 * h);
        if dv == ZERO || !dv.is_finite() {
            return Err(Error::RootFinding {
                seed: format!("{seed}"),
                residual: det(z)?.norm(),
                iterations: it,
            });
        }
        let mut step = v / dv;
        // Keep steps bounded so the iteration stays near the spectrum.
        let cap = 0.5 * z.norm().max(1.0);
        if step.norm() > cap {
            step *= cap / step.norm();
        }
        z -= step;
        if step.norm() < 1e-13 * z.norm().max(1.0) {
            let d = det(z)?.norm();
            if d < tol {
                return Ok(Pole { zeta: z, residual: d });
            }
        }
    }
    // Stalled at rounding level: accept if the residual is small anyway.
    let d = det(z)?.norm();
    if d < tol {
        return Ok(Pole { zeta: z, residual: d });
    }
    Err(Error::RootFinding {
        seed: format!("{seed}"),
        residual: d,
        iterations: max_iter,
    })
}

/// Poles of a single-bath model.
pub fn find_poles(sys: &SystemSpec, bath: &Bath) -> Result<PoleSet> {
    find_poles_multibath(&MultiBathSpec::single(sys, bath), sys)
}

/// Newton iteration from seeds near `omega_a`, `omega_b`, with deflation of
/// roots already found.
pub fn find_poles_multibath(multi: &MultiBathSpec, sys: &SystemSpec) -> Result<PoleSet> {
    find_poles_with(multi, sys, &ExactOptions::default())
}

pub fn find_poles_with(multi: &MultiBathSpec, sys: &SystemSpec, opts: &ExactOptions) -> Result<PoleSet> {
    check_continuable(multi)?;
    let scale = sys.omega().powi(2).max(1.0);
    let tol = opts.root_tol * scale;
    let det = |z: Complex64| green_determinant(multi, sys, z);
    let mut seeds = Vec::new();
    for (i, w) in sys.omegas().iter().enumerate() {
        let mut gamma = 0.0;
        for t in multi.terms() {
            gamma += t.phi[i] * t.phi[i] * t.bath.response(*w)?.k.re;
        }
        seeds.push(Complex64::new(*w, -0.5 * gamma));
    }
    let mut poles: Vec<Pole> = Vec::new();
    for seed in seeds {
        let mut s = seed;
        for p in &poles {
            if (s - p.zeta).norm() < 1e-6 {
                s += Complex64::new(1e-3, -1e-3);
            }
        }
        let found = poles.clone();
        let deflated = |z: Complex64| -> Result<Complex64> {
            let mut v = det(z)?;
            for p in &found {
                v /= z - p.zeta;
            }
            Ok(v)
        };
        poles.push(newton(&deflated, &det, s, tol, opts.max_newton)?);
    }
    poles.sort_by(|a, b| b.zeta.im.total_cmp(&a.zeta.im));
    Ok(PoleSet {
        poles,
        im_tolerance: 1e-12 * scale,
    })
}

/// Small-detuning decay rate `-Im zeta0` of the slow pole.
pub fn perturbative_pole_rate(sys: &SystemSpec, bath: &Bath) -> Result<f64> {
    let d = sys.delta();
    let (pa2, pb2) = (sys.phi_a * sys.phi_a, sys.phi_b * sys.phi_b);
    if d == 0.0 || pa2 * pb2 == 0.0 {
        return Ok(0.0);
    }
    let k = bath.response(sys.omega())?.k;
    if k.norm_sqr() == 0.0 {
        return Err(Error::domain("perturbative pole rate undefined for K(Omega) = 0"));
    }
    let s = pa2 + pb2;
    Ok(4.0 * d * d * pa2 * pb2 * k.re / (s * s * s * k.norm_sqr()))
}

/// Pole/reference decomposition of `g_i^(n)` plus its sampled remainder.
struct KernelTerm {
    residues: Vec<Complex64>,
    c1: Complex64,
    c2: Complex64,
    c3: Complex64,
    /// Remainder on the frequency grid.
    samples: Vec<Complex64>,
}

/// Everything needed to evaluate `D_i^(n)(t)`, `W_i^(n)(nu, t)` and
/// `g_i^(n)(nu)` for every bath `n` and mode `i`.
struct Kernel<'a> {
    multi: &'a MultiBathSpec,
    sys: SystemSpec,
    poles: Vec<Complex64>,
    q: Complex64,
    /// Frequency grid `zeta_m = z0 + m h`.
    z0: f64,
    h: f64,
    terms: Vec<[KernelTerm; 2]>,
}

fn white_k(bath: &Bath) -> Complex64 {
    if bath.is_white_noise() {
        Complex64::new(PI * bath.j_ref(), 0.0)
    } else {
        ZERO
    }
}

fn real_axis_g(multi: &MultiBathSpec, sys: &SystemSpec, ks: &[Complex64], nu: f64) -> Vec<[Complex64; 2]> {
    let mut a = [[ZERO; 2]; 2];
    for (t, k) in multi.terms().iter().zip(ks) {
        for i in 0..2 {
            for j in 0..2 {
                a[i][j] += t.phi[i] * t.phi[j] * *k;
            }
        }
    }
    let z = Complex64::new(nu, 0.0);
    let m = ginv_from(sys, &a, z);
    let det = det2(&m);
    let g = [
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ];
    multi
        .terms()
        .iter()
        .map(|t| {
            let v0 = g[0][0] * t.phi[0] + g[0][1] * t.phi[1];
            let v1 = g[1][0] * t.phi[0] + g[1][1] * t.phi[1];
            [-I * v0, -I * v1]
        })
        .collect()
}

fn real_axis_ks(multi: &MultiBathSpec, nu: f64) -> Result<Vec<Complex64>> {
    multi
        .terms()
        .iter()
        .map(|t| {
            if t.bath.is_white_noise() {
                Ok(white_k(&t.bath))
            } else {
                Ok(t.bath.k_real_axis(nu)?.conj())
            }
        })
        .collect()
}

impl<'a> Kernel<'a> {
    /// Builds the kernel for times up to `t_max` on a step `dt`; the
    /// frequency spacing is tied to `dt` by the FFT length `fft_len`.
    fn new(multi: &'a MultiBathSpec, sys: &SystemSpec, t_max: f64, dt: f64, opts: &ExactOptions) -> Result<(Self, usize)> {
        check_continuable(multi)?;
        let set = find_poles_with(multi, sys, opts)?;
        let poles: Vec<Complex64> = set.poles.iter().map(|p| p.zeta).collect();
        let omega = sys.omega();
        let q = Complex64::new(omega, -opts.kappa);

        // Frequency window.
        let mut scale = sys.delta().abs();
        for t in multi.terms() {
            scale = scale.max(t.bath.response(omega)?.k.norm());
            if let Occupation::Thermal { kbt } = t.bath.spec().occupation {
                scale = scale.max(kbt);
            }
        }
        let mut half = (opts.window_factor * scale).max(opts.window_min);
        for p in &poles {
            half = half.max(2.0 * (p.re - omega).abs() + 20.0 * p.im.abs());
        }
        if dt * half > PI {
            return Err(Error::Resolution(format!(
                "time step {dt} cannot resolve the frequency window +/-{half}"
            )));
        }
        let h_target = (PI / (4.0 * t_max.max(1.0))).min(0.02);
        let fft_len = ((2.0 * PI / (dt * h_target)).ceil() as usize).next_power_of_two();
        let h = 2.0 * PI / (fft_len as f64 * dt);
        let count = ((2.0 * half / h).ceil() as usize).max(2);
        let z0 = omega - 0.5 * (count - 1) as f64 * h;

        // Residues.
        let det = |z: Complex64| green_determinant(multi, sys, z);
        let mut res = vec![[vec![ZERO; poles.len()], vec![ZERO; poles.len()]]; multi.terms().len()];
        for (k, p) in poles.iter().enumerate() {
            let dd = derivative(&det, *p, 1e-3 * p.norm().max(1.0))?;
            let m = green_inverse(multi, sys, *p)?;
            let adj = [[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]];
            for (n, t) in multi.terms().iter().enumerate() {
                for i in 0..2 {
                    let num = -I * (adj[i][0] * t.phi[0] + adj[i][1] * t.phi[1]);
                    let r = if num.norm() <= 1e-14 * (t.phi[0].abs() + t.phi[1].abs()) {
                        ZERO
                    } else if dd.norm() < 1e-12 * sys.omega().abs().max(1.0) {
                        return Err(Error::Resolution(format!(
                            "pole {p} is (nearly) degenerate; residue undefined"
                        )));
                    } else {
                        num / dd
                    };
                    res[n][i][k] = r;
                }
            }
        }
        // Tail of g = (zeta - M + B / zeta + ...)^-1 phi with
        // M = w - i A_inf (white baths) and B = sum phi phi^T int J.
        let omegas = sys.omegas();
        let mut mm = [[ZERO; 2]; 2];
        let mut bm = [[ZERO; 2]; 2];
        mm[0][0] = Complex64::new(omegas[0], 0.0);
        mm[1][1] = Complex64::new(omegas[1], 0.0);
        for t in multi.terms() {
            let (k, w) = if t.bath.is_white_noise() {
                (white_k(&t.bath), 0.0)
            } else {
                (ZERO, t.bath.spectral_weight()?)
            };
            for i in 0..2 {
                for j in 0..2 {
                    mm[i][j] -= I * t.phi[i] * t.phi[j] * k;
                    bm[i][j] += t.phi[i] * t.phi[j] * w;
                }
            }
        }
        let apply = |m: &C2, v: [Complex64; 2]| [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]];
        let mut coeffs = Vec::new();
        for (n, t) in multi.terms().iter().enumerate() {
            let phi = [Complex64::new(t.phi[0], 0.0), Complex64::new(t.phi[1], 0.0)];
            let e2 = apply(&mm, phi);
            let e3m = apply(&mm, e2);
            let e3b = apply(&bm, phi);
            let mut pair = Vec::new();
            for i in 0..2 {
                let r = &res[n][i];
                let sum_r: Complex64 = r.iter().sum();
                let sum_rp: Complex64 = r.iter().zip(&poles).map(|(r, p)| r * p).sum();
                let sum_rp2: Complex64 = r.iter().zip(&poles).map(|(r, p)| r * p * p).sum();
                let c1 = phi[i] - sum_r;
                let c2 = e2[i] - sum_rp - c1 * q;
                let c3 = e3m[i] + e3b[i] - sum_rp2 - c1 * q * q - 2.0 * c2 * q;
                pair.push((c1, c2, c3));
            }
            coeffs.push(pair);
        }

        let mut kernel = Kernel {
            multi,
            sys: *sys,
            poles,
            q,
            z0,
            h,
            terms: Vec::new(),
        };
        for (n, pair) in coeffs.iter().enumerate() {
            let mk = |i: usize| KernelTerm {
                residues: res[n][i].clone(),
                c1: pair[i].0,
                c2: pair[i].1,
                c3: pair[i].2,
                samples: Vec::new(),
            };
            kernel.terms.push([mk(0), mk(1)]);
        }
        let grid: Vec<Vec<[Complex64; 2]>> = (0..count)
            .into_par_iter()
            .map(|m| -> Result<Vec<[Complex64; 2]>> {
                let nu = z0 + m as f64 * h;
                let ks = real_axis_ks(multi, nu)?;
                let g = real_axis_g(multi, sys, &ks, nu);
                Ok((0..g.len())
                    .map(|n| [kernel.smooth_part(n, 0, nu, g[n][0]), kernel.smooth_part(n, 1, nu, g[n][1])])
                    .collect())
            })
            .collect::<Result<_>>()?;
        for (n, term) in kernel.terms.iter_mut().enumerate() {
            for (i, t) in term.iter_mut().enumerate() {
                t.samples = grid.iter().map(|row| row[n][i]).collect();
            }
        }
        Ok((kernel, fft_len))
    }

    fn smooth_part(&self, n: usize, i: usize, nu: f64, g: Complex64) -> Complex64 {
        let t = &self.terms[n][i];
        let z = Complex64::new(nu, 0.0);
        let mut r = g;
        for (res, p) in t.residues.iter().zip(&self.poles) {
            r -= res / (z - p);
        }
        let dq = z - self.q;
        r - t.c1 / dq - t.c2 / (dq * dq) - t.c3 / (dq * dq * dq)
    }

    /// Remainder `r(nu)` at an arbitrary real frequency.
    fn remainder_at(&self, nu: f64) -> Result<Vec<[Complex64; 2]>> {
        let ks = real_axis_ks(self.multi, nu)?;
        let g = real_axis_g(self.multi, &self.sys, &ks, nu);
        Ok((0..g.len())
            .map(|n| [self.smooth_part(n, 0, nu, g[n][0]), self.smooth_part(n, 1, nu, g[n][1])])
            .collect())
    }

    /// Analytic (pole and reference) part of `D(t)` for `t >= 0`.
    fn d_analytic(&self, n: usize, i: usize, t: f64) -> Complex64 {
        let term = &self.terms[n][i];
        let mut s = ZERO;
        for (r, p) in term.residues.iter().zip(&self.poles) {
            s += -I * r * (-I * p * t).exp();
        }
        let eq = (-I * self.q * t).exp();
        s - I * term.c1 * eq - term.c2 * t * eq + 0.5 * I * term.c3 * t * t * eq
    }

    /// `D_i^(n)(k dt)` for `k = 0..=steps` via one FFT per (bath, mode).
    fn propagators(&self, dt: f64, steps: usize, fft_len: usize, opts: &ExactOptions) -> Result<Vec<[Vec<Complex64>; 2]>> {
        let fft = FftPlanner::<f64>::new().plan_fft_forward(fft_len);
        let pref = self.h / (2.0 * PI);
        let mut out = Vec::with_capacity(self.terms.len());
        for (n, term) in self.terms.iter().enumerate() {
            let mut pair: [Vec<Complex64>; 2] = [Vec::new(), Vec::new()];
            for (i, t) in term.iter().enumerate() {
                let mut buf = vec![ZERO; fft_len];
                buf[..t.samples.len()].copy_from_slice(&t.samples);
                fft.process(&mut buf);
                let mut d = Vec::with_capacity(steps + 1);
                let mut leak = 0.0f64;
                for k in 0..=steps {
                    let tk = k as f64 * dt;
                    let rpart = pref * (-I * self.z0 * tk).exp() * buf[k % fft_len];
                    d.push(self.d_analytic(n, i, tk) + rpart);
                    if k > 0 {
                        let neg = pref * (I * self.z0 * tk).exp() * buf[fft_len - k];
                        leak = leak.max(neg.norm());
                    }
                }
                let amp = self.multi.terms()[n].phi[i].abs().max(self.multi.terms()[n].phi[1 - i].abs());
                if leak > opts.causality_tol * amp.max(f64::MIN_POSITIVE) {
                    return Err(Error::Resolution(format!(
                        "propagator remainder is not causal (leakage {leak:.3e}); frequency grid too coarse"
                    )));
                }
                pair[i] = d;
            }
            out.push(pair);
        }
        Ok(out)
    }

    /// `W_i^(n)(nu, t)` from the pole/reference closed forms and a direct sum
    /// over the remainder grid.
    fn w_at(&self, nu: f64, t: f64, r_nu: &[[Complex64; 2]]) -> Vec<[Complex64; 2]> {
        let eq = (-I * self.q * t).exp();
        let en = Complex64::new(0.0, -nu * t).exp();
        let x = nu - self.q;
        let n_terms = self.terms.len();
        let mut out = vec![[ZERO; 2]; n_terms];
        // Direct sums over the grid share the phase factors.
        let count = self.terms[0][0].samples.len();
        let mut acc = vec![[ZERO; 2]; n_terms];
        let mut phase = Complex64::new(0.0, -self.z0 * t).exp();
        let step = Complex64::new(0.0, -self.h * t).exp();
        for m in 0..count {
            if m % 256 == 0 {
                phase = Complex64::new(0.0, -(self.z0 + m as f64 * self.h) * t).exp();
            }
            let zm = self.z0 + m as f64 * self.h;
            let dz = nu - zm;
            let s = (x / (zm - self.q)).powi(3);
            for n in 0..n_terms {
                for i in 0..2 {
                    let rm = self.terms[n][i].samples[m];
                    let num = rm - r_nu[n][i] * s;
                    let v = if dz.abs() < 1e-9 * self.h {
                        // Removable point: -(r - r(nu) s)'(nu).
                        let samples = &self.terms[n][i].samples;
                        let lo = samples[m.saturating_sub(1)];
                        let hi = samples[(m + 1).min(count - 1)];
                        let span = ((m + 1).min(count - 1) - m.saturating_sub(1)) as f64 * self.h;
                        -((hi - lo) / span + r_nu[n][i] * 3.0 / x)
                    } else {
                        num / dz
                    };
                    acc[n][i] += phase * v;
                }
            }
            phase *= step;
        }
        let pref = self.h / (2.0 * PI);
        for n in 0..n_terms {
            for i in 0..2 {
                let term = &self.terms[n][i];
                let mut w = ZERO;
                for (r, p) in term.residues.iter().zip(&self.poles) {
                    let ep = (-I * p * t).exp();
                    w += I * r * (en - ep) / (nu - p);
                }
                w += I * term.c1 * (en - eq) / x;
                w += -I * term.c2 * (eq * (-I * t / x + 1.0 / (x * x)) - en / (x * x));
                let sub = I * (en - eq * (1.0 - I * t * x - 0.5 * t * t * x * x));
                w += term.c3 / (x * x * x) * sub;
                w += r_nu[n][i] * sub + pref * acc[n][i];
                out[n][i] = w;
            }
        }
        out
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.poles.iter().map(|p| p.re).collect();
        b.push(self.sys.omega_a);
        b.push(self.sys.omega_b);
        b
    }
}

fn check_uniform(times: &[f64]) -> Result<f64> {
    if times.is_empty() {
        return Ok(0.0);
    }
    if times[0] != 0.0 {
        return Err(Error::domain("exact trajectories need a uniform time grid starting at 0"));
    }
    if times.len() == 1 {
        return Ok(0.0);
    }
    let step = times[1] - times[0];
    if !(step > 0.0) {
        return Err(Error::domain("time grid must be strictly increasing"));
    }
    for (k, t) in times.iter().enumerate() {
        if (t - k as f64 * step).abs() > 1e-9 * step.max(t.abs()) {
            return Err(Error::domain(format!(
                "time grid is not uniform at index {k} (t = {t})"
            )));
        }
    }
    Ok(step)
}

/// `D_i(t)` for a single bath at one time.
pub fn propagator_d(sys: &SystemSpec, bath: &Bath, mode: Mode, t: f64) -> Result<Complex64> {
    if t < 0.0 {
        return Err(Error::domain("propagator needs t >= 0"));
    }
    let opts = ExactOptions::default();
    let steps = (t / opts.max_dt).ceil().max(1.0) as usize;
    let dt = if t > 0.0 { t / steps as f64 } else { opts.max_dt };
    let multi = MultiBathSpec::single(sys, bath);
    let grid = propagator_grid(&multi, sys, dt, steps, &opts)?;
    let k = if t > 0.0 { steps } else { 0 };
    Ok(grid[0][mode.index()][k])
}

/// `D_i^(n)(k dt)` for `k = 0..=steps`, every bath `n` and mode `i`.
pub fn propagator_grid(
    multi: &MultiBathSpec,
    sys: &SystemSpec,
    dt: f64,
    steps: usize,
    opts: &ExactOptions,
) -> Result<Vec<[Vec<Complex64>; 2]>> {
    let t_max = dt * steps as f64;
    let (kernel, fft_len) = Kernel::new(multi, sys, t_max, dt, opts)?;
    kernel.propagators(dt, steps, fft_len, opts)
}

/// Exact `F_ij(t)` for a single bath on a uniform grid from 0.
pub fn exact_moments(sys: &SystemSpec, bath: &Bath, times: &[f64]) -> Result<Vec<SecondMoments>> {
    exact_moments_multibath(&MultiBathSpec::single(sys, bath), sys, times)
}

pub fn exact_moments_multibath(multi: &MultiBathSpec, sys: &SystemSpec, times: &[f64]) -> Result<Vec<SecondMoments>> {
    exact_moments_with(multi, sys, times, &ExactOptions::default())
}

/// Convolution form `F_ij(t) = sum_n int int D_i*(u) D_j(v) alpha_n(u - v)`
/// assembled incrementally with the trapezoid rule.
pub fn exact_moments_with(
    multi: &MultiBathSpec,
    sys: &SystemSpec,
    times: &[f64],
    opts: &ExactOptions,
) -> Result<Vec<SecondMoments>> {
    let step = check_uniform(times)?;
    if times.len() <= 1 {
        return Ok(vec![SecondMoments::default(); times.len()]);
    }
    // Even refinement so every output time is also on the 2 dt grid used
    // for Richardson extrapolation.
    let refine = 2 * (step / (2.0 * opts.max_dt)).ceil().max(1.0) as usize;
    let dt = step / refine as f64;
    let steps = refine * (times.len() - 1);
    let omega = sys.omega();
    for t in multi.terms() {
        let (a, b) = t.bath.support();
        if !t.bath.is_white_noise() && dt * (a - omega).abs().max((b - omega).abs()) > PI {
            return Err(Error::Resolution(format!(
                "time step {dt} is too coarse for the bath correlation time"
            )));
        }
    }
    let d = propagator_grid(multi, sys, dt, steps, opts)?;
    // Envelopes remove the carrier at Omega; the phases cancel in F.
    let env: Vec<Complex64> = (0..=steps)
        .map(|k| Complex64::new(0.0, omega * k as f64 * dt).exp())
        .collect();
    let mut total = vec![[ZERO; 3]; steps + 1];
    for (n, t) in multi.terms().iter().enumerate() {
        let dh: [Vec<Complex64>; 2] = [
            d[n][0].iter().zip(&env).map(|(d, e)| d * e).collect(),
            d[n][1].iter().zip(&env).map(|(d, e)| d * e).collect(),
        ];
        let part = if t.bath.is_white_noise() {
            let n0 = match t.bath.spec().occupation {
                Occupation::Flat { n0 } => n0,
                Occupation::Thermal { .. } => unreachable!("validated at construction"),
            };
            let strength = 2.0 * PI * t.bath.j_ref() * n0;
            richardson(
                white_noise_moments(&dh, strength, dt),
                white_noise_moments(&coarse(&dh), strength, 2.0 * dt),
            )
        } else if t.bath.is_zero() {
            vec![[ZERO; 3]; steps + 1]
        } else {
            let taus: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
            let alpha = t.bath.alpha_grid(&taus)?;
            let ah: Vec<Complex64> = alpha.iter().zip(&env).map(|(a, e)| a * e).collect();
            let ah2: Vec<Complex64> = ah.iter().step_by(2).copied().collect();
            richardson(
                convolve_moments(&dh, &ah, dt),
                convolve_moments(&coarse(&dh), &ah2, 2.0 * dt),
            )
        };
        for (acc, p) in total.iter_mut().zip(part) {
            for k in 0..3 {
                acc[k] += p[k];
            }
        }
    }
    Ok(times
        .iter()
        .enumerate()
        .map(|(k, _)| {
            let v = total[k * refine];
            SecondMoments::new(v[0].re, v[1].re, v[2])
        })
        .collect())
}

const PAIRS: [(usize, usize); 3] = [(0, 0), (1, 1), (0, 1)];

fn coarse(dh: &[Vec<Complex64>; 2]) -> [Vec<Complex64>; 2] {
    [
        dh[0].iter().step_by(2).copied().collect(),
        dh[1].iter().step_by(2).copied().collect(),
    ]
}

/// `(4 F_h - F_2h) / 3` on even indices; odd indices keep `F_h`.
fn richardson(fine: Vec<[Complex64; 3]>, coarse: Vec<[Complex64; 3]>) -> Vec<[Complex64; 3]> {
    let mut out = fine;
    for (k, c) in coarse.iter().enumerate() {
        for p in 0..3 {
            out[2 * k][p] = (4.0 * out[2 * k][p] - c[p]) / 3.0;
        }
    }
    out
}

fn convolve_moments(dh: &[Vec<Complex64>; 2], ah: &[Complex64], dt: f64) -> Vec<[Complex64; 3]> {
    let n = ah.len();
    // v_i(n) = sum_{q<n} c_q Dh_i(q) ah(n - q), c_0 = 1/2.
    let v: Vec<Vec<Complex64>> = (0..2)
        .into_par_iter()
        .map(|i| {
            let d = &dh[i];
            (0..n)
                .into_par_iter()
                .map(|m| {
                    if m == 0 {
                        return ZERO;
                    }
                    let mut s = 0.5 * d[0] * ah[m];
                    for q in 1..m {
                        s += d[q] * ah[m - q];
                    }
                    s
                })
                .collect()
        })
        .collect();
    let mut out = vec![[ZERO; 3]; n];
    let mut tsum = [ZERO; 3];
    for m in 0..n {
        for (p, &(i, j)) in PAIRS.iter().enumerate() {
            let x = dh[i][m].conj() * dh[j][m] * ah[0];
            if m == 0 {
                tsum[p] = 0.25 * x;
                out[m][p] = ZERO;
                continue;
            }
            let row = dh[i][m].conj() * v[j][m];
            let col = dh[j][m] * v[i][m].conj();
            tsum[p] += row + col + x;
            out[m][p] = dt * dt * (tsum[p] - 0.5 * (row + col) - 0.75 * x);
        }
    }
    out
}

fn white_noise_moments(dh: &[Vec<Complex64>; 2], strength: f64, dt: f64) -> Vec<[Complex64; 3]> {
    let n = dh[0].len();
    let mut out = vec![[ZERO; 3]; n];
    let mut acc = [ZERO; 3];
    for m in 1..n {
        for (p, &(i, j)) in PAIRS.iter().enumerate() {
            let a = dh[i][m - 1].conj() * dh[j][m - 1];
            let b = dh[i][m].conj() * dh[j][m];
            acc[p] += 0.5 * dt * (a + b);
            out[m][p] = strength * acc[p];
        }
    }
    out
}

fn bath_weight(bath: &Bath, nu: f64) -> f64 {
    bath.weight(nu, crate::bath::Weight::Up)
}

fn spectral_opts(opts: &ExactOptions, scale: f64) -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-14 * scale.max(f64::MIN_POSITIVE),
        rel_tol: opts.spectral_rel_tol,
        max_intervals: 20_000,
    }
}

/// Integrates `J n conj(X_i) X_j` over each bath's support.
fn spectral_sum<F>(multi: &MultiBathSpec, center: f64, width: f64, bp: &[f64], opts: &ExactOptions, what: &str, x: F) -> Result<SecondMoments>
where
    F: Fn(f64) -> Result<Vec<[Complex64; 2]>> + Sync,
{
    let mut total = [ZERO; 3];
    for (n, t) in multi.terms().iter().enumerate() {
        if t.bath.is_zero() {
            continue;
        }
        let failure = std::sync::Mutex::new(None);
        let integrand = |nu: f64| -> [Complex64; 3] {
            let w = if t.bath.is_white_noise() {
                match t.bath.spec().occupation {
                    Occupation::Flat { n0 } => t.bath.j_ref() * n0,
                    Occupation::Thermal { .. } => 0.0,
                }
            } else {
                bath_weight(&t.bath, nu)
            };
            if w == 0.0 {
                return [ZERO; 3];
            }
            match x(nu) {
                Ok(v) => {
                    let v = v[n];
                    [
                        Complex64::new(w * v[0].norm_sqr(), 0.0),
                        Complex64::new(w * v[1].norm_sqr(), 0.0),
                        w * v[0].conj() * v[1],
                    ]
                }
                Err(e) => {
                    failure.lock().expect("lock").get_or_insert(e);
                    [ZERO; 3]
                }
            }
        };
        let scale = t.bath.j_ref();
        let r = if t.bath.is_white_noise() {
            quad::integrate_line_n(integrand, center, width, bp, spectral_opts(opts, scale), what)?
        } else {
            let (a, b) = t.bath.support();
            quad::integrate_n(integrand, a, b, bp, spectral_opts(opts, scale), what)?
        };
        if let Some(e) = failure.into_inner().expect("lock") {
            return Err(e);
        }
        for k in 0..3 {
            total[k] += r.value[k];
        }
    }
    Ok(SecondMoments::new(total[0].re, total[1].re, total[2]))
}

/// Spectral form `F_ij(t) = sum_n int d nu J n W_i* W_j` at a single time.
pub fn exact_moments_spectral(sys: &SystemSpec, bath: &Bath, t: f64) -> Result<SecondMoments> {
    exact_moments_spectral_multibath(&MultiBathSpec::single(sys, bath), sys, t, &ExactOptions::default())
}

pub fn exact_moments_spectral_multibath(
    multi: &MultiBathSpec,
    sys: &SystemSpec,
    t: f64,
    opts: &ExactOptions,
) -> Result<SecondMoments> {
    if t < 0.0 {
        return Err(Error::domain("spectral moments need t >= 0"));
    }
    if t == 0.0 {
        return Ok(SecondMoments::default());
    }
    let dt = opts.max_dt;
    let (kernel, _) = Kernel::new(multi, sys, t, dt, opts)?;
    let bp = kernel.breakpoints();
    let width = kernel.poles.iter().map(|p| p.im.abs()).fold(1e-3, f64::max);
    spectral_sum(multi, sys.omega(), width, &bp, opts, "spectral moments", |nu| {
        let r = kernel.remainder_at(nu)?;
        Ok(kernel.w_at(nu, t, &r))
    })
}

/// Late-time limit `F_ij(inf) = sum_n int d nu J n conj(g_i) g_j`.
pub fn exact_steady_state(sys: &SystemSpec, bath: &Bath) -> Result<SecondMoments> {
    exact_steady_state_multibath(&MultiBathSpec::single(sys, bath), sys)
}

pub fn exact_steady_state_multibath(multi: &MultiBathSpec, sys: &SystemSpec) -> Result<SecondMoments> {
    let opts = ExactOptions::default();
    if sys.delta() == 0.0 && multi.is_parallel() {
        let p = multi.terms()[0].phi;
        if p[0] != 0.0 && p[1] != 0.0 {
            return Err(Error::NoSteadyState(
                "degenerate modes with a single coupling direction leave an undamped mode".into(),
            ));
        }
    }
    let set = find_poles_with(multi, sys, &opts)?;
    let bp: Vec<f64> = set
        .poles
        .iter()
        .map(|p| p.zeta.re)
        .chain([sys.omega_a, sys.omega_b])
        .collect();
    let width = set.poles.iter().map(|p| p.zeta.im.abs()).fold(1e-3, f64::max);
    spectral_sum(multi, sys.omega(), width, &bp, &opts, "steady state", |nu| {
        let ks = real_axis_ks(multi, nu)?;
        Ok(real_axis_g(multi, sys, &ks, nu))
    })
}
