// Copyright 2026 The coherence-lab Contributors
// SPDX-License-Identifier: Apache-2.0

//! Adaptive Gauss-Kronrod quadrature for complex-valued integrands and
//! fixed Gauss-Legendre panel rules.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_746_091_779_055,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// 10-point Gauss weights at XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-14,
            rel_tol: 1e-11,
            max_intervals: 4000,
        }
    }
}

impl QuadOptions {
    pub fn with_abs(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_rel(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: Complex64,
    pub error: f64,
}

/// Result of integrating `N` complex components together.
#[derive(Debug, Clone, Copy)]
pub struct QuadResultN<const N: usize> {
    pub value: [Complex64; N],
    pub error: f64,
}

struct Segment<const N: usize> {
    a: f64,
    b: f64,
    value: [Complex64; N],
    error: f64,
}

impl<const N: usize> PartialEq for Segment<N> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<const N: usize> Eq for Segment<N> {}
impl<const N: usize> PartialOrd for Segment<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Segment<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn norm_n<const N: usize>(v: &[Complex64; N]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn gk21<const N: usize, F: Fn(f64) -> [Complex64; N]>(f: &F, a: f64, b: f64) -> Segment<N> {
    let zero = Complex64::new(0.0, 0.0);
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = [zero; N];
    let mut gauss = [zero; N];
    let mut abs_sum = [0.0; N];
    for k in 0..N {
        kron[k] = fc[k] * WGK[10];
        abs_sum[k] = fc[k].norm() * WGK[10];
    }
    for j in 0..10 {
        let dx = h * XGK[j];
        let lo = f(c - dx);
        let hi = f(c + dx);
        for k in 0..N {
            let s = lo[k] + hi[k];
            kron[k] += s * WGK[j];
            abs_sum[k] += (lo[k].norm() + hi[k].norm()) * WGK[j];
            if j % 2 == 1 {
                gauss[k] += s * WG[j / 2];
            }
        }
    }
    let mut value = [zero; N];
    let mut error = 0.0f64;
    for k in 0..N {
        value[k] = kron[k] * h;
        let raw = ((kron[k] - gauss[k]) * h).norm();
        // QUADPACK-style scaling of the Kronrod-Gauss difference.
        let scale = abs_sum[k] * h.abs();
        let e = if scale > 0.0 && raw > 0.0 {
            let r = (200.0 * raw / scale).powf(1.5).min(1.0);
            (scale * r).max(50.0 * f64::EPSILON * scale)
        } else {
            raw
        };
        error = error.max(e);
    }
    Segment { a, b, value, error }
}

/// Integrates `f` over `[a, b]`, splitting first at every breakpoint that
/// lies strictly inside the interval.
pub fn integrate<F: Fn(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: QuadOptions,
    what: &str,
) -> Result<QuadResult> {
    let r = integrate_n(|x| [f(x)], a, b, breakpoints, opts, what)?;
    Ok(QuadResult {
        value: r.value[0],
        error: r.error,
    })
}

/// Vector-valued form of [`integrate`]; the error estimate and tolerance
/// use the largest component.
pub fn integrate_n<const N: usize, F: Fn(f64) -> [Complex64; N]>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: QuadOptions,
    what: &str,
) -> Result<QuadResultN<N>> {
    let zero = [Complex64::new(0.0, 0.0); N];
    if a == b {
        return Ok(QuadResultN {
            value: zero,
            error: 0.0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut pts = vec![lo];
    let mut inner: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x.is_finite() && x > lo && x < hi)
        .collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    pts.extend(inner);
    pts.push(hi);

    let add = |acc: &mut [Complex64; N], v: &[Complex64; N], s: f64| {
        for k in 0..N {
            acc[k] += v[k] * s;
        }
    };
    let mut heap = BinaryHeap::new();
    let mut total = zero;
    let mut err = 0.0;
    for w in pts.windows(2) {
        let s = gk21(&f, w[0], w[1]);
        add(&mut total, &s.value, 1.0);
        err += s.error;
        heap.push(s);
    }
    let mut count = heap.len();
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * norm_n(&total));
        if err <= tol {
            break;
        }
        let fail = Error::Quadrature {
            what: what.to_owned(),
            estimate: err,
            tolerance: tol,
        };
        if count >= opts.max_intervals {
            return Err(fail);
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split further in floating point.
            return Err(fail);
        }
        let l = gk21(&f, worst.a, mid);
        let r = gk21(&f, mid, worst.b);
        add(&mut total, &l.value, 1.0);
        add(&mut total, &r.value, 1.0);
        add(&mut total, &worst.value, -1.0);
        err += l.error + r.error - worst.error;
        heap.push(l);
        heap.push(r);
        count += 1;
    }
    // Recompute from segments to drop accumulated rounding from updates.
    let mut value = zero;
    let mut error = 0.0;
    for s in heap.iter() {
        add(&mut value, &s.value, sign);
        error += s.error;
    }
    Ok(QuadResultN { value, error })
}

/// Real-valued convenience wrapper around [`integrate`].
pub fn integrate_real<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: QuadOptions,
    what: &str,
) -> Result<(f64, f64)> {
    let r = integrate(|x| Complex64::new(f(x), 0.0), a, b, breakpoints, opts, what)?;
    Ok((r.value.re, r.error))
}

/// Integrates over the whole real line through `x = c + s tan(theta)`.
pub fn integrate_line<F: Fn(f64) -> Complex64>(
    f: F,
    center: f64,
    scale: f64,
    breakpoints: &[f64],
    opts: QuadOptions,
    what: &str,
) -> Result<QuadResult> {
    let r = integrate_line_n(|x| [f(x)], center, scale, breakpoints, opts, what)?;
    Ok(QuadResult {
        value: r.value[0],
        error: r.error,
    })
}

/// Vector-valued form of [`integrate_line`].
pub fn integrate_line_n<const N: usize, F: Fn(f64) -> [Complex64; N]>(
    f: F,
    center: f64,
    scale: f64,
    breakpoints: &[f64],
    opts: QuadOptions,
    what: &str,
) -> Result<QuadResultN<N>> {
    let half = std::f64::consts::FRAC_PI_2;
    let g = |th: f64| {
        let (s, c) = th.sin_cos();
        if c <= 0.0 {
            return [Complex64::new(0.0, 0.0); N];
        }
        let x = center + scale * s / c;
        let mut v = f(x);
        let jac = scale / (c * c);
        for z in v.iter_mut() {
            *z *= jac;
        }
        v
    };
    let bp: Vec<f64> = breakpoints
        .iter()
        .map(|&x| ((x - center) / scale).atan())
        .collect();
    integrate_n(g, -half, half, &bp, opts, what)
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm) / (z * z - 1.0);
            if n == 1 {
                dp = 1.0;
            }
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n == 1 {
        x[0] = 0.0;
        w[0] = 2.0;
    }
    (x, w)
}

/// Composite Gauss-Legendre rule on `[a, b]` with panels no wider than
/// `max_width` and `order` points per panel.
pub fn panel_rule(a: f64, b: f64, max_width: f64, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(order);
    let panels = (((b - a) / max_width).ceil() as usize).max(1);
    let h = (b - a) / panels as f64;
    let mut xs = Vec::with_capacity(panels * order);
    let mut ws = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let c = a + (p as f64 + 0.5) * h;
        for (x, w) in gx.iter().zip(&gw) {
            xs.push(c + 0.5 * h * x);
            ws.push(0.5 * h * w);
        }
    }
    (xs, ws)
}
