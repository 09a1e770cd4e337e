// Copyright 2026 The coherence-lab Contributors
// SPDX-License-Identifier: Apache-2.0

//! Bath models: spectral densities, occupations, the correlation function
//! and the complex response `K = pi J + i PV int J/(x - w)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, RwLock};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quad::{self, QuadOptions};

/// Tail weight below which the spectral integrals are truncated, relative to
/// the bath's reference height.
pub const TAIL_CUTOFF: f64 = 1e-14;

/// `J(w) = J0 exp(z - z w/w0) (w/w0)^z` for `w > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperOhmic {
    pub j0: f64,
    pub omega0: f64,
    pub z: f64,
}

impl SuperOhmic {
    pub fn new(j0: f64, omega0: f64, z: f64) -> Self {
        SuperOhmic { j0, omega0, z }
    }

    pub fn j_value(&self, nu: f64) -> f64 {
        if nu <= 0.0 || self.j0 == 0.0 {
            return 0.0;
        }
        let x = nu / self.omega0;
        self.j0 * (self.z * (1.0 - x + x.ln())).exp()
    }

    /// Continuation of `j_value` off the positive real axis (principal
    /// branch of the power).
    pub fn j_complex(&self, zeta: Complex64) -> Complex64 {
        if self.j0 == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let x = zeta / self.omega0;
        self.j0 * (self.z * (1.0 - x + x.ln())).exp()
    }

    fn validate(&self) -> Result<()> {
        if !(self.j0.is_finite() && self.j0 >= 0.0) {
            return Err(Error::domain(format!("J0 must be finite and >= 0, got {}", self.j0)));
        }
        if !(self.omega0.is_finite() && self.omega0 > 0.0) {
            return Err(Error::domain(format!("omega0 must be > 0, got {}", self.omega0)));
        }
        if !(self.z.is_finite() && self.z > 0.0) {
            return Err(Error::domain(format!(
                "exponent z must be > 0 for an integrable bath, got {}",
                self.z
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpectralDensity {
    SuperOhmic(SuperOhmic),
    /// Constant `J0` on `[nu_min, nu_max]`. Both limits infinite gives the
    /// wide-band (white-noise) bath.
    Flat { j0: f64, nu_min: f64, nu_max: f64 },
    MultiPeak(Vec<SuperOhmic>),
    /// Linear interpolation between `(nu, J)` nodes, zero outside.
    Tabulated(Vec<(f64, f64)>),
}

impl SpectralDensity {
    pub fn j_value(&self, nu: f64) -> f64 {
        match self {
            SpectralDensity::SuperOhmic(p) => p.j_value(nu),
            SpectralDensity::Flat { j0, nu_min, nu_max } => {
                if nu >= *nu_min && nu <= *nu_max {
                    *j0
                } else {
                    0.0
                }
            }
            SpectralDensity::MultiPeak(ps) => ps.iter().map(|p| p.j_value(nu)).sum(),
            SpectralDensity::Tabulated(t) => interpolate(t, nu),
        }
    }

    /// Analytic continuation of `J`, if the variant has one.
    pub fn j_complex(&self, zeta: Complex64) -> Option<Complex64> {
        match self {
            SpectralDensity::SuperOhmic(p) => Some(p.j_complex(zeta)),
            SpectralDensity::Flat { j0, .. } => Some(Complex64::new(*j0, 0.0)),
            SpectralDensity::MultiPeak(ps) => Some(ps.iter().map(|p| p.j_complex(zeta)).sum()),
            SpectralDensity::Tabulated(_) => None,
        }
    }

    /// Reference height used for relative tolerances.
    pub fn j_ref(&self) -> f64 {
        match self {
            SpectralDensity::SuperOhmic(p) => p.j0,
            SpectralDensity::Flat { j0, .. } => *j0,
            SpectralDensity::MultiPeak(ps) => ps.iter().map(|p| p.j0).fold(0.0, f64::max),
            SpectralDensity::Tabulated(t) => t.iter().map(|p| p.1).fold(0.0, f64::max),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            SpectralDensity::SuperOhmic(p) => p.validate(),
            SpectralDensity::MultiPeak(ps) => ps.iter().try_for_each(SuperOhmic::validate),
            SpectralDensity::Flat { j0, nu_min, nu_max } => {
                if !(j0.is_finite() && *j0 >= 0.0) {
                    return Err(Error::domain(format!("flat J0 must be >= 0, got {j0}")));
                }
                if nu_min.is_nan() || nu_max.is_nan() || nu_min >= nu_max {
                    return Err(Error::domain(format!(
                        "flat band needs nu_min < nu_max, got [{nu_min}, {nu_max}]"
                    )));
                }
                if nu_min.is_finite() != nu_max.is_finite() {
                    return Err(Error::domain(
                        "flat band must be either finite or infinite on both sides",
                    ));
                }
                Ok(())
            }
            SpectralDensity::Tabulated(t) => {
                if t.len() < 2 {
                    return Err(Error::domain("tabulated density needs at least two nodes"));
                }
                for w in t.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        return Err(Error::domain("tabulated frequencies must be strictly increasing"));
                    }
                }
                for &(nu, j) in t {
                    if !(nu.is_finite() && j.is_finite() && j >= 0.0) {
                        return Err(Error::domain(format!("bad tabulated node ({nu}, {j})")));
                    }
                }
                Ok(())
            }
        }
    }
}

fn interpolate(t: &[(f64, f64)], nu: f64) -> f64 {
    let first = t[0].0;
    let last = t[t.len() - 1].0;
    if nu < first || nu > last {
        return 0.0;
    }
    let k = t.partition_point(|p| p.0 <= nu);
    if k == 0 {
        return t[0].1;
    }
    if k == t.len() {
        return t[k - 1].1;
    }
    let (x0, y0) = t[k - 1];
    let (x1, y1) = t[k];
    y0 + (y1 - y0) * (nu - x0) / (x1 - x0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Occupation {
    /// Bose-Einstein `1/(e^{nu/kBT} - 1)`.
    Thermal { kbt: f64 },
    /// Constant occupation across the band.
    Flat { n0: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BathSpec {
    pub spectral: SpectralDensity,
    pub occupation: Occupation,
}

impl BathSpec {
    pub fn new(spectral: SpectralDensity, occupation: Occupation) -> Self {
        BathSpec {
            spectral,
            occupation,
        }
    }

    pub fn super_ohmic(j0: f64, omega0: f64, z: f64, kbt: f64) -> Self {
        BathSpec::new(
            SpectralDensity::SuperOhmic(SuperOhmic::new(j0, omega0, z)),
            Occupation::Thermal { kbt },
        )
    }

    pub fn flat(j0: f64, nu_min: f64, nu_max: f64, n0: f64) -> Self {
        BathSpec::new(
            SpectralDensity::Flat { j0, nu_min, nu_max },
            Occupation::Flat { n0 },
        )
    }
}

/// Bath response functions at a real frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathResponse {
    pub omega: f64,
    pub k: Complex64,
    pub k_up: Complex64,
    pub k_down: Complex64,
}

/// Which spectral weight enters a Hilbert transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    /// `J`
    Bare,
    /// `n J`
    Up,
    /// `(n + 1) J`
    Down,
}

/// A validated bath with its truncated support and a write-once response
/// cache. Clones share the cache.
#[derive(Debug, Clone)]
pub struct Bath {
    spec: BathSpec,
    support: (f64, f64),
    breaks: Vec<f64>,
    cache: Arc<RwLock<HashMap<u64, BathResponse>>>,
}

impl PartialEq for Bath {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl Bath {
    pub fn new(spec: BathSpec) -> Result<Self> {
        spec.spectral.validate()?;
        match spec.occupation {
            Occupation::Thermal { kbt } => {
                if !(kbt.is_finite() && kbt > 0.0) {
                    return Err(Error::domain(format!("kBT must be > 0, got {kbt}")));
                }
                match &spec.spectral {
                    SpectralDensity::Flat { j0, nu_min, .. } if *j0 > 0.0 && *nu_min <= 0.0 => {
                        return Err(Error::domain(
                            "thermal occupation of a flat band needs nu_min > 0",
                        ));
                    }
                    SpectralDensity::Tabulated(t) => {
                        let bad = t.iter().any(|&(nu, j)| nu <= 0.0 && j > 0.0)
                            || interpolate(t, 0.0) > 0.0;
                        if bad {
                            return Err(Error::domain(
                                "thermal occupation needs J = 0 for nu <= 0 (n_B J is not integrable)",
                            ));
                        }
                    }
                    _ => {}
                }
            }
            Occupation::Flat { n0 } => {
                if !(n0.is_finite() && n0 >= 0.0) {
                    return Err(Error::domain(format!("n0 must be >= 0, got {n0}")));
                }
            }
        }
        let mut bath = Bath {
            spec,
            support: (0.0, 0.0),
            breaks: Vec::new(),
            cache: Arc::new(RwLock::new(HashMap::new())),
        };
        bath.support = bath.compute_support();
        bath.breaks = bath.compute_breaks();
        Ok(bath)
    }

    pub fn spec(&self) -> &BathSpec {
        &self.spec
    }

    pub fn j_value(&self, nu: f64) -> f64 {
        self.spec.spectral.j_value(nu)
    }

    pub fn j_ref(&self) -> f64 {
        self.spec.spectral.j_ref()
    }

    /// Integration range after tail truncation. Empty (`lo == hi`) for a
    /// bath with `J = 0`.
    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    /// Constant `J` on the whole real line: delta-correlated noise.
    pub fn is_white_noise(&self) -> bool {
        matches!(self.spec.spectral, SpectralDensity::Flat { nu_min, .. } if nu_min.is_infinite())
            && self.j_ref() > 0.0
    }

    /// `int J d nu` over the support; infinite for white noise.
    pub fn spectral_weight(&self) -> Result<f64> {
        if self.is_white_noise() {
            return Ok(f64::INFINITY);
        }
        let (a, b) = self.support;
        if a == b {
            return Ok(0.0);
        }
        let opts = QuadOptions::default().with_abs(1e-16 * self.j_ref().max(f64::MIN_POSITIVE));
        Ok(quad::integrate_real(|x| self.j_value(x), a, b, &self.breaks, opts, "spectral weight")?.0)
    }

    pub fn is_zero(&self) -> bool {
        self.j_ref() == 0.0
    }

    pub fn occupation(&self, nu: f64) -> Result<f64> {
        match self.spec.occupation {
            Occupation::Flat { n0 } => Ok(n0),
            Occupation::Thermal { kbt } => {
                if nu <= 0.0 {
                    return Err(Error::domain(format!(
                        "Bose occupation undefined at nu = {nu} <= 0"
                    )));
                }
                Ok(1.0 / (nu / kbt).exp_m1())
            }
        }
    }

    /// Spectral weight for a Hilbert transform; zero wherever `J` is.
    pub fn weight(&self, nu: f64, w: Weight) -> f64 {
        let j = self.j_value(nu);
        if j == 0.0 || w == Weight::Bare {
            return j;
        }
        let n = match self.spec.occupation {
            Occupation::Flat { n0 } => n0,
            Occupation::Thermal { kbt } => {
                if nu <= 0.0 {
                    return 0.0;
                }
                1.0 / (nu / kbt).exp_m1()
            }
        };
        match w {
            Weight::Up => n * j,
            Weight::Down => (n + 1.0) * j,
            Weight::Bare => unreachable!(),
        }
    }

    fn envelope(&self, nu: f64) -> f64 {
        self.weight(nu, Weight::Down).max(self.j_value(nu))
    }

    fn compute_support(&self) -> (f64, f64) {
        if self.is_zero() {
            return (0.0, 0.0);
        }
        let floor = TAIL_CUTOFF * self.j_ref();
        match &self.spec.spectral {
            SpectralDensity::Flat { nu_min, nu_max, .. } => (*nu_min, *nu_max),
            SpectralDensity::Tabulated(t) => (t[0].0, t[t.len() - 1].0),
            SpectralDensity::SuperOhmic(p) => (0.0, self.upper_cutoff(p.omega0, floor)),
            SpectralDensity::MultiPeak(ps) => {
                let top = ps.iter().filter(|p| p.j0 > 0.0).map(|p| p.omega0).fold(0.0, f64::max);
                (0.0, self.upper_cutoff(top, floor))
            }
        }
    }

    // Beyond the highest peak the envelope decreases monotonically.
    fn upper_cutoff(&self, start: f64, floor: f64) -> f64 {
        let mut lo = start;
        let mut hi = start * 1.25;
        while self.envelope(hi) >= floor {
            lo = hi;
            hi *= 1.25;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.envelope(mid) >= floor {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    fn compute_breaks(&self) -> Vec<f64> {
        let (lo, hi) = self.support;
        let mut b = match &self.spec.spectral {
            SpectralDensity::Tabulated(t) => t.iter().map(|p| p.0).collect(),
            SpectralDensity::SuperOhmic(p) => vec![p.omega0],
            SpectralDensity::MultiPeak(ps) => ps.iter().map(|p| p.omega0).collect(),
            SpectralDensity::Flat { .. } => Vec::new(),
        };
        b.retain(|&x| x > lo && x < hi);
        b
    }

    fn quad_opts(&self) -> QuadOptions {
        let scale = self.j_ref().max(f64::MIN_POSITIVE);
        QuadOptions::default().with_abs(1e-13 * scale).with_rel(1e-11)
    }

    /// `PV int w(x)/(x - omega) dx` over the support.
    pub fn hilbert(&self, omega: f64, w: Weight) -> Result<f64> {
        let (a, b) = self.support;
        if self.is_zero() || a == b || self.is_white_noise() {
            return Ok(0.0);
        }
        if let (SpectralDensity::Flat { j0, .. }, Occupation::Flat { n0 }) =
            (&self.spec.spectral, self.spec.occupation)
        {
            if omega == a || omega == b {
                return Err(Error::domain(format!(
                    "Hilbert transform diverges at the band edge {omega}"
                )));
            }
            let h = match w {
                Weight::Bare => *j0,
                Weight::Up => j0 * n0,
                Weight::Down => j0 * (n0 + 1.0),
            };
            return Ok(h * ((b - omega).abs() / (a - omega).abs()).ln());
        }
        let mut bp = self.breaks.clone();
        if omega > a && omega < b {
            let w0 = self.weight(omega, w);
            bp.push(omega);
            let f = |x: f64| {
                if x == omega {
                    return Complex64::new(0.0, 0.0);
                }
                Complex64::new((self.weight(x, w) - w0) / (x - omega), 0.0)
            };
            let r = quad::integrate(f, a, b, &bp, self.quad_opts(), "Hilbert transform")?;
            Ok(r.value.re + w0 * ((b - omega) / (omega - a)).ln())
        } else {
            if omega == a || omega == b {
                let edge = self.weight(omega, w);
                if edge != 0.0 {
                    return Err(Error::domain(format!(
                        "Hilbert transform diverges at the band edge {omega}"
                    )));
                }
            }
            let f = |x: f64| Complex64::new(self.weight(x, w) / (x - omega), 0.0);
            let r = quad::integrate(f, a, b, &bp, self.quad_opts(), "Hilbert transform")?;
            Ok(r.value.re)
        }
    }

    /// `K`, `K_up`, `K_down` at a real frequency. Cached per frequency.
    pub fn response(&self, omega: f64) -> Result<BathResponse> {
        let key = omega.to_bits();
        if let Some(r) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(*r);
        }
        let r = self.compute_response(omega)?;
        self.cache
            .write()
            .expect("cache lock")
            .entry(key)
            .or_insert(r);
        Ok(r)
    }

    /// Uncached evaluation of [`Bath::response`].
    pub fn compute_response(&self, omega: f64) -> Result<BathResponse> {
        let re = |w| PI * self.weight(omega, w);
        Ok(BathResponse {
            omega,
            k: Complex64::new(re(Weight::Bare), self.hilbert(omega, Weight::Bare)?),
            k_up: Complex64::new(re(Weight::Up), self.hilbert(omega, Weight::Up)?),
            k_down: Complex64::new(re(Weight::Down), self.hilbert(omega, Weight::Down)?),
        })
    }

    /// `K` alone on the real axis (uncached; used for dense frequency grids).
    pub fn k_real_axis(&self, omega: f64) -> Result<Complex64> {
        Ok(Complex64::new(
            PI * self.j_value(omega),
            self.hilbert(omega, Weight::Bare)?,
        ))
    }

    /// `int J(x)/(x - zeta) dx` for `Im zeta != 0`.
    fn cauchy(&self, zeta: Complex64) -> Result<Complex64> {
        let (a, b) = self.support;
        if self.is_zero() || a == b {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if let SpectralDensity::Flat { j0, .. } = self.spec.spectral {
            return Ok(j0 * ((b - zeta).ln() - (a - zeta).ln()));
        }
        let mut bp = self.breaks.clone();
        let inside = zeta.re > a && zeta.re < b;
        let anchor = if inside {
            bp.push(zeta.re);
            match self.spec.spectral.j_complex(zeta) {
                Some(j) => j,
                None => Complex64::new(self.j_value(zeta.re), 0.0),
            }
        } else {
            Complex64::new(0.0, 0.0)
        };
        let f = |x: f64| (self.j_value(x) - anchor) / (x - zeta);
        let r = quad::integrate(f, a, b, &bp, self.quad_opts(), "Cauchy integral")?;
        let log_term = if inside {
            anchor * ((b - zeta).ln() - (a - zeta).ln())
        } else {
            Complex64::new(0.0, 0.0)
        };
        Ok(r.value + log_term)
    }

    /// `K*(zeta)`: the retarded-side value `-i int J/(x - zeta)` for
    /// `Im zeta > 0`, `conj(K(omega))` on the real axis, and its analytic
    /// continuation across the support into the lower half plane.
    pub fn response_continued(&self, zeta: Complex64) -> Result<Complex64> {
        if self.is_zero() {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if self.is_white_noise() {
            return Ok(Complex64::new(PI * self.j_ref(), 0.0));
        }
        if zeta.im == 0.0 {
            return Ok(self.k_real_axis(zeta.re)?.conj());
        }
        let i = Complex64::new(0.0, 1.0);
        let base = -i * self.cauchy(zeta)?;
        if zeta.im > 0.0 {
            return Ok(base);
        }
        let (a, b) = self.support;
        if zeta.re <= a || zeta.re >= b {
            return Ok(base);
        }
        let j = self.spec.spectral.j_complex(zeta).ok_or_else(|| {
            Error::Unsupported(
                "tabulated spectral density has no continuation below the real axis".into(),
            )
        })?;
        Ok(base + 2.0 * PI * j)
    }

    /// True if [`Bath::response_continued`] works below the real axis.
    pub fn has_continuation(&self) -> bool {
        !matches!(self.spec.spectral, SpectralDensity::Tabulated(_)) || self.is_zero()
    }

    /// `alpha(tau) = int J n e^{-i nu tau} d nu`.
    pub fn alpha(&self, tau: f64) -> Result<Complex64> {
        if tau < 0.0 {
            return Ok(self.alpha(-tau)?.conj());
        }
        if self.is_zero() {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if self.is_white_noise() {
            return Err(Error::Unsupported(
                "white-noise bath has a delta-correlated alpha".into(),
            ));
        }
        if let Some(v) = self.alpha_flat(tau) {
            return Ok(v);
        }
        let (a, b) = self.support;
        let pieces = ((b - a) * tau / (4.0 * PI)).ceil().clamp(1.0, 2000.0) as usize;
        let mut bp = self.breaks.clone();
        bp.extend((1..pieces).map(|k| a + (b - a) * k as f64 / pieces as f64));
        let f = |nu: f64| self.weight(nu, Weight::Up) * Complex64::new(0.0, -nu * tau).exp();
        let opts = self.quad_opts().with_rel(1e-12);
        let opts = QuadOptions {
            max_intervals: 20_000,
            ..opts
        };
        Ok(quad::integrate(f, a, b, &bp, opts, "bath correlation function")?.value)
    }

    fn alpha_flat(&self, tau: f64) -> Option<Complex64> {
        match (&self.spec.spectral, self.spec.occupation) {
            (SpectralDensity::Flat { j0, nu_min, nu_max }, Occupation::Flat { n0 }) => {
                let c = j0 * n0;
                if tau == 0.0 {
                    return Some(Complex64::new(c * (nu_max - nu_min), 0.0));
                }
                let e = |nu: f64| Complex64::new(0.0, -nu * tau).exp();
                Some(c * (e(*nu_min) - e(*nu_max)) / Complex64::new(0.0, tau))
            }
            _ => None,
        }
    }

    /// `alpha` on many times at once with a fixed composite Gauss-Legendre
    /// rule fine enough for the largest `|tau|`.
    pub fn alpha_grid(&self, taus: &[f64]) -> Result<Vec<Complex64>> {
        if self.is_zero() {
            return Ok(vec![Complex64::new(0.0, 0.0); taus.len()]);
        }
        if self.is_white_noise() {
            return Err(Error::Unsupported(
                "white-noise bath has a delta-correlated alpha".into(),
            ));
        }
        if let Some(_) = self.alpha_flat(0.0) {
            return Ok(taus.iter().map(|&t| {
                let v = self.alpha_flat(t.abs()).expect("flat");
                if t < 0.0 { v.conj() } else { v }
            }).collect());
        }
        let (a, b) = self.support;
        let tmax = taus.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        let feature = match &self.spec.spectral {
            SpectralDensity::SuperOhmic(p) => p.omega0 / 8.0,
            SpectralDensity::MultiPeak(ps) => {
                ps.iter().map(|p| p.omega0 / 8.0).fold(f64::INFINITY, f64::min)
            }
            _ => (b - a) / 64.0,
        };
        let width = (6.0 / tmax.max(1e-300)).min(feature).min((b - a) / 16.0);
        let mut edges = vec![a];
        edges.extend(self.breaks.iter().copied());
        edges.push(b);
        let mut xs = Vec::new();
        let mut ws = Vec::new();
        for e in edges.windows(2) {
            let (x, w) = quad::panel_rule(e[0], e[1], width, 20);
            xs.extend(x);
            ws.extend(w);
        }
        let vals: Vec<f64> = xs
            .iter()
            .zip(&ws)
            .map(|(&x, &w)| w * self.weight(x, Weight::Up))
            .collect();
        if let Some(step) = uniform_step(taus) {
            return Ok(alpha_uniform(&xs, &vals, taus.len(), step));
        }
        Ok(taus
            .par_iter()
            .map(|&t| {
                let mut s = Complex64::new(0.0, 0.0);
                for (x, v) in xs.iter().zip(&vals) {
                    s += *v * Complex64::new(0.0, -x * t).exp();
                }
                s
            })
            .collect())
    }
}

/// Step of a grid `0, h, 2h, ...`, if `taus` is one.
fn uniform_step(taus: &[f64]) -> Option<f64> {
    if taus.len() < 3 || taus[0] != 0.0 {
        return None;
    }
    let h = taus[1];
    if !(h > 0.0) {
        return None;
    }
    taus.iter()
        .enumerate()
        .all(|(k, t)| (t - k as f64 * h).abs() <= 1e-12 * h.max(t.abs()))
        .then_some(h)
}

/// `sum_x v_x e^{-i x k h}` for `k < n`, by phase recurrence per node.
fn alpha_uniform(xs: &[f64], vals: &[f64], n: usize, h: f64) -> Vec<Complex64> {
    const RESEED: usize = 512;
    let chunk = (xs.len() / rayon::current_num_threads().max(1)).max(64);
    xs.par_chunks(chunk)
        .zip(vals.par_chunks(chunk))
        .map(|(xc, vc)| {
            let mut acc = vec![Complex64::new(0.0, 0.0); n];
            for (x, v) in xc.iter().zip(vc) {
                let step = Complex64::new(0.0, -x * h).exp();
                let mut phase = Complex64::new(*v, 0.0);
                for (k, a) in acc.iter_mut().enumerate() {
                    if k % RESEED == 0 && k > 0 {
                        phase = *v * Complex64::new(0.0, -x * h * k as f64).exp();
                    }
                    *a += phase;
                    phase *= step;
                }
            }
            acc
        })
        .reduce(
            || vec![Complex64::new(0.0, 0.0); n],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        )
}

/// Free-function form of [`SpectralDensity::j_value`].
pub fn j_value(spec: &SpectralDensity, nu: f64) -> f64 {
    spec.j_value(nu)
}
