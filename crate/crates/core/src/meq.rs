// Copyright 2026 The coherence-lab Contributors
// SPDX-License-Identifier: Apache-2.0

//! Time-local moment equations `df/dt = -M f + f0` and their analysis.

use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64;

use crate::bath::{Bath, BathResponse};
use crate::error::{Error, Result};
use crate::model::{MultiBathSpec, SystemSpec};
use crate::moments::MomentVector;
use crate::ode::{self, OdeOptions};

type C2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeneratorKind {
    BR,
    SpBR,
    Secular,
    CollectiveLindblad,
    IndividualLindblad,
}

impl GeneratorKind {
    pub fn name(&self) -> &'static str {
        match self {
            GeneratorKind::BR => "br",
            GeneratorKind::SpBR => "spbr",
            GeneratorKind::Secular => "secular",
            GeneratorKind::CollectiveLindblad => "collective",
            GeneratorKind::IndividualLindblad => "individual",
        }
    }
}

/// `df/dt = -M f + f0` in the coordinates of [`MomentVector`]. `m` is row
/// major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Generator {
    pub m: [[f64; 4]; 4],
    pub f0: [f64; 4],
    pub kind: GeneratorKind,
}

impl Generator {
    pub fn matrix(&self) -> Matrix4<f64> {
        Matrix4::from_fn(|i, j| self.m[i][j])
    }

    pub fn source(&self) -> Vector4<f64> {
        Vector4::from_row_slice(&self.f0)
    }

    /// `-M f + f0`.
    pub fn rhs(&self, f: &MomentVector) -> [f64; 4] {
        let mut out = self.f0;
        for (i, o) in out.iter_mut().enumerate() {
            for j in 0..4 {
                *o -= self.m[i][j] * f.0[j];
            }
        }
        out
    }

    /// Energy splitting entry `E0` (`M[3][2]`).
    pub fn e0(&self) -> f64 {
        self.m[3][2]
    }

    /// Coherence damping entry `Gamma0` (`M[2][2]`).
    pub fn gamma0(&self) -> f64 {
        self.m[2][2]
    }

    /// Numerical eigenvalues of `M`.
    pub fn eigenvalues(&self) -> [Complex64; 4] {
        let ev = self.matrix().complex_eigenvalues();
        let mut out = [ev[0], ev[1], ev[2], ev[3]];
        out.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        out
    }
}

/// Dissipator coefficient matrices of the BR master equation and the
/// Lamb-shift matrix, before multiplication by the couplings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KossakowskiPair {
    pub l_down: C2,
    pub l_up: C2,
    pub h: C2,
}

/// Eigenvalues of `L_down` and `L_up`, ascending.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LindbladRates {
    pub down: [f64; 2],
    pub up: [f64; 2],
}

fn mat_mul(a: &C2, b: &C2) -> C2 {
    let mut c = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn transpose(a: &C2) -> C2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

fn f_from_vec(v: &[f64; 4]) -> C2 {
    let fab = Complex64::new(0.5 * v[2], 0.5 * v[3]);
    [
        [Complex64::new(v[0], 0.0), fab],
        [fab.conj(), Complex64::new(v[1], 0.0)],
    ]
}

fn vec_from_f(f: &C2) -> [f64; 4] {
    [f[0][0].re, f[1][1].re, 2.0 * f[0][1].re, 2.0 * f[0][1].im]
}

/// Moment equation for a quadratic master equation with Hamiltonian
/// `sum H_mn psi_m^dag psi_n`, loss coefficients `c_down` and gain
/// coefficients `c_up` (both already multiplied by the couplings):
/// `dF/dt = i(H^T F - F H^T) - C^T F - F C^T + C' F + F C' + 2 C'`.
pub fn generator_from_quadratic(h: &C2, c_down: &C2, c_up: &C2, kind: GeneratorKind) -> Generator {
    let ht = transpose(h);
    let ct = transpose(c_down);
    let linear = |f: &C2| -> C2 {
        let a = mat_mul(&ht, f);
        let b = mat_mul(f, &ht);
        let c1 = mat_mul(&ct, f);
        let c2 = mat_mul(f, &ct);
        let u1 = mat_mul(c_up, f);
        let u2 = mat_mul(f, c_up);
        let mut out = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = I * (a[i][j] - b[i][j]) - c1[i][j] - c2[i][j] + u1[i][j] + u2[i][j];
            }
        }
        out
    };
    let mut m = [[0.0; 4]; 4];
    for k in 0..4 {
        let mut e = [0.0; 4];
        e[k] = 1.0;
        let col = vec_from_f(&linear(&f_from_vec(&e)));
        for i in 0..4 {
            m[i][k] = -col[i];
        }
    }
    let two_cu = [
        [2.0 * c_up[0][0], 2.0 * c_up[0][1]],
        [2.0 * c_up[1][0], 2.0 * c_up[1][1]],
    ];
    Generator {
        m,
        f0: vec_from_f(&two_cu),
        kind,
    }
}

fn free_matrix(omega_a: f64, omega_b: f64) -> [[f64; 4]; 4] {
    let e = omega_b - omega_a;
    let mut m = [[0.0; 4]; 4];
    m[2][3] = -e;
    m[3][2] = e;
    m
}

/// Bath-dependent part of the BR matrix for one bath and coupling vector.
fn br_dissipative(phi: [f64; 2], ka: &BathResponse, kb: &BathResponse, schrodinger: bool) -> ([[f64; 4]; 4], [f64; 4]) {
    let [pa, pb] = phi;
    let pab = pa * pb;
    let (a, b) = (ka.k, kb.k);
    // The Schrodinger-picture variant samples the coherence columns at the
    // other mode's frequency.
    let (c3a, c3b) = if schrodinger { (a, b) } else { (b, a) };
    let lamb = if schrodinger {
        pa * pa * b.im - pb * pb * a.im
    } else {
        pa * pa * a.im - pb * pb * b.im
    };
    let gamma0 = if schrodinger {
        pa * pa * b.re + pb * pb * a.re
    } else {
        pa * pa * a.re + pb * pb * b.re
    };
    let m = [
        [2.0 * pa * pa * a.re, 0.0, pab * c3a.re, pab * c3a.im],
        [0.0, 2.0 * pb * pb * b.re, pab * c3b.re, -pab * c3b.im],
        [2.0 * pab * a.re, 2.0 * pab * b.re, gamma0, -lamb],
        [-2.0 * pab * a.im, 2.0 * pab * b.im, lamb, gamma0],
    ];
    let up_bar = 0.5 * (ka.k_up + kb.k_up);
    let up_delta = 0.5 * (ka.k_up - kb.k_up);
    let f0 = [
        2.0 * pa * pa * ka.k_up.re,
        2.0 * pb * pb * kb.k_up.re,
        4.0 * pab * up_bar.re,
        -4.0 * pab * up_delta.im,
    ];
    (m, f0)
}

fn add_into(acc: &mut [[f64; 4]; 4], m: &[[f64; 4]; 4]) {
    for i in 0..4 {
        for j in 0..4 {
            acc[i][j] += m[i][j];
        }
    }
}

fn assemble(
    omega_a: f64,
    omega_b: f64,
    parts: &[([[f64; 4]; 4], [f64; 4])],
    kind: GeneratorKind,
) -> Generator {
    let mut m = free_matrix(omega_a, omega_b);
    let mut f0 = [0.0; 4];
    for (dm, df) in parts {
        add_into(&mut m, dm);
        for k in 0..4 {
            f0[k] += df[k];
        }
    }
    Generator { m, f0, kind }
}

/// Bloch-Redfield generator, bath responses sampled at `omega_a`, `omega_b`.
pub fn br_generator(sys: &SystemSpec, bath: &Bath) -> Result<Generator> {
    let ka = bath.response(sys.omega_a)?;
    let kb = bath.response(sys.omega_b)?;
    let part = br_dissipative(sys.phis(), &ka, &kb, false);
    Ok(assemble(sys.omega_a, sys.omega_b, &[part], GeneratorKind::BR))
}

/// Schrodinger-picture Bloch-Redfield generator.
pub fn spbr_generator(sys: &SystemSpec, bath: &Bath) -> Result<Generator> {
    let ka = bath.response(sys.omega_a)?;
    let kb = bath.response(sys.omega_b)?;
    let part = br_dissipative(sys.phis(), &ka, &kb, true);
    Ok(assemble(sys.omega_a, sys.omega_b, &[part], GeneratorKind::SpBR))
}

/// Drops every term proportional to `phi_a phi_b`.
pub fn secularize(g: &Generator) -> Result<Generator> {
    match g.kind {
        GeneratorKind::BR | GeneratorKind::SpBR | GeneratorKind::Secular => {}
        other => {
            return Err(Error::Unsupported(format!(
                "secularization applies to BR/SpBR generators, not {}",
                other.name()
            )))
        }
    }
    let mut out = *g;
    for (i, j) in [(0, 2), (0, 3), (1, 2), (1, 3), (2, 0), (2, 1), (3, 0), (3, 1)] {
        out.m[i][j] = 0.0;
    }
    out.f0[2] = 0.0;
    out.f0[3] = 0.0;
    out.kind = GeneratorKind::Secular;
    Ok(out)
}

fn diag_h(sys: &SystemSpec) -> C2 {
    [
        [Complex64::new(sys.omega_a, 0.0), ZERO],
        [ZERO, Complex64::new(sys.omega_b, 0.0)],
    ]
}

/// Lindblad form with a single jump operator `phi_a psi_a + phi_b psi_b`,
/// rates taken at the mean frequency, no Lamb shift.
pub fn collective_generator(sys: &SystemSpec, bath: &Bath) -> Result<Generator> {
    let om = sys.omega();
    let j = std::f64::consts::PI * bath.j_value(om);
    let n = if j == 0.0 { 0.0 } else { bath.occupation(om)? };
    let (down, up) = (j * (n + 1.0), j * n);
    let p = sys.phis();
    let outer = |r: f64| -> C2 {
        let mut c = [[ZERO; 2]; 2];
        for i in 0..2 {
            for k in 0..2 {
                c[i][k] = Complex64::new(r * p[i] * p[k], 0.0);
            }
        }
        c
    };
    Ok(generator_from_quadratic(
        &diag_h(sys),
        &outer(down),
        &outer(up),
        GeneratorKind::CollectiveLindblad,
    ))
}

/// Lindblad form with independent jump operators on each mode, rates taken
/// at each mode's own frequency, no Lamb shift.
pub fn individual_generator(sys: &SystemSpec, bath: &Bath) -> Result<Generator> {
    let mut down = [[ZERO; 2]; 2];
    let mut up = [[ZERO; 2]; 2];
    for (i, (&w, &p)) in sys.omegas().iter().zip(sys.phis().iter()).enumerate() {
        let j = std::f64::consts::PI * bath.j_value(w);
        let n = if j == 0.0 { 0.0 } else { bath.occupation(w)? };
        down[i][i] = Complex64::new(p * p * j * (n + 1.0), 0.0);
        up[i][i] = Complex64::new(p * p * j * n, 0.0);
    }
    Ok(generator_from_quadratic(
        &diag_h(sys),
        &down,
        &up,
        GeneratorKind::IndividualLindblad,
    ))
}

/// Kossakowski and Lamb-shift matrices of the BR master equation.
pub fn kossakowski(sys: &SystemSpec, bath: &Bath) -> Result<KossakowskiPair> {
    let ka = bath.response(sys.omega_a)?;
    let kb = bath.response(sys.omega_b)?;
    Ok(kossakowski_from(&ka, &kb))
}

fn kossakowski_from(ka: &BathResponse, kb: &BathResponse) -> KossakowskiPair {
    let bar = |x: Complex64, y: Complex64| 0.5 * (x + y);
    let del = |x: Complex64, y: Complex64| 0.5 * (x - y);
    let dn_bar = bar(ka.k_down, kb.k_down);
    let dn_del = del(ka.k_down, kb.k_down);
    let up_bar = bar(ka.k_up, kb.k_up);
    let up_del = del(ka.k_up, kb.k_up);
    let k_bar = bar(ka.k, kb.k);
    let k_del = del(ka.k, kb.k);
    let re = |x: f64| Complex64::new(x, 0.0);
    KossakowskiPair {
        l_down: [
            [re(ka.k_down.re), dn_bar.re + I * dn_del.im],
            [dn_bar.re - I * dn_del.im, re(kb.k_down.re)],
        ],
        l_up: [
            [re(ka.k_up.re), up_bar.re - I * up_del.im],
            [up_bar.re + I * up_del.im, re(kb.k_up.re)],
        ],
        h: [
            [re(ka.k.im), k_bar.im - I * k_del.re],
            [k_bar.im + I * k_del.re, re(kb.k.im)],
        ],
    }
}

/// Moment generator assembled from the Kossakowski form of the BR master
/// equation; agrees with [`br_generator`].
pub fn br_generator_from_kossakowski(sys: &SystemSpec, kp: &KossakowskiPair) -> Generator {
    let p = sys.phis();
    let scale = |m: &C2| -> C2 {
        let mut c = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] = m[i][j] * p[i] * p[j];
            }
        }
        c
    };
    let mut h = scale(&kp.h);
    for i in 0..2 {
        for j in 0..2 {
            h[i][j] = -h[i][j];
        }
    }
    h[0][0] += sys.omega_a;
    h[1][1] += sys.omega_b;
    generator_from_quadratic(&h, &scale(&kp.l_down), &scale(&kp.l_up), GeneratorKind::BR)
}

fn hermitian_eigs(m: &C2) -> [f64; 2] {
    let mean = 0.5 * (m[0][0].re + m[1][1].re);
    let half = 0.5 * (m[0][0].re - m[1][1].re);
    let r = half.hypot(m[0][1].norm());
    [mean - r, mean + r]
}

pub fn lindblad_rates(kp: &KossakowskiPair) -> LindbladRates {
    LindbladRates {
        down: hermitian_eigs(&kp.l_down),
        up: hermitian_eigs(&kp.l_up),
    }
}

/// `K-tilde_i = sum_n phi_i^(n)^2 K^(n)(omega_i)`.
fn k_tilde(sys: &SystemSpec, multi: &MultiBathSpec) -> Result<[Complex64; 2]> {
    let mut kt = [ZERO; 2];
    for t in multi.terms() {
        kt[0] += t.phi[0] * t.phi[0] * t.bath.response(sys.omega_a)?.k;
        kt[1] += t.phi[1] * t.phi[1] * t.bath.response(sys.omega_b)?.k;
    }
    Ok(kt)
}

fn eigen_closed(kt: [Complex64; 2], omega_a: f64, omega_b: f64) -> [Complex64; 4] {
    let (a, b) = (kt[0].conj(), kt[1].conj());
    let w = a - b + I * (omega_a - omega_b);
    let q = 2.0 * a * b + 0.5 * w * w;
    let r = (kt[0] + kt[1]).re;
    let qn = q.norm();
    let s1 = (q.re + qn).max(0.0).sqrt();
    let s2 = (q.re - qn).min(0.0).abs().sqrt();
    let mut out = [
        Complex64::new(r - s1, 0.0),
        Complex64::new(r + s1, 0.0),
        Complex64::new(r, -s2),
        Complex64::new(r, s2),
    ];
    out.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    out
}

/// Closed-form eigenvalues of the BR matrix, sorted by real part.
pub fn closed_form_eigenvalues(sys: &SystemSpec, bath: &Bath) -> Result<[Complex64; 4]> {
    closed_form_eigenvalues_multibath(sys, &MultiBathSpec::single(sys, bath))
}

/// Closed form for several baths, valid when all coupling vectors are
/// parallel (the model then reduces to a single effective bath).
pub fn closed_form_eigenvalues_multibath(sys: &SystemSpec, multi: &MultiBathSpec) -> Result<[Complex64; 4]> {
    if !multi.is_parallel() {
        return Err(Error::Unsupported(
            "closed-form BR eigenvalues need parallel coupling vectors".into(),
        ));
    }
    Ok(eigen_closed(k_tilde(sys, multi)?, sys.omega_a, sys.omega_b))
}

/// Left-hand side of the BR stability inequality; positive means stable.
pub fn stability_margin(sys: &SystemSpec, bath: &Bath) -> Result<f64> {
    let ka = bath.response(sys.omega_a)?.k * sys.phi_a * sys.phi_a;
    let kb = bath.response(sys.omega_b)?.k * sys.phi_b * sys.phi_b;
    let d = sys.delta();
    Ok(2.0 * d * d * ka.re * kb.re + d * (ka.re + kb.re) * (ka.re * kb.im - kb.re * ka.im))
}

/// Markov scale `|dK/dw| |K|` at the mean frequency.
pub fn markov_scale(sys: &SystemSpec, bath: &Bath) -> Result<f64> {
    let om = sys.omega();
    let h = 1e-4 * om.abs().max(1e-2);
    let kp = bath.compute_response(om + h)?.k;
    let km = bath.compute_response(om - h)?.k;
    let k0 = bath.response(om)?.k;
    Ok(((kp - km) / (2.0 * h)).norm() * k0.norm())
}

/// Threshold below which [`markov_scale`] counts as Markovian.
pub const MARKOV_THRESHOLD: f64 = 0.1;

/// True if the Markov scale check fails.
pub fn markov_flag(sys: &SystemSpec, bath: &Bath) -> Result<bool> {
    Ok(markov_scale(sys, bath)? >= MARKOV_THRESHOLD)
}

fn coupling_sums(sys: &SystemSpec) -> (f64, f64) {
    let pa2 = sys.phi_a * sys.phi_a;
    let pb2 = sys.phi_b * sys.phi_b;
    (pa2 * pb2, pa2 + pb2)
}

fn k_bar_delta(sys: &SystemSpec, bath: &Bath) -> Result<(Complex64, Complex64)> {
    let ka = bath.response(sys.omega_a)?.k;
    let kb = bath.response(sys.omega_b)?.k;
    Ok((0.5 * (ka + kb), 0.5 * (ka - kb)))
}

/// Small-detuning expansion of the slow BR eigenvalue.
pub fn br_perturbative_rate(sys: &SystemSpec, bath: &Bath) -> Result<f64> {
    let d = sys.delta();
    if d == 0.0 {
        return Ok(0.0);
    }
    let (kbar, dk) = k_bar_delta(sys, bath)?;
    let (p2, s) = coupling_sums(sys);
    let n2 = kbar.norm_sqr();
    if n2 == 0.0 {
        return Err(Error::domain("perturbative rate undefined for K = 0"));
    }
    let first = 8.0 * p2 * d * d * kbar.re / (s * s * s * n2);
    let second = 8.0 * p2 * d * (kbar.re * dk.im - dk.re * kbar.im) / (s * s * n2);
    Ok(first - second)
}

/// Small-detuning expansion of the slow SpBR eigenvalue.
pub fn spbr_perturbative_rate(sys: &SystemSpec, bath: &Bath) -> Result<f64> {
    let d = sys.delta();
    if d == 0.0 {
        return Ok(0.0);
    }
    let (kbar, _) = k_bar_delta(sys, bath)?;
    let (p2, s) = coupling_sums(sys);
    let n2 = kbar.norm_sqr();
    if n2 == 0.0 {
        return Err(Error::domain("perturbative rate undefined for K = 0"));
    }
    Ok(8.0 * p2 * d * d * kbar.re / (s * s * s * n2))
}

/// Bath-summed BR or SpBR generator.
pub fn multibath_generator(multi: &MultiBathSpec, sys: &SystemSpec, kind: GeneratorKind) -> Result<Generator> {
    let schrodinger = match kind {
        GeneratorKind::BR => false,
        GeneratorKind::SpBR => true,
        other => {
            return Err(Error::Unsupported(format!(
                "multi-bath generator supports br/spbr, not {}",
                other.name()
            )))
        }
    };
    let mut parts = Vec::with_capacity(multi.terms().len());
    for t in multi.terms() {
        let ka = t.bath.response(sys.omega_a)?;
        let kb = t.bath.response(sys.omega_b)?;
        parts.push(br_dissipative(t.phi, &ka, &kb, schrodinger));
    }
    Ok(assemble(sys.omega_a, sys.omega_b, &parts, kind))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvolveMethod {
    Eigen,
    /// Eigenvector matrix too ill-conditioned; adaptive integrator used.
    Integrator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub states: Vec<MomentVector>,
    pub method: EvolveMethod,
}

/// Condition number above which the eigenvector basis is abandoned.
const EIGEN_COND_LIMIT: f64 = 1e10;

/// `(1 - e^{-x}) / x`, continuous at zero.
fn phi1(x: Complex64) -> Complex64 {
    if x.norm() < 0.5 {
        // Series sum_{k>=0} (-x)^k / (k+1)!
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for k in 1..25 {
            term *= -x / (k as f64 + 1.0);
            sum += term;
        }
        sum
    } else {
        (1.0 - (-x).exp()) / x
    }
}

fn eigenvectors(m: &Matrix4<f64>, eigs: &[Complex64; 4]) -> Option<nalgebra::Matrix4<Complex64>> {
    let mc: Matrix4<Complex64> = m.map(|x| Complex64::new(x, 0.0));
    let scale = m.norm().max(1e-300);
    let mut v = Matrix4::<Complex64>::zeros();
    let mut k = 0;
    while k < 4 {
        // Group numerically repeated eigenvalues.
        let mut group = 1;
        while k + group < 4 && (eigs[k + group] - eigs[k]).norm() < 1e-9 * scale {
            group += 1;
        }
        let shifted = mc - Matrix4::<Complex64>::identity() * eigs[k];
        let svd = shifted.svd(false, true);
        let vt = svd.v_t?;
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
        for g in 0..group {
            let row = vt.row(order[g]);
            for r in 0..4 {
                v[(r, k + g)] = row[r].conj();
            }
        }
        k += group;
    }
    Some(v)
}

fn condition(v: &Matrix4<Complex64>) -> f64 {
    let sv = v.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Evolves from `f_init` at `t = 0` and returns the state at each requested
/// time (`>= 0`).
pub fn evolve(g: &Generator, f_init: &MomentVector, times: &[f64]) -> Result<Evolution> {
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::domain("evolution times must be finite and >= 0"));
    }
    let m = g.matrix();
    let raw = m.complex_eigenvalues();
    let mut eigs = [raw[0], raw[1], raw[2], raw[3]];
    eigs.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    if let Some(v) = eigenvectors(&m, &eigs) {
        if condition(&v) <= EIGEN_COND_LIMIT {
            let mc = m.map(|x| Complex64::new(x, 0.0));
            let lam = Matrix4::from_diagonal(&nalgebra::Vector4::from_fn(|i, _| eigs[i]));
            let resid = (mc * v - v * lam).norm();
            let accurate = resid <= 1e-10 * m.norm().max(1.0);
            if let (true, Some(vinv)) = (accurate, v.try_inverse()) {
                let to_c = |x: &[f64; 4]| nalgebra::Vector4::from_fn(|i, _| Complex64::new(x[i], 0.0));
                let c = vinv * to_c(&f_init.0);
                let d = vinv * to_c(&g.f0);
                let states = times
                    .iter()
                    .map(|&t| {
                        let y = nalgebra::Vector4::from_fn(|i, _| {
                            let x = eigs[i] * t;
                            (-x).exp() * c[i] + t * phi1(x) * d[i]
                        });
                        let f = v * y;
                        MomentVector([f[0].re, f[1].re, f[2].re, f[3].re])
                    })
                    .collect();
                return Ok(Evolution {
                    states,
                    method: EvolveMethod::Eigen,
                });
            }
        }
    }
    evolve_integrator(g, f_init, times, OdeOptions::default()).map(|states| Evolution {
        states,
        method: EvolveMethod::Integrator,
    })
}

/// Direct adaptive integration of the moment equation.
pub fn evolve_integrator(g: &Generator, f_init: &MomentVector, times: &[f64], opts: OdeOptions) -> Result<Vec<MomentVector>> {
    let mut sorted: Vec<(usize, f64)> = times.iter().copied().enumerate().collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
    let ts: Vec<f64> = sorted.iter().map(|p| p.1).collect();
    let ys = ode::dopri5(
        |_, y, dy| {
            for i in 0..4 {
                let mut acc = g.f0[i];
                for j in 0..4 {
                    acc -= g.m[i][j] * y[j];
                }
                dy[i] = acc;
            }
        },
        0.0,
        &f_init.0,
        &ts,
        opts,
    )?;
    let mut out = vec![MomentVector::default(); times.len()];
    for ((idx, _), y) in sorted.iter().zip(ys) {
        out[*idx] = MomentVector([y[0], y[1], y[2], y[3]]);
    }
    Ok(out)
}

/// Condition number above which `M` counts as singular.
pub const STEADY_COND_LIMIT: f64 = 1e12;

/// Fixed point `M^{-1} f0`.
pub fn steady_state(g: &Generator) -> Result<MomentVector> {
    let m = g.matrix();
    let sv = m.singular_values();
    let cond = if sv.min() == 0.0 { f64::INFINITY } else { sv.max() / sv.min() };
    if !(cond <= STEADY_COND_LIMIT) {
        return Err(Error::NoSteadyState(format!(
            "{} generator is singular (condition number {cond:.3e})",
            g.kind.name()
        )));
    }
    let x = m
        .lu()
        .solve(&g.source())
        .ok_or(Error::Singular { condition: cond })?;
    Ok(MomentVector([x[0], x[1], x[2], x[3]]))
}

/// Hermitian 2x2 helper exposed for tests and diagnostics.
pub fn hermitian_matrix(m: &C2) -> Matrix2<Complex64> {
    Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::BathSpec;
    use proptest::prelude::*;

    fn reference_bath() -> Bath {
        Bath::new(BathSpec::super_ohmic(0.001, 0.9, 3.0, 0.52)).unwrap()
    }

    fn sym(oa: f64, ob: f64) -> SystemSpec {
        SystemSpec::symmetric(oa, ob).unwrap()
    }

    fn max_diff(a: &Generator, b: &Generator) -> f64 {
        let mut d = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                d = d.max((a.m[i][j] - b.m[i][j]).abs());
            }
            d = d.max((a.f0[i] - b.f0[i]).abs());
        }
        d
    }

    #[test]
    fn br_matches_kossakowski_derivation() {
        let bath = reference_bath();
        for sys in [sym(1.0, 0.9), SystemSpec::new(1.0, 0.93, 0.4, 0.8).unwrap()] {
            let g = br_generator(&sys, &bath).unwrap();
            let k = br_generator_from_kossakowski(&sys, &kossakowski(&sys, &bath).unwrap());
            assert!(max_diff(&g, &k) < 1e-15, "{:?}\n{:?}", g.m, k.m);
        }
    }

    #[test]
    fn br_named_entries() {
        let bath = reference_bath();
        let sys = SystemSpec::new(1.0, 0.9, 0.6, 0.8).unwrap();
        let g = br_generator(&sys, &bath).unwrap();
        let ka = bath.response(1.0).unwrap().k;
        let kb = bath.response(0.9).unwrap().k;
        let e0 = (0.9 - 0.64 * kb.im) - (1.0 - 0.36 * ka.im);
        assert!((g.e0() - e0).abs() < 1e-15);
        assert!((g.gamma0() - (0.36 * ka.re + 0.64 * kb.re)).abs() < 1e-16);
        let s = spbr_generator(&sys, &bath).unwrap();
        let e0s = (0.9 - 0.64 * ka.im) - (1.0 - 0.36 * kb.im);
        assert!((s.e0() - e0s).abs() < 1e-15);
        assert!((s.gamma0() - (0.36 * kb.re + 0.64 * ka.re)).abs() < 1e-16);
        assert_eq!(g.f0, s.f0);
        // Only the coherence columns (and their E0/Gamma0) differ.
        for i in 0..4 {
            for j in 0..2 {
                assert_eq!(g.m[i][j], s.m[i][j]);
            }
        }
    }

    #[test]
    fn decoupled_modes_have_no_cross_terms() {
        let bath = reference_bath();
        let sys = SystemSpec::new(1.0, 0.9, 0.7, 0.0).unwrap();
        let g = br_generator(&sys, &bath).unwrap();
        for (i, j) in [(0, 2), (0, 3), (1, 2), (1, 3), (2, 0), (2, 1), (3, 0), (3, 1)] {
            assert_eq!(g.m[i][j], 0.0);
        }
    }

    #[test]
    fn flat_bath_degenerate_left_null_vector() {
        let bath = Bath::new(BathSpec::flat(0.01, 0.0, 2.0, 0.2)).unwrap();
        let sys = SystemSpec::new(1.0, 1.0, 0.6, 0.8).unwrap();
        let g = br_generator(&sys, &bath).unwrap();
        // |phi_b psi_a - phi_a psi_b|^2 in f coordinates is conserved ...
        let u = [0.64, 0.36, -0.48, 0.0];
        for j in 0..4 {
            let s: f64 = (0..4).map(|i| u[i] * g.m[i][j]).sum();
            assert!(s.abs() < 1e-16, "col {j}: {s}");
        }
        // ... and the matching F-matrix direction is a right null vector.
        let v = [0.64, 0.36, -2.0 * 0.48, 0.0];
        for i in 0..4 {
            let s: f64 = (0..4).map(|j| g.m[i][j] * v[j]).sum();
            assert!(s.abs() < 1e-16, "row {i}: {s}");
        }
    }

    #[test]
    fn spbr_equals_br_at_degeneracy() {
        let bath = reference_bath();
        let sys = sym(0.95, 0.95);
        assert_eq!(br_generator(&sys, &bath).unwrap().m, spbr_generator(&sys, &bath).unwrap().m);
    }

    #[test]
    fn secular_properties() {
        let bath = reference_bath();
        let sys = sym(1.0, 0.9);
        let g = secularize(&br_generator(&sys, &bath).unwrap()).unwrap();
        assert_eq!(secularize(&g).unwrap(), g);
        let ss = steady_state(&g).unwrap();
        assert!((ss.0[0] - bath.occupation(1.0).unwrap()).abs() < 1e-12);
        assert!((ss.0[1] - bath.occupation(0.9).unwrap()).abs() < 1e-12);
        assert_eq!(ss.0[2], 0.0);
        assert_eq!(ss.0[3], 0.0);
        let c = collective_generator(&sys, &bath).unwrap();
        assert!(secularize(&c).is_err());
    }

    #[test]
    fn individual_is_secular_br_without_lamb_shift() {
        let bath = reference_bath();
        let sys = SystemSpec::new(1.0, 0.9, 0.6, 0.8).unwrap();
        let mut sec = secularize(&br_generator(&sys, &bath).unwrap()).unwrap();
        sec.m[2][3] = -(0.9 - 1.0);
        sec.m[3][2] = 0.9 - 1.0;
        let ind = individual_generator(&sys, &bath).unwrap();
        assert!(max_diff(&sec, &ind) < 1e-16);
    }

    #[test]
    fn collective_zero_mode_and_equal_populations() {
        let bath = reference_bath();
        let g = collective_generator(&sym(0.95, 0.95), &bath).unwrap();
        let ev = g.eigenvalues();
        assert!(ev.iter().any(|e| e.norm() < 1e-15));
        let g = collective_generator(&sym(1.0, 0.9), &bath).unwrap();
        let ss = steady_state(&g).unwrap();
        assert!((ss.0[0] - ss.0[1]).abs() < 1e-12);
        assert!((ss.0[0] - bath.occupation(1.0).unwrap()).abs() > 1e-3);
    }

    #[test]
    fn lindblad_rates_closed_form() {
        let bath = reference_bath();
        let kp = kossakowski(&sym(1.0, 0.9), &bath).unwrap();
        let rates = lindblad_rates(&kp);
        let ka = bath.response(1.0).unwrap();
        let kb = bath.response(0.9).unwrap();
        for (pair, (xa, xb)) in [(rates.down, (ka.k_down, kb.k_down)), (rates.up, (ka.k_up, kb.k_up))] {
            let bar = 0.5 * (xa + xb);
            let del = 0.5 * (xa - xb);
            let s = (bar.re * bar.re + del.norm_sqr()).sqrt();
            assert!((pair[0] - (bar.re - s)).abs() < 1e-12);
            assert!((pair[1] - (bar.re + s)).abs() < 1e-12);
            assert!(pair[0] < 0.0);
        }
        let num = hermitian_matrix(&kp.l_down).symmetric_eigenvalues();
        let mut n = [num[0], num[1]];
        n.sort_by(f64::total_cmp);
        assert!((n[0] - rates.down[0]).abs() < 1e-12 && (n[1] - rates.down[1]).abs() < 1e-12);
        let deg = lindblad_rates(&kossakowski(&sym(0.95, 0.95), &bath).unwrap());
        assert!(deg.down[0].abs() < 1e-12 && deg.up[0].abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_numeric_eigenvalues() {
        let bath = reference_bath();
        for sys in [sym(1.0, 0.9), SystemSpec::new(1.0, 0.97, 0.3, 0.9).unwrap(), sym(0.95, 0.95)] {
            let cf = closed_form_eigenvalues(&sys, &bath).unwrap();
            let num = br_generator(&sys, &bath).unwrap().eigenvalues();
            for (a, b) in cf.iter().zip(num.iter()) {
                assert!((a - b).norm() < 1e-10, "{cf:?} vs {num:?}");
            }
        }
        let z = closed_form_eigenvalues(&sym(0.95, 0.95), &bath).unwrap();
        assert!(z.iter().any(|e| e.norm() < 1e-12));
    }

    #[test]
    fn decoupled_closed_form_is_rotation() {
        let bath = reference_bath();
        let sys = SystemSpec::new(1.0, 0.9, 0.0, 0.0).unwrap();
        let cf = closed_form_eigenvalues(&sys, &bath).unwrap();
        let mut zeros = 0;
        let mut rot = 0;
        for e in cf {
            if e.norm() < 1e-15 {
                zeros += 1;
            } else if e.re.abs() < 1e-15 && (e.im.abs() - 0.1).abs() < 1e-12 {
                rot += 1;
            }
        }
        assert_eq!((zeros, rot), (2, 2), "{cf:?}");
    }

    #[test]
    fn perturbative_rates() {
        let bath = reference_bath();
        let sys = sym(0.95, 0.95);
        assert_eq!(br_perturbative_rate(&sys, &bath).unwrap(), 0.0);
        assert_eq!(spbr_perturbative_rate(&sys, &bath).unwrap(), 0.0);
        let wide = Bath::new(BathSpec::flat(0.01, f64::NEG_INFINITY, f64::INFINITY, 0.2)).unwrap();
        let sys = sym(1.01, 0.99);
        let a = br_perturbative_rate(&sys, &wide).unwrap();
        let b = spbr_perturbative_rate(&sys, &wide).unwrap();
        assert!(b > 0.0);
        assert_eq!(a, b);
    }

    #[test]
    fn stability_margin_zero_at_degeneracy() {
        assert_eq!(stability_margin(&sym(0.95, 0.95), &reference_bath()).unwrap(), 0.0);
        assert!(stability_margin(&sym(1.0, 0.9), &reference_bath()).unwrap() > 0.0);
    }

    #[test]
    fn multibath_reductions() {
        let bath = reference_bath();
        let sys = SystemSpec::new(1.0, 0.9, 0.6, 0.8).unwrap();
        let one = MultiBathSpec::single(&sys, &bath);
        let g1 = multibath_generator(&one, &sys, GeneratorKind::BR).unwrap();
        assert!(max_diff(&g1, &br_generator(&sys, &bath).unwrap()) < 1e-18);
        let half = Bath::new(BathSpec::super_ohmic(0.0005, 0.9, 3.0, 0.52)).unwrap();
        let two = MultiBathSpec::new(vec![
            crate::model::BathCoupling { bath: half.clone(), phi: sys.phis() },
            crate::model::BathCoupling { bath: half, phi: sys.phis() },
        ])
        .unwrap();
        for kind in [GeneratorKind::BR, GeneratorKind::SpBR] {
            let g2 = multibath_generator(&two, &sys, kind).unwrap();
            let g = if kind == GeneratorKind::BR {
                br_generator(&sys, &bath).unwrap()
            } else {
                spbr_generator(&sys, &bath).unwrap()
            };
            assert!(max_diff(&g2, &g) < 1e-15);
        }
        let cf = closed_form_eigenvalues_multibath(&sys, &two).unwrap();
        let num = multibath_generator(&two, &sys, GeneratorKind::BR).unwrap().eigenvalues();
        for (a, b) in cf.iter().zip(num.iter()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn evolve_trivial_and_fixed_point() {
        let zero = Generator { m: [[0.0; 4]; 4], f0: [0.0; 4], kind: GeneratorKind::BR };
        let f = MomentVector([0.1, 0.2, 0.3, 0.4]);
        let e = evolve(&zero, &f, &[0.0, 1.0, 100.0]).unwrap();
        assert!(e.states.iter().all(|s| *s == f));
        let g = br_generator(&sym(1.0, 0.9), &reference_bath()).unwrap();
        let ss = steady_state(&g).unwrap();
        let e = evolve(&g, &ss, &[0.0, 10.0, 1000.0]).unwrap();
        for s in &e.states {
            for k in 0..4 {
                assert!((s.0[k] - ss.0[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn defective_matrix_still_evolves() {
        // Jordan block: M = [[1,1],[0,1]] embedded; f' = -M f.
        let mut m = [[0.0; 4]; 4];
        m[0][0] = 1.0;
        m[0][1] = 1.0;
        m[1][1] = 1.0;
        let g = Generator { m, f0: [0.0; 4], kind: GeneratorKind::BR };
        let e = evolve(&g, &MomentVector([0.0, 1.0, 0.0, 0.0]), &[2.0]).unwrap();
        let t: f64 = 2.0;
        assert!((e.states[0].0[0] - (-t * (-t).exp())).abs() < 1e-8);
        assert!((e.states[0].0[1] - (-t).exp()).abs() < 1e-8);
    }

    #[test]
    fn singular_generator_has_no_steady_state() {
        let g = br_generator(&sym(0.95, 0.95), &reference_bath()).unwrap();
        assert!(matches!(steady_state(&g), Err(Error::NoSteadyState(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn eigen_evolution_matches_integrator(
            seed in proptest::collection::vec(-1.0..1.0f64, 20),
            t in 0.1..5.0f64,
        ) {
            // Stable random generator: M = A A^T + 0.1 + skew part.
            let mut a = [[0.0; 4]; 4];
            for i in 0..4 { for j in 0..4 { a[i][j] = seed[4 * i + j]; } }
            let mut m = [[0.0; 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    let sym: f64 = (0..4).map(|k| a[i][k] * a[j][k]).sum();
                    m[i][j] = 0.5 * sym + 0.7 * (a[i][j] - a[j][i]);
                }
                m[i][i] += 0.1;
            }
            let g = Generator { m, f0: [seed[16], seed[17], seed[18], seed[19]], kind: GeneratorKind::BR };
            let f = MomentVector([0.3, -0.2, 0.1, 0.05]);
            let e = evolve(&g, &f, &[t]).unwrap();
            let r = evolve_integrator(&g, &f, &[t], OdeOptions { rtol: 1e-12, atol: 1e-14, ..Default::default() }).unwrap();
            for k in 0..4 {
                prop_assert!((e.states[0].0[k] - r[0].0[k]).abs() < 1e-8);
            }
        }
    }
}
