// Copyright 2026 The coherence-lab Contributors
// SPDX-License-Identifier: Apache-2.0

//! Positivity and sum-rule diagnostics, plus two brute-force oracles: a
//! finite-mode unitary model of the bath and a truncated Fock-space
//! propagation of the BR master equation.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::bath::Bath;
use crate::error::{Error, Result};
use crate::meq::{kossakowski, Generator};
use crate::model::{MultiBathSpec, SystemSpec};
use crate::moments::{MomentVector, SecondMoments};
use crate::ode::{dopri5, OdeOptions};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Smallest eigenvalue `lambda_m` of `F`; negative means the moments are
/// not those of a physical state.
pub fn min_eigen_f(m: &SecondMoments) -> f64 {
    m.min_eigenvalue()
}

/// `M v - (w_a - w_b)(0, 0, 0, 2 phi_a phi_b)` with
/// `v = (phi_b^2, phi_a^2, -2 phi_a phi_b, 0)`.
pub fn sum_rule_residual(g: &Generator, sys: &SystemSpec) -> [f64; 4] {
    let (pa, pb) = (sys.phi_a, sys.phi_b);
    let v = [pb * pb, pa * pa, -2.0 * pa * pb, 0.0];
    let mut r = [0.0; 4];
    for (i, ri) in r.iter_mut().enumerate() {
        *ri = (0..4).map(|k| g.m[i][k] * v[k]).sum();
    }
    r[3] -= (sys.omega_a - sys.omega_b) * 2.0 * pa * pb;
    r
}

/// Rank-one moment matrix with `F_ab = sqrt(n_a n_b) e^{i theta}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimumUncertaintyState {
    pub n_a: f64,
    pub n_b: f64,
    pub theta: f64,
}

impl MinimumUncertaintyState {
    pub fn new(n_a: f64, n_b: f64, theta: f64) -> Result<Self> {
        if !(n_a >= 0.0 && n_b >= 0.0 && n_a.is_finite() && n_b.is_finite() && theta.is_finite()) {
            return Err(Error::domain("occupations must be finite and >= 0"));
        }
        Ok(MinimumUncertaintyState {
            n_a,
            n_b,
            theta: theta.rem_euclid(2.0 * PI),
        })
    }

    pub fn moments(&self) -> SecondMoments {
        let c = (self.n_a * self.n_b).sqrt();
        SecondMoments::new(self.n_a, self.n_b, Complex64::from_polar(c, self.theta))
    }
}

/// Rate at which the BR generator moves `lambda_m` of a boundary state,
/// up to the positive factor `2 / (n_a + n_b)`:
/// `phi_a^2 K'_a^up n_b + phi_b^2 K'_b^up n_a
///  - 2 phi_a phi_b sqrt(n_a n_b) [Kbar'_up cos(theta) - dK''_up sin(theta)]`.
pub fn gaussian_positivity_violation(sys: &SystemSpec, bath: &Bath, s: &MinimumUncertaintyState) -> Result<f64> {
    let ka = bath.response(sys.omega_a)?.k_up;
    let kb = bath.response(sys.omega_b)?.k_up;
    let bar = 0.5 * (ka + kb);
    let del = 0.5 * (ka - kb);
    let (pa, pb) = (sys.phi_a, sys.phi_b);
    Ok(pa * pa * ka.re * s.n_b + pb * pb * kb.re * s.n_a
        - 2.0 * pa * pb * (s.n_a * s.n_b).sqrt() * (bar.re * s.theta.cos() - del.im * s.theta.sin()))
}

/// Settings of the two oracles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Bath modes per bath. `None` picks the smallest grid (at least 256
    /// modes) whose recurrence time is four times the last requested time.
    pub modes: Option<usize>,
    /// Upper end of the frequency grid; `None` uses the bath support.
    pub nu_max: Option<f64>,
    /// Highest Fock number kept per mode.
    pub n_max: usize,
    /// Boundary population that aborts the Fock oracle.
    pub boundary_limit: f64,
    pub ode: OdeOptions,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            modes: None,
            nu_max: None,
            n_max: 6,
            boundary_limit: 1e-8,
            ode: OdeOptions::default(),
        }
    }
}

/// Uniform midpoint grid used for one bath.
#[derive(Debug, Clone, PartialEq)]
pub struct BathGrid {
    pub lo: f64,
    pub hi: f64,
    pub modes: usize,
}

impl BathGrid {
    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / self.modes as f64
    }

    /// `2 pi / d nu`; the grid model is valid for `t <= recurrence / 2`.
    pub fn recurrence_time(&self) -> f64 {
        2.0 * PI / self.spacing()
    }
}

/// Chooses the grid for `bath` given the latest time to be sampled.
pub fn bath_grid(bath: &Bath, cfg: &OracleConfig, t_max: f64) -> Result<BathGrid> {
    if bath.is_white_noise() {
        return Err(Error::Unsupported(
            "an unbounded flat band cannot be discretized".into(),
        ));
    }
    let (a, b) = bath.support();
    let lo = a.min(0.0);
    let hi = cfg.nu_max.unwrap_or(b);
    if !(hi > lo) {
        return Err(Error::domain(format!("oracle cutoff {hi} is below the grid start {lo}")));
    }
    let modes = match cfg.modes {
        Some(n) => n,
        None => {
            let need = ((hi - lo) * 4.0 * t_max / (2.0 * PI)).ceil() as usize;
            need.max(256)
        }
    };
    if modes < 2 {
        return Err(Error::domain("oracle needs at least 2 bath modes"));
    }
    let g = BathGrid { lo, hi, modes };
    if 2.0 * t_max > g.recurrence_time() {
        return Err(Error::domain(format!(
            "t = {t_max} is beyond half the recurrence time {:.4} of a {modes}-mode grid",
            g.recurrence_time()
        )));
    }
    Ok(g)
}

/// Diagonalized one-particle Hamiltonian of system plus discretized baths.
struct DiscreteModel {
    energies: Vec<f64>,
    vectors: DMatrix<f64>,
    occupations: Vec<f64>,
    /// Coupling vector of each bath.
    phis: Vec<[f64; 2]>,
}

impl DiscreteModel {
    fn new(multi: &MultiBathSpec, sys: &SystemSpec, cfg: &OracleConfig, t_max: f64) -> Result<Self> {
        let mut freqs = Vec::new();
        let mut couplings = Vec::new();
        let mut occupations = Vec::new();
        for t in multi.terms() {
            if t.bath.is_zero() {
                continue;
            }
            let g = bath_grid(&t.bath, cfg, t_max)?;
            let dnu = g.spacing();
            for k in 0..g.modes {
                let nu = g.lo + (k as f64 + 0.5) * dnu;
                let gk = (t.bath.j_value(nu) * dnu).sqrt();
                let n = if gk > 0.0 { t.bath.occupation(nu)? } else { 0.0 };
                freqs.push(nu);
                couplings.push([t.phi[0] * gk, t.phi[1] * gk]);
                occupations.push(n);
            }
        }
        let dim = 2 + freqs.len();
        let mut h = DMatrix::<f64>::zeros(dim, dim);
        // Frame rotating at Omega keeps the phases small.
        let omega = sys.omega();
        h[(0, 0)] = sys.omega_a - omega;
        h[(1, 1)] = sys.omega_b - omega;
        for (k, (nu, c)) in freqs.iter().zip(&couplings).enumerate() {
            h[(2 + k, 2 + k)] = nu - omega;
            for i in 0..2 {
                h[(i, 2 + k)] = c[i];
                h[(2 + k, i)] = c[i];
            }
        }
        let eig = SymmetricEigen::new(h);
        Ok(DiscreteModel {
            energies: eig.eigenvalues.iter().copied().collect(),
            vectors: eig.eigenvectors,
            occupations,
            phis: multi.terms().iter().map(|t| t.phi).collect(),
        })
    }

    /// Rows 0, 1 of `U(t) = V e^{-iEt} V^T` (rotating frame).
    fn system_rows(&self, t: f64) -> [Vec<Complex64>; 2] {
        let dim = self.energies.len();
        let phases: Vec<Complex64> = self.energies.iter().map(|e| Complex64::new(0.0, -e * t).exp()).collect();
        let mut rows = [vec![ZERO; dim], vec![ZERO; dim]];
        for (i, row) in rows.iter_mut().enumerate() {
            let w: Vec<Complex64> = (0..dim).map(|m| self.vectors[(i, m)] * phases[m]).collect();
            for (k, out) in row.iter_mut().enumerate() {
                let mut s = ZERO;
                for (m, wm) in w.iter().enumerate() {
                    s += wm * self.vectors[(k, m)];
                }
                *out = s;
            }
        }
        rows
    }

    fn moments(&self, t: f64) -> SecondMoments {
        let u = self.system_rows(t);
        let mut f = [[ZERO; 2]; 2];
        for (k, n) in self.occupations.iter().enumerate() {
            if *n == 0.0 {
                continue;
            }
            for i in 0..2 {
                for j in 0..2 {
                    f[i][j] += u[i][2 + k].conj() * u[j][2 + k] * n;
                }
            }
        }
        SecondMoments::from_matrix(f)
    }
}

fn last_time(times: &[f64]) -> Result<f64> {
    let mut t_max = 0.0f64;
    for &t in times {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::domain(format!("oracle time {t} must be finite and >= 0")));
        }
        t_max = t_max.max(t);
    }
    Ok(t_max)
}

/// Moments of a finite-mode model of the bath, evolved exactly from the
/// system vacuum and thermally occupied bath modes.
pub fn discretized_bath_oracle(sys: &SystemSpec, bath: &Bath, cfg: &OracleConfig, times: &[f64]) -> Result<Vec<SecondMoments>> {
    discretized_bath_oracle_multibath(&MultiBathSpec::single(sys, bath), sys, cfg, times)
}

pub fn discretized_bath_oracle_multibath(
    multi: &MultiBathSpec,
    sys: &SystemSpec,
    cfg: &OracleConfig,
    times: &[f64],
) -> Result<Vec<SecondMoments>> {
    let t_max = last_time(times)?;
    let model = DiscreteModel::new(multi, sys, cfg, t_max)?;
    Ok(times.par_iter().map(|&t| model.moments(t)).collect())
}

/// `D_i(t) = -i [U(t) phi]_i` of the finite-mode model (lab frame).
pub fn discretized_propagator(sys: &SystemSpec, bath: &Bath, cfg: &OracleConfig, times: &[f64]) -> Result<Vec<[Complex64; 2]>> {
    let multi = MultiBathSpec::single(sys, bath);
    let t_max = last_time(times)?;
    let model = DiscreteModel::new(&multi, sys, cfg, t_max)?;
    let phi = model.phis[0];
    let omega = sys.omega();
    Ok(times
        .par_iter()
        .map(|&t| {
            let u = model.system_rows(t);
            let carrier = Complex64::new(0.0, -omega * t).exp();
            let d = |i: usize| -I * carrier * (u[i][0] * phi[0] + u[i][1] * phi[1]);
            [d(0), d(1)]
        })
        .collect())
}

/// Truncated two-mode Fock space with the quadratic BR master equation.
struct FockModel {
    nmax: usize,
    dim: usize,
    /// Non-Hermitian part `K = -iH - sum C_down a^dag a - sum C_up a a^dag`.
    keff: DMatrix<Complex64>,
    c_down: [[Complex64; 2]; 2],
    c_up: [[Complex64; 2]; 2],
}

impl FockModel {
    fn new(sys: &SystemSpec, bath: &Bath, nmax: usize) -> Result<Self> {
        let kp = kossakowski(sys, bath)?;
        let p = sys.phis();
        let mut h = [[ZERO; 2]; 2];
        let mut c_down = [[ZERO; 2]; 2];
        let mut c_up = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                h[i][j] = -kp.h[i][j] * p[i] * p[j];
                c_down[i][j] = kp.l_down[i][j] * p[i] * p[j];
                c_up[i][j] = kp.l_up[i][j] * p[i] * p[j];
            }
        }
        let omega = sys.omega();
        h[0][0] += sys.omega_a - omega;
        h[1][1] += sys.omega_b - omega;
        let side = nmax + 1;
        let dim = side * side;
        let ops = [lowering(nmax, 0), lowering(nmax, 1)];
        let adj = [ops[0].adjoint(), ops[1].adjoint()];
        let mut keff = DMatrix::<Complex64>::zeros(dim, dim);
        for m in 0..2 {
            for n in 0..2 {
                let amn = &adj[m] * &ops[n];
                keff -= amn.map(|x| x * (I * h[m][n] + c_down[m][n]));
                // Gain term uses C_up[n][m] on a_n a_m^dag.
                let nm = &ops[n] * &adj[m];
                keff -= nm.map(|x| x * c_up[n][m]);
            }
        }
        Ok(FockModel {
            nmax,
            dim,
            keff,
            c_down,
            c_up,
        })
    }

    fn index(&self, na: usize, nb: usize) -> usize {
        na * (self.nmax + 1) + nb
    }

    /// `d rho / dt` with `rho` stored row-major.
    fn rhs(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let kr = &self.keff * rho;
        let mut out = &kr + kr.adjoint();
        let side = self.nmax + 1;
        let lower = |state: usize, mode: usize| -> Option<(usize, f64)> {
            let (na, nb) = (state / side, state % side);
            let n = if mode == 0 { na } else { nb };
            if n == 0 {
                return None;
            }
            let target = if mode == 0 { self.index(na - 1, nb) } else { self.index(na, nb - 1) };
            Some((target, (n as f64).sqrt()))
        };
        let raise = |state: usize, mode: usize| -> Option<(usize, f64)> {
            let (na, nb) = (state / side, state % side);
            let n = if mode == 0 { na } else { nb };
            if n == self.nmax {
                return None;
            }
            let target = if mode == 0 { self.index(na + 1, nb) } else { self.index(na, nb + 1) };
            Some((target, ((n + 1) as f64).sqrt()))
        };
        // 2 C_down[m][n] a_n rho a_m^dag and 2 C_up[n][m] a_m^dag rho a_n.
        for r in 0..self.dim {
            for c in 0..self.dim {
                let v = rho[(r, c)];
                if v == ZERO {
                    continue;
                }
                for n in 0..2 {
                    for m in 0..2 {
                        if let (Some((r2, x)), Some((c2, y))) = (lower(r, n), lower(c, m)) {
                            out[(r2, c2)] += 2.0 * self.c_down[m][n] * x * y * v;
                        }
                        if let (Some((r2, x)), Some((c2, y))) = (raise(r, m), raise(c, n)) {
                            out[(r2, c2)] += 2.0 * self.c_up[n][m] * x * y * v;
                        }
                    }
                }
            }
        }
        out
    }

    fn moments(&self, rho: &DMatrix<Complex64>) -> SecondMoments {
        // F_ij = Tr(rho a_i^dag a_j).
        let side = self.nmax + 1;
        let mut f = [[ZERO; 2]; 2];
        for na in 0..side {
            for nb in 0..side {
                let s = self.index(na, nb);
                f[0][0] += rho[(s, s)] * na as f64;
                f[1][1] += rho[(s, s)] * nb as f64;
                // <s| a_a^dag a_b |s'> with s' = (na - 1, nb + 1).
                if na > 0 && nb < self.nmax {
                    let s2 = self.index(na - 1, nb + 1);
                    let amp = ((na * (nb + 1)) as f64).sqrt();
                    f[0][1] += rho[(s2, s)] * amp;
                    f[1][0] += rho[(s, s2)] * amp;
                }
            }
        }
        SecondMoments::from_matrix(f)
    }

    fn boundary_population(&self, rho: &DMatrix<Complex64>) -> f64 {
        let side = self.nmax + 1;
        (0..self.dim)
            .filter(|s| s / side == self.nmax || s % side == self.nmax)
            .map(|s| rho[(s, s)].re)
            .sum()
    }

    fn pack(&self, rho: &DMatrix<Complex64>) -> Vec<f64> {
        let mut y = Vec::with_capacity(2 * self.dim * self.dim);
        for r in 0..self.dim {
            for c in 0..self.dim {
                y.push(rho[(r, c)].re);
                y.push(rho[(r, c)].im);
            }
        }
        y
    }

    fn unpack(&self, y: &[f64]) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.dim, self.dim, |r, c| {
            let k = 2 * (r * self.dim + c);
            Complex64::new(y[k], y[k + 1])
        })
    }
}

fn lowering(nmax: usize, mode: usize) -> DMatrix<Complex64> {
    let side = nmax + 1;
    let dim = side * side;
    let mut a = DMatrix::<Complex64>::zeros(dim, dim);
    for na in 0..side {
        for nb in 0..side {
            let s = na * side + nb;
            let (n, t) = if mode == 0 {
                (na, na.checked_sub(1).map(|x| x * side + nb))
            } else {
                (nb, nb.checked_sub(1).map(|x| na * side + x))
            };
            if let Some(t) = t {
                a[(t, s)] = Complex64::new((n as f64).sqrt(), 0.0);
            }
        }
    }
    a
}

fn check_fock_cfg(cfg: &OracleConfig) -> Result<()> {
    if cfg.n_max < 1 {
        return Err(Error::domain("Fock oracle needs n_max >= 1"));
    }
    Ok(())
}

/// Moments from the BR master equation propagated on the truncated Fock
/// space, starting from the vacuum.
pub fn fock_oracle(sys: &SystemSpec, bath: &Bath, cfg: &OracleConfig, times: &[f64]) -> Result<Vec<SecondMoments>> {
    check_fock_cfg(cfg)?;
    last_time(times)?;
    let model = FockModel::new(sys, bath, cfg.n_max)?;
    let mut rho = DMatrix::<Complex64>::zeros(model.dim, model.dim);
    rho[(0, 0)] = Complex64::new(1.0, 0.0);
    let y0 = model.pack(&rho);
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let sorted: Vec<f64> = order.iter().map(|&k| times[k]).collect();
    let states = dopri5(
        |_, y, dy| {
            let d = model.rhs(&model.unpack(y));
            dy.copy_from_slice(&model.pack(&d));
        },
        0.0,
        &y0,
        &sorted,
        cfg.ode,
    )?;
    let mut out = vec![SecondMoments::default(); times.len()];
    for (k, y) in order.iter().zip(states) {
        let rho = model.unpack(&y);
        let edge = model.boundary_population(&rho);
        if edge > cfg.boundary_limit {
            return Err(Error::Truncation {
                population: edge,
                limit: cfg.boundary_limit,
            });
        }
        out[*k] = model.moments(&rho);
    }
    Ok(out)
}

/// Moments of a pure Fock superposition `sum c |n_a, n_b>` and their time
/// derivative under the truncated BR master equation.
pub fn fock_moment_derivative(
    sys: &SystemSpec,
    bath: &Bath,
    cfg: &OracleConfig,
    state: &[(usize, usize, Complex64)],
) -> Result<(MomentVector, MomentVector)> {
    check_fock_cfg(cfg)?;
    let model = FockModel::new(sys, bath, cfg.n_max)?;
    let mut psi = vec![ZERO; model.dim];
    for &(na, nb, c) in state {
        if na >= cfg.n_max || nb >= cfg.n_max {
            return Err(Error::domain("state must stay below the truncation boundary"));
        }
        psi[model.index(na, nb)] += c;
    }
    let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::domain("empty Fock state"));
    }
    let rho = DMatrix::from_fn(model.dim, model.dim, |r, c| psi[r] * psi[c].conj() / (norm * norm));
    // Moments are invariant under the rotating frame, so no correction.
    let f = model.moments(&rho).to_vector();
    let df = model.moments(&model.rhs(&rho)).to_vector();
    Ok((f, df))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::BathSpec;
    use crate::meq::{br_generator, spbr_generator};

    fn reference_bath() -> Bath {
        Bath::new(BathSpec::super_ohmic(0.001, 0.9, 3.0, 0.52)).unwrap()
    }

    #[test]
    fn vacuum_and_rank_one() {
        assert_eq!(min_eigen_f(&SecondMoments::default()), 0.0);
        let s = MinimumUncertaintyState::new(0.3, 0.7, 1.1).unwrap();
        assert!(min_eigen_f(&s.moments()).abs() < 1e-16);
        assert!(MinimumUncertaintyState::new(-0.1, 0.2, 0.0).is_err());
    }

    #[test]
    fn sum_rule_orientation() {
        let sys = SystemSpec::symmetric(1.0, 0.9).unwrap();
        let bath = reference_bath();
        let sp = sum_rule_residual(&spbr_generator(&sys, &bath).unwrap(), &sys);
        assert!(sp.iter().all(|x| x.abs() < 1e-15), "{sp:?}");
        let br = sum_rule_residual(&br_generator(&sys, &bath).unwrap(), &sys);
        assert!(br.iter().any(|x| x.abs() > 1e-6), "{br:?}");
    }

    #[test]
    fn positivity_formula_matches_generator_step() {
        // d lambda_m / dt on the boundary equals <u| dF/dt |u> for the null
        // vector u; the formula is that times (n_a + n_b) / 2.
        let bath = reference_bath();
        for &(wb, na, nb, th) in &[(0.9, 0.1, 0.2, 0.3), (0.95, 0.5, 0.05, 2.0), (1.1, 0.2, 0.2, 4.0)] {
            let sys = SystemSpec::new(1.0, wb, 0.6, 0.8).unwrap();
            let s = MinimumUncertaintyState::new(na, nb, th).unwrap();
            let g = br_generator(&sys, &bath).unwrap();
            let f = s.moments().to_vector();
            let df = SecondMoments::from_vector(&MomentVector(g.rhs(&f))).matrix();
            let norm = (na + nb).sqrt();
            let u = [Complex64::new(nb.sqrt() / norm, 0.0), -Complex64::from_polar(na.sqrt() / norm, -th)];
            let mut q = ZERO;
            for i in 0..2 {
                for j in 0..2 {
                    q += u[i].conj() * df[i][j] * u[j];
                }
            }
            let v = gaussian_positivity_violation(&sys, &bath, &s).unwrap();
            assert!((q.re * 0.5 * (na + nb) - v).abs() < 1e-15, "{q} {v}");
        }
    }

    #[test]
    fn positivity_boundary_cases() {
        let flat = Bath::new(BathSpec::flat(0.01, 0.5, 1.5, 0.3)).unwrap();
        let sys = SystemSpec::symmetric(1.0, 1.0).unwrap();
        let s = MinimumUncertaintyState::new(0.2, 0.2, 0.0).unwrap();
        assert!(gaussian_positivity_violation(&sys, &flat, &s).unwrap().abs() < 1e-16);
        let sys = SystemSpec::symmetric(1.0, 0.9).unwrap();
        let s = MinimumUncertaintyState::new(0.2, 0.3, PI).unwrap();
        assert!(gaussian_positivity_violation(&sys, &reference_bath(), &s).unwrap() > 0.0);
    }

    #[test]
    fn oracle_grid_and_recurrence() {
        let bath = reference_bath();
        let cfg = OracleConfig::default();
        let g = bath_grid(&bath, &cfg, 50.0).unwrap();
        assert!(g.recurrence_time() >= 200.0 - 1e-9);
        assert!(g.modes >= 256);
        let short = OracleConfig { modes: Some(16), ..cfg };
        assert!(matches!(bath_grid(&bath, &short, 50.0), Err(Error::Domain(_))));
    }

    #[test]
    fn decoupled_oracles_stay_in_vacuum() {
        let sys = SystemSpec::new(1.0, 0.9, 0.0, 0.0).unwrap();
        let times = [0.0, 1.0, 5.0];
        let cfg = OracleConfig::default();
        for f in discretized_bath_oracle(&sys, &reference_bath(), &cfg, &times).unwrap() {
            assert_eq!(f, SecondMoments::default());
        }
        for f in fock_oracle(&sys, &reference_bath(), &cfg, &times).unwrap() {
            assert!(f.max_abs_diff(&SecondMoments::default()) < 1e-300);
        }
    }

    #[test]
    fn fock_derivative_matches_generator() {
        let bath = Bath::new(BathSpec::super_ohmic(0.001, 0.9, 3.0, 0.2)).unwrap();
        let sys = SystemSpec::new(1.0, 0.9, 0.6, 0.8).unwrap();
        let g = br_generator(&sys, &bath).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let states: Vec<Vec<(usize, usize, Complex64)>> = vec![
            vec![(0, 0, Complex64::new(1.0, 0.0))],
            vec![(1, 0, Complex64::new(1.0, 0.0))],
            vec![(0, 1, Complex64::new(1.0, 0.0))],
            vec![(1, 0, Complex64::new(s, 0.0)), (0, 1, Complex64::new(s, 0.0))],
            vec![(1, 0, Complex64::new(s, 0.0)), (0, 1, Complex64::new(0.0, s))],
            vec![(2, 1, Complex64::new(0.6, 0.0)), (1, 2, Complex64::new(0.0, 0.8))],
        ];
        for st in &states {
            let (f, df) = fock_moment_derivative(&sys, &bath, &OracleConfig::default(), st).unwrap();
            let expect = g.rhs(&f);
            for k in 0..4 {
                assert!((df.0[k] - expect[k]).abs() < 1e-14, "{st:?}: {:?} vs {:?}", df.0, expect);
            }
        }
    }

    #[test]
    fn fock_trajectory_matches_moment_equation() {
        let bath = Bath::new(BathSpec::super_ohmic(0.001, 0.9, 3.0, 0.2)).unwrap();
        let sys = SystemSpec::new(1.0, 0.9, 0.6, 0.8).unwrap();
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 2.0).collect();
        let fock = fock_oracle(&sys, &bath, &OracleConfig::default(), &times).unwrap();
        let g = br_generator(&sys, &bath).unwrap();
        let ev = crate::meq::evolve(&g, &MomentVector::default(), &times).unwrap();
        for (a, b) in fock.iter().zip(&ev.states) {
            assert!(a.max_abs_diff(&SecondMoments::from_vector(b)) < 1e-9);
        }
    }
}
