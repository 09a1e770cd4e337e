// Copyright 2026 The coherence-lab Contributors
// SPDX-License-Identifier: Apache-2.0

//! System parameters and the multi-bath coupling list.

use num_complex::Complex64;

use crate::bath::Bath;
use crate::error::{Error, Result};

/// Two bosonic modes `a`, `b` and the real amplitudes with which they couple
/// to a bath.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemSpec {
    pub omega_a: f64,
    pub omega_b: f64,
    pub phi_a: f64,
    pub phi_b: f64,
}

impl SystemSpec {
    pub fn new(omega_a: f64, omega_b: f64, phi_a: f64, phi_b: f64) -> Result<Self> {
        for (name, v) in [("omega_a", omega_a), ("omega_b", omega_b), ("phi_a", phi_a), ("phi_b", phi_b)] {
            if !v.is_finite() {
                return Err(Error::domain(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(SystemSpec {
            omega_a,
            omega_b,
            phi_a,
            phi_b,
        })
    }

    /// Builds from the mean frequency `omega` and half-detuning `delta`.
    pub fn from_center(omega: f64, delta: f64, phi_a: f64, phi_b: f64) -> Result<Self> {
        Self::new(omega + delta, omega - delta, phi_a, phi_b)
    }

    /// Symmetric couplings `phi_a = phi_b = 1/sqrt(2)`.
    pub fn symmetric(omega_a: f64, omega_b: f64) -> Result<Self> {
        let p = std::f64::consts::FRAC_1_SQRT_2;
        Self::new(omega_a, omega_b, p, p)
    }

    /// Accepts complex couplings and removes their phases by redefining
    /// `psi_i -> e^{i arg phi_i} psi_i`. Returns the spec and the two phases;
    /// a moment `F_ab` computed in the gauged frame maps back to the
    /// original one as `F_ab * e^{i(theta_a - theta_b)}`.
    pub fn from_complex(
        omega_a: f64,
        omega_b: f64,
        phi_a: Complex64,
        phi_b: Complex64,
    ) -> Result<(Self, [f64; 2])> {
        let spec = Self::new(omega_a, omega_b, phi_a.norm(), phi_b.norm())?;
        Ok((spec, [phi_a.arg(), phi_b.arg()]))
    }

    pub fn delta(&self) -> f64 {
        0.5 * (self.omega_a - self.omega_b)
    }

    pub fn omega(&self) -> f64 {
        0.5 * (self.omega_a + self.omega_b)
    }

    pub fn omegas(&self) -> [f64; 2] {
        [self.omega_a, self.omega_b]
    }

    pub fn phis(&self) -> [f64; 2] {
        [self.phi_a, self.phi_b]
    }

    /// Same frequencies, different couplings.
    pub fn with_phis(&self, phi: [f64; 2]) -> Self {
        SystemSpec {
            phi_a: phi[0],
            phi_b: phi[1],
            ..*self
        }
    }
}

/// One bath in a multi-bath model with its own coupling vector.
#[derive(Debug, Clone)]
pub struct BathCoupling {
    pub bath: Bath,
    pub phi: [f64; 2],
}

/// A list of independent baths, each coupling to the modes through its own
/// `(phi_a, phi_b)`.
#[derive(Debug, Clone)]
pub struct MultiBathSpec {
    terms: Vec<BathCoupling>,
}

impl MultiBathSpec {
    pub fn new(terms: Vec<BathCoupling>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::domain("multi-bath model needs at least one bath"));
        }
        for (n, t) in terms.iter().enumerate() {
            if !(t.phi[0].is_finite() && t.phi[1].is_finite()) {
                return Err(Error::domain(format!("bath {n}: coupling must be finite")));
            }
            if t.phi[0] == 0.0 && t.phi[1] == 0.0 {
                return Err(Error::domain(format!("bath {n}: coupling vector is zero")));
            }
        }
        Ok(MultiBathSpec { terms })
    }

    /// The single-bath model with the system's own couplings. Unlike
    /// [`MultiBathSpec::new`] a zero coupling vector is allowed here.
    pub fn single(sys: &SystemSpec, bath: &Bath) -> Self {
        MultiBathSpec {
            terms: vec![BathCoupling {
                bath: bath.clone(),
                phi: sys.phis(),
            }],
        }
    }

    pub fn terms(&self) -> &[BathCoupling] {
        &self.terms
    }

    /// True if every coupling vector is parallel to the first one.
    pub fn is_parallel(&self) -> bool {
        let p0 = self.terms[0].phi;
        let n0 = p0[0].hypot(p0[1]);
        self.terms.iter().all(|t| {
            let cross = p0[0] * t.phi[1] - p0[1] * t.phi[0];
            cross.abs() <= 1e-12 * n0 * t.phi[0].hypot(t.phi[1]).max(f64::MIN_POSITIVE)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn center_accessors_round_trip() {
        let s = SystemSpec::new(1.0, 0.9, 0.3, 0.4).unwrap();
        assert!((s.omega() + s.delta() - s.omega_a).abs() <= 2.0 * f64::EPSILON);
        assert!((s.omega() - s.delta() - s.omega_b).abs() <= 2.0 * f64::EPSILON);
        let t = SystemSpec::from_center(0.95, 0.05, 0.3, 0.4).unwrap();
        assert!((t.omega_a - 1.0).abs() < 1e-15 && (t.omega_b - 0.9).abs() < 1e-15);
    }

    #[test]
    fn complex_couplings_are_gauged() {
        let (s, th) = SystemSpec::from_complex(
            1.0,
            0.9,
            Complex64::from_polar(0.5, 0.3),
            Complex64::from_polar(0.2, -1.0),
        )
        .unwrap();
        assert!((s.phi_a - 0.5).abs() < 1e-15 && (s.phi_b - 0.2).abs() < 1e-15);
        assert!((th[0] - 0.3).abs() < 1e-15 && (th[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(SystemSpec::new(f64::NAN, 1.0, 0.0, 0.0).is_err());
    }
}
