// Copyright 2026 The coherence-lab Contributors
// SPDX-License-Identifier: Apache-2.0

//! Second moments `F_ij = <psi_i^dagger psi_j>` and their real 4-vector form.

use num_complex::Complex64;

/// Hermitian 2x2 moment matrix, stored by its independent entries.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SecondMoments {
    pub f_aa: f64,
    pub f_bb: f64,
    pub f_ab: Complex64,
}

/// `f = (F_aa, F_bb, 2 Re F_ab, 2 Im F_ab)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MomentVector(pub [f64; 4]);

impl SecondMoments {
    pub fn new(f_aa: f64, f_bb: f64, f_ab: Complex64) -> Self {
        SecondMoments { f_aa, f_bb, f_ab }
    }

    /// Hermitian part of an arbitrary 2x2 complex matrix.
    pub fn from_matrix(m: [[Complex64; 2]; 2]) -> Self {
        SecondMoments {
            f_aa: m[0][0].re,
            f_bb: m[1][1].re,
            f_ab: 0.5 * (m[0][1] + m[1][0].conj()),
        }
    }

    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        [
            [Complex64::new(self.f_aa, 0.0), self.f_ab],
            [self.f_ab.conj(), Complex64::new(self.f_bb, 0.0)],
        ]
    }

    pub fn to_vector(&self) -> MomentVector {
        MomentVector([self.f_aa, self.f_bb, 2.0 * self.f_ab.re, 2.0 * self.f_ab.im])
    }

    pub fn from_vector(v: &MomentVector) -> Self {
        let f = v.0;
        SecondMoments {
            f_aa: f[0],
            f_bb: f[1],
            f_ab: Complex64::new(0.5 * f[2], 0.5 * f[3]),
        }
    }

    /// Both eigenvalues in ascending order, from the closed form for a
    /// Hermitian 2x2 matrix.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let mean = 0.5 * (self.f_aa + self.f_bb);
        let half = 0.5 * (self.f_aa - self.f_bb);
        let r = half.hypot(self.f_ab.norm());
        [mean - r, mean + r]
    }

    /// Smallest eigenvalue `lambda_m`.
    pub fn min_eigenvalue(&self) -> f64 {
        let mean = 0.5 * (self.f_aa + self.f_bb);
        let half = 0.5 * (self.f_aa - self.f_bb);
        let r = half.hypot(self.f_ab.norm());
        if mean >= 0.0 {
            // det / larger eigenvalue avoids cancellation when r ~ mean.
            let larger = mean + r;
            if larger == 0.0 {
                return 0.0;
            }
            let det = self.f_aa * self.f_bb - self.f_ab.norm_sqr();
            det / larger
        } else {
            mean - r
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.f_aa - other.f_aa)
            .abs()
            .max((self.f_bb - other.f_bb).abs())
            .max((self.f_ab - other.f_ab).norm())
    }
}

impl From<MomentVector> for SecondMoments {
    fn from(v: MomentVector) -> Self {
        SecondMoments::from_vector(&v)
    }
}

impl From<SecondMoments> for MomentVector {
    fn from(m: SecondMoments) -> Self {
        m.to_vector()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn vector_round_trip(a in -10.0..10.0f64, b in -10.0..10.0f64, c in -10.0..10.0f64, d in -10.0..10.0f64) {
            let v = MomentVector([a, b, c, d]);
            let m = SecondMoments::from_vector(&v);
            prop_assert_eq!(m.to_vector(), v);
            prop_assert_eq!(SecondMoments::from_vector(&m.to_vector()), m);
        }

        #[test]
        fn min_eigenvalue_matches_quadratic(a in 0.0..2.0f64, b in 0.0..2.0f64, re in -1.0..1.0f64, im in -1.0..1.0f64) {
            let m = SecondMoments::new(a, b, Complex64::new(re, im));
            let tr = a + b;
            let det = a * b - re * re - im * im;
            let lam = 0.5 * (tr - (tr * tr - 4.0 * det).sqrt());
            prop_assert!((m.min_eigenvalue() - lam).abs() < 1e-12);
            prop_assert!((m.eigenvalues()[0] - lam).abs() < 1e-12);
        }
    }

    #[test]
    fn vacuum_and_rank_one() {
        assert_eq!(SecondMoments::default().min_eigenvalue(), 0.0);
        let (na, nb, th) = (0.3f64, 0.05f64, 1.1f64);
        let m = SecondMoments::new(na, nb, Complex64::from_polar((na * nb).sqrt(), th));
        assert!(m.min_eigenvalue().abs() < 1e-17);
    }

    #[test]
    fn hermitian_projection() {
        let i = Complex64::new(0.0, 1.0);
        let m = SecondMoments::from_matrix([[1.0 + 0.0 * i, 2.0 + i], [2.0 - i, 3.0 + 0.0 * i]]);
        let back = m.matrix();
        assert_eq!(back[1][0], back[0][1].conj());
        assert_eq!(m.f_ab, 2.0 + i);
    }
}
