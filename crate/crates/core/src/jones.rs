//! Complex 2x2 Jones calculus for the polarization qubit.
//!
//! Conventions, fixed once and relied on everywhere else:
//!
//! * Basis order is `(H, V)`.
//! * `hwp(theta)` is the half-wave plate with fast axis at `theta` from H:
//!   `[[cos 2t, sin 2t], [sin 2t, -cos 2t]]`, global phase dropped.
//! * `qwp(theta)` is the quarter-wave plate with the 90-degree retardance on
//!   the slow axis: `qwp(0) = diag(1, i)`. Either retardance sign reproduces
//!   the same detection statistics; this one is frozen for reproducibility.
//! * `rotation_s3(delta)` rotates the Poincare sphere by `delta` about the
//!   circular-polarization axis, i.e. within the plane that contains both H
//!   and the diagonal states: `rotation_s3(pi/2)` maps H -> + -> V -> - -> H.
//! * Matrix comparisons are up to global phase, via `|tr(A^dag B)| / 2`.
//!
//! Angles are radians throughout the library; degrees appear only at the
//! command-line and file-format boundary.

use num_complex::Complex;

use crate::fm;

/// Complex amplitude.
pub type C64 = Complex<f64>;

#[inline]
fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Pure polarization state: amplitudes on the `{|H>, |V>}` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolVector {
    pub h: C64,
    pub v: C64,
}

impl PolVector {
    pub const fn new(h: C64, v: C64) -> Self {
        Self { h, v }
    }

    /// `|H>`
    pub fn horizontal() -> Self {
        Self::new(c(1.0, 0.0), c(0.0, 0.0))
    }

    /// `|V>`
    pub fn vertical() -> Self {
        Self::new(c(0.0, 0.0), c(1.0, 0.0))
    }

    /// `|+> = (|H> + |V>)/sqrt(2)`
    pub fn plus() -> Self {
        let a = core::f64::consts::FRAC_1_SQRT_2;
        Self::new(c(a, 0.0), c(a, 0.0))
    }

    /// `|-> = (|H> - |V>)/sqrt(2)`
    pub fn minus() -> Self {
        let a = core::f64::consts::FRAC_1_SQRT_2;
        Self::new(c(a, 0.0), c(-a, 0.0))
    }

    pub fn norm_sq(&self) -> f64 {
        self.h.norm_sqr() + self.v.norm_sqr()
    }

    pub fn norm(&self) -> f64 {
        fm::sqrt(self.norm_sq())
    }

    /// Inner product `<self|other>` (conjugate-linear in `self`).
    pub fn inner(&self, other: &Self) -> C64 {
        self.h.conj() * other.h + self.v.conj() * other.v
    }

    /// `|<self|other>|^2`.
    pub fn overlap(&self, other: &Self) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.h * s, self.v * s)
    }

    pub fn is_finite(&self) -> bool {
        self.h.re.is_finite()
            && self.h.im.is_finite()
            && self.v.re.is_finite()
            && self.v.im.is_finite()
    }
}

/// 2x2 complex operator on the polarization qubit, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesMatrix {
    pub m: [[C64; 2]; 2],
}

impl JonesMatrix {
    pub const fn new(m: [[C64; 2]; 2]) -> Self {
        Self { m }
    }

    pub fn identity() -> Self {
        Self::new([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]])
    }

    pub fn zero() -> Self {
        Self::new([[c(0.0, 0.0); 2]; 2])
    }

    pub fn diag(a: C64, b: C64) -> Self {
        Self::new([[a, c(0.0, 0.0)], [c(0.0, 0.0), b]])
    }

    /// `self * other`; `other` acts first.
    pub fn compose(&self, other: &Self) -> Self {
        let a = &self.m;
        let b = &other.m;
        let mut out = [[c(0.0, 0.0); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Self::new(out)
    }

    /// `self * s` as a column vector.
    pub fn apply(&self, s: &PolVector) -> PolVector {
        PolVector::new(
            self.m[0][0] * s.h + self.m[0][1] * s.v,
            self.m[1][0] * s.h + self.m[1][1] * s.v,
        )
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self::new([
            [self.m[0][0].conj(), self.m[1][0].conj()],
            [self.m[0][1].conj(), self.m[1][1].conj()],
        ])
    }

    pub fn trace(&self) -> C64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut m = self.m;
        for row in &mut m {
            for e in row {
                *e *= s;
            }
        }
        Self::new(m)
    }

    /// Phase-insensitive fidelity `|tr(self^dag other)| / 2`; equals 1 iff
    /// the two matrices are unitary and equal up to a global phase.
    pub fn fidelity(&self, other: &Self) -> f64 {
        let p = self.dagger().compose(other);
        fm::sqrt(p.trace().norm_sqr()) / 2.0
    }

    /// Largest absolute entry of `self^dag self - I`.
    pub fn unitarity_defect(&self) -> f64 {
        let p = self.dagger().compose(self);
        let mut worst = 0.0_f64;
        for i in 0..2 {
            for j in 0..2 {
                let target = if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) };
                let d = (p.m[i][j] - target).norm_sqr();
                if d > worst {
                    worst = d;
                }
            }
        }
        fm::sqrt(worst)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }

    /// Largest singular value (operator norm), from the eigenvalues of the
    /// 2x2 Hermitian `self^dag self`.
    pub fn max_singular_value(&self) -> f64 {
        let p = self.dagger().compose(self);
        let a = p.m[0][0].re;
        let d = p.m[1][1].re;
        let b2 = p.m[0][1].norm_sqr();
        let half = 0.5 * (a + d);
        let disc = fm::sqrt(0.25 * (a - d) * (a - d) + b2);
        fm::sqrt((half + disc).max(0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.m
            .iter()
            .flatten()
            .all(|e| e.re.is_finite() && e.im.is_finite())
    }
}

/// Half-wave plate with fast axis at `theta` (radians) from H.
pub fn hwp(theta: f64) -> JonesMatrix {
    let ct = fm::cos(2.0 * theta);
    let st = fm::sin(2.0 * theta);
    JonesMatrix::new([[c(ct, 0.0), c(st, 0.0)], [c(st, 0.0), c(-ct, 0.0)]])
}

/// Quarter-wave plate with fast axis at `theta` (radians) from H;
/// `qwp(0) = diag(1, i)`.
pub fn qwp(theta: f64) -> JonesMatrix {
    let ct = fm::cos(theta);
    let st = fm::sin(theta);
    let (c2, s2, cs) = (ct * ct, st * st, ct * st);
    JonesMatrix::new([
        [c(c2, s2), c(cs, -cs)],
        [c(cs, -cs), c(s2, c2)],
    ])
}

/// Poincare-sphere rotation by `delta` (radians) about the circular axis:
/// the real rotation matrix of angle `delta/2` on the Jones vector.
/// `rotation_s3(pi/2)` maps H -> + -> V -> - -> H.
pub fn rotation_s3(delta: f64) -> JonesMatrix {
    let ct = fm::cos(delta / 2.0);
    let st = fm::sin(delta / 2.0);
    JonesMatrix::new([[c(ct, 0.0), c(-st, 0.0)], [c(st, 0.0), c(ct, 0.0)]])
}

/// Relative phase `phi` between V and H: `diag(1, e^{i phi})`.
pub fn phase_shift(phi: f64) -> JonesMatrix {
    JonesMatrix::diag(c(1.0, 0.0), c(fm::cos(phi), fm::sin(phi)))
}
