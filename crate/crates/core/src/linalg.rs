//! Complex matrix aliases and the handful of dense helpers the models share.

use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Unit-modulus complex number `e^{j·phase}`.
#[inline]
pub fn cis(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

/// Rank-1 matrix `a·bᴴ`.
pub fn outer(a: &CVector, b: &CVector) -> CMatrix {
    a * b.adjoint()
}

/// Squared Frobenius norm.
pub fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// `bᴴ·a` for column vectors.
pub fn inner(b: &CVector, a: &CVector) -> Complex64 {
    b.dotc(a)
}

/// `log₂ det(I + scale·X·Xᴴ)`, evaluated through the singular values of `X`.
pub fn log2_det_identity_plus(scale: f64, x: &CMatrix) -> f64 {
    if x.nrows() == 0 || x.ncols() == 0 {
        return 0.0;
    }
    let sv = x.clone().singular_values();
    sv.iter().map(|s| (1.0 + scale * s * s).log2()).sum()
}

/// Largest absolute entry of `UᴴU − I`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let g = u.adjoint() * u;
    let mut worst = 0.0_f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Circularly-symmetric complex Gaussian sample with the given variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    if variance <= 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_phase(phase: f64) -> f64 {
    let two_pi = 2.0 * core::f64::consts::PI;
    let w = phase - two_pi * (phase / two_pi).floor();
    if w >= two_pi {
        0.0
    } else {
        w
    }
}
