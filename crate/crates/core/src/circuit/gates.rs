//! Rotation-gate conventions and the state-vector kernels.
//!
//! `RX(θ) = e^{−iθX/2}`, `RZ(θ) = e^{−iθZ/2}`, `RZZ(θ) = e^{−i(θ/2) Z⊗Z}`.
//! Two-qubit matrices are indexed `2·b_i + b_{i+1}` for the pair `(i, i+1)`,
//! i.e. the left site is the more significant local bit.

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;

pub type Mat2 = Matrix2<Complex64>;
pub type Mat4 = Matrix4<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[inline]
fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn rx(theta: f64) -> Mat2 {
    let (s, co) = (theta / 2.0).sin_cos();
    Mat2::new(c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0))
}

pub fn rz(theta: f64) -> Mat2 {
    Mat2::new(Complex64::from_polar(1.0, -theta / 2.0), ZERO, ZERO, Complex64::from_polar(1.0, theta / 2.0))
}

pub fn rzz(theta: f64) -> Mat4 {
    let m = Complex64::from_polar(1.0, -theta / 2.0);
    let p = Complex64::from_polar(1.0, theta / 2.0);
    Mat4::from_diagonal(&nalgebra::Vector4::new(m, p, p, m))
}

/// Kronecker product `a ⊗ b` with `a` on the left (more significant) site.
pub fn kron2(a: &Mat2, b: &Mat2) -> Mat4 {
    Mat4::from_fn(|r, col| a[(r / 2, col / 2)] * b[(r % 2, col % 2)])
}

/// `‖MᴴM − I‖_max`.
pub fn unitarity_error4(m: &Mat4) -> f64 {
    (m.adjoint() * m - Mat4::identity()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn unitarity_error2(m: &Mat2) -> f64 {
    (m.adjoint() * m - Mat2::identity()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Applies a single-site matrix to a `2^sites` amplitude slice.
pub fn apply_1q(amps: &mut [Complex64], sites: usize, site: usize, m: &Mat2) {
    let bit = sites - 1 - site;
    let stride = 1usize << bit;
    let (m00, m01, m10, m11) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let block = stride << 1;
    for base in (0..amps.len()).step_by(block) {
        for i0 in base..base + stride {
            let i1 = i0 + stride;
            let a0 = amps[i0];
            let a1 = amps[i1];
            amps[i0] = m00 * a0 + m01 * a1;
            amps[i1] = m10 * a0 + m11 * a1;
        }
    }
}

/// Diagonal single-site phase `diag(p0, p1)`.
pub fn apply_1q_diag(amps: &mut [Complex64], sites: usize, site: usize, p0: Complex64, p1: Complex64) {
    let bit = sites - 1 - site;
    for (i, a) in amps.iter_mut().enumerate() {
        *a *= if (i >> bit) & 1 == 0 { p0 } else { p1 };
    }
}

/// Applies a two-site matrix on `(site, site + 1)`.
pub fn apply_2q(amps: &mut [Complex64], sites: usize, site: usize, m: &Mat4) {
    let lo = sites - 2 - site;
    let hi_mask = 1usize << (lo + 1);
    let lo_mask = 1usize << lo;
    let low_bits = lo_mask - 1;
    let quarter = amps.len() >> 2;
    for k in 0..quarter {
        let base = ((k >> lo) << (lo + 2)) | (k & low_bits);
        let idx = [base, base | lo_mask, base | hi_mask, base | hi_mask | lo_mask];
        let v = [amps[idx[0]], amps[idx[1]], amps[idx[2]], amps[idx[3]]];
        for (r, &i) in idx.iter().enumerate() {
            amps[i] = m[(r, 0)] * v[0] + m[(r, 1)] * v[1] + m[(r, 2)] * v[2] + m[(r, 3)] * v[3];
        }
    }
}

/// `RZZ` as a diagonal phase on `(site, site + 1)`.
pub fn apply_zz_phase(amps: &mut [Complex64], sites: usize, site: usize, theta: f64) {
    let aligned = Complex64::from_polar(1.0, -theta / 2.0);
    let anti = Complex64::from_polar(1.0, theta / 2.0);
    let b0 = sites - 1 - site;
    let b1 = b0 - 1;
    for (i, a) in amps.iter_mut().enumerate() {
        let parity = ((i >> b0) ^ (i >> b1)) & 1;
        *a *= if parity == 0 { aligned } else { anti };
    }
}
