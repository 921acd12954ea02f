//! Haar-random gates.

use nalgebra::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use super::Mat4;

/// Haar-distributed 4×4 unitary: QR of a complex Ginibre matrix with the
/// phases of `R`'s diagonal moved into `Q`.
pub fn haar_unitary4<R: Rng + ?Sized>(rng: &mut R) -> Mat4 {
    let g = Mat4::from_fn(|_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex::new(re, im) / Complex::new(2f64.sqrt(), 0.0)
    });
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..4 {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex::new(1.0, 0.0) };
        for i in 0..4 {
            q[(i, j)] *= phase;
        }
    }
    q
}
