//! Two-qubit gates to `RZ`/`RX`/`RZZ` via the Cartan (KAK) decomposition.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Complex, Matrix4, SymmetricEigen};
use num_complex::Complex64;

use crate::circuit::{kron2, rx, rz, Circuit, Gate, Mat2, Mat4};
use crate::error::Result;

fn c(re: f64, im: f64) -> Complex64 {
    Complex::new(re, im)
}

/// Columns map the computational basis to the magic basis.
fn magic() -> Mat4 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Mat4::new(
        c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, s),
        c(0.0, 0.0), c(0.0, s), c(s, 0.0), c(0.0, 0.0),
        c(0.0, 0.0), c(0.0, s), c(-s, 0.0), c(0.0, 0.0),
        c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -s),
    )
}

/// `RY(π/2)`: conjugation maps `Z` to `X`.
fn to_x() -> Mat2 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Mat2::new(c(s, 0.0), c(-s, 0.0), c(s, 0.0), c(s, 0.0))
}

/// `RX(−π/2)`: conjugation maps `Z` to `Y`.
fn to_y() -> Mat2 {
    rx(-FRAC_PI_2)
}

/// Angles `(α, β, γ)` with `u ∝ RZ(γ)·RX(β)·RZ(α)`.
pub fn euler_zxz(u: &Mat2) -> (f64, f64, f64) {
    let det = u.determinant();
    let v = u / det.sqrt();
    let (a, b) = (v[(0, 0)], v[(0, 1)]);
    let beta = 2.0 * b.norm().atan2(a.norm());
    let sum = if a.norm() > 1e-14 { -2.0 * a.arg() } else { 0.0 };
    let diff = if b.norm() > 1e-14 { 2.0 * (b.arg() + FRAC_PI_2) } else { 0.0 };
    ((sum + diff) / 2.0, beta, (sum - diff) / 2.0)
}

/// Factors an (approximately) local 4×4 operator as `a ⊗ b`.
fn split_local(k: &Mat4) -> (Mat2, Mat2) {
    let block = |i: usize, j: usize| k.fixed_view::<2, 2>(2 * i, 2 * j).into_owned();
    let (mut bi, mut bj, mut best) = (0, 0, -1.0);
    for i in 0..2 {
        for j in 0..2 {
            let n = block(i, j).norm();
            if n > best {
                (bi, bj, best) = (i, j, n);
            }
        }
    }
    let blk = block(bi, bj);
    let b = blk / blk.determinant().sqrt();
    let a = Mat2::from_fn(|i, j| (b.adjoint() * block(i, j)).trace() / c(2.0, 0.0));
    (a, b)
}

/// Real orthogonal `P` (det +1) diagonalizing a complex symmetric unitary `m`.
fn real_diagonalizer(m: &Mat4) -> Matrix4<f64> {
    let re = m.map(|z| z.re);
    let im = m.map(|z| z.im);
    let mut best: Option<(f64, Matrix4<f64>)> = None;
    for (x, y) in [(0.8191520442889918, 0.5735764363510461), (0.3090169943749474, 0.9510565162951535), (1.0, 0.0), (0.0, 1.0)] {
        let mut p = SymmetricEigen::new(re * x + im * y).eigenvectors;
        if p.determinant() < 0.0 {
            p.column_mut(0).neg_mut();
        }
        let pc = p.map(|v| c(v, 0.0));
        let d = pc.transpose() * m * pc;
        let off = (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| d[(i, j)].norm()).fold(0.0, f64::max);
        if best.as_ref().is_none_or(|(o, _)| off < *o) {
            best = Some((off, p));
        }
        if off < 1e-13 {
            break;
        }
    }
    best.expect("at least one candidate").1
}

enum Piece {
    Local(Mat2, Mat2),
    Zz(f64),
}

/// Native gates on `(site, site + 1)` in application order whose product
/// equals `g` up to a global phase: `RZ·RX·RZ` Euler triples on each qubit
/// around at most three `RZZ`. Zero-angle `RZZ` factors are omitted;
/// diagonal gates become one `RZ` per qubit and one `RZZ`.
pub fn decompose_to_native(g: &Mat4, site: usize) -> Vec<Gate> {
    let off_diag = (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| g[(i, j)].norm()).fold(0.0, f64::max);
    if off_diag < 1e-14 {
        let ph: Vec<f64> = (0..4).map(|k| g[(k, k)].arg()).collect();
        let c1 = (ph[0] + ph[1] - ph[2] - ph[3]) / 4.0;
        let c2 = (ph[0] - ph[1] + ph[2] - ph[3]) / 4.0;
        let c3 = (ph[0] - ph[1] - ph[2] + ph[3]) / 4.0;
        let mut out = vec![Gate::Rz { site, angle: -2.0 * c1 }, Gate::Rz { site: site + 1, angle: -2.0 * c2 }];
        if c3 != 0.0 {
            out.push(Gate::Rzz { site, angle: -2.0 * c3 });
        }
        return out;
    }

    let b = magic();
    let u = g / g.determinant().powf(0.25);
    let up = b.adjoint() * u * b;
    let p = real_diagonalizer(&(up.transpose() * up)).map(|v| c(v, 0.0));
    let d = p.transpose() * up.transpose() * up * p;
    let mut theta: Vec<f64> = (0..4).map(|k| d[(k, k)].arg() / 2.0).collect();
    let det_phase: f64 = theta.iter().sum();
    if (det_phase.rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < FRAC_PI_2 {
        theta[0] += std::f64::consts::PI;
    }
    let k1 = up * p * Mat4::from_diagonal(&nalgebra::Vector4::from_fn(|k, _| Complex64::from_polar(1.0, -theta[k])));
    let (a1, a2) = split_local(&(b * k1 * b.adjoint()));
    let (b1, b2) = split_local(&(b * p.transpose() * b.adjoint()));

    // B diag(e^{iθ}) B† = e^{iφ} exp(i(a XX + b YY + c ZZ)); the Pauli
    // products are diagonal in the magic basis with ±1 patterns.
    let x = Mat2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0));
    let y = Mat2::new(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0));
    let z = Mat2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0));
    let sign = |m: &Mat2| {
        let dm = b.adjoint() * kron2(m, m) * b;
        [dm[(0, 0)].re, dm[(1, 1)].re, dm[(2, 2)].re, dm[(3, 3)].re]
    };
    let (sx, sy, sz) = (sign(&x), sign(&y), sign(&z));
    // The sign columns and the all-ones column are mutually orthogonal.
    let coef = |s: [f64; 4]| (0..4).map(|k| s[k] * theta[k]).sum::<f64>() / 4.0;
    let (ax, ay, az) = (coef(sx), coef(sy), coef(sz));

    let (vx, vy) = (to_x(), to_y());
    let pieces = vec![
        Piece::Local(b1, b2),
        Piece::Zz(-2.0 * az),
        Piece::Local(vy.adjoint(), vy.adjoint()),
        Piece::Zz(-2.0 * ay),
        Piece::Local(vx.adjoint() * vy, vx.adjoint() * vy),
        Piece::Zz(-2.0 * ax),
        Piece::Local(a1 * vx, a2 * vx),
    ];
    let mut merged: Vec<Piece> = Vec::new();
    for piece in pieces {
        match (merged.last_mut(), piece) {
            (_, Piece::Zz(t)) if t.abs() < 1e-14 => {}
            (Some(Piece::Local(l0, l1)), Piece::Local(n0, n1)) => {
                *l0 = n0 * *l0;
                *l1 = n1 * *l1;
            }
            (_, p) => merged.push(p),
        }
    }
    let mut out = Vec::new();
    for piece in merged {
        match piece {
            Piece::Zz(angle) => out.push(Gate::Rzz { site, angle }),
            Piece::Local(l0, l1) => {
                let (a0, b0, g0) = euler_zxz(&l0);
                let (a1, b1, g1) = euler_zxz(&l1);
                out.extend([
                    Gate::Rz { site, angle: a0 },
                    Gate::Rz { site: site + 1, angle: a1 },
                    Gate::Rx { site, angle: b0 },
                    Gate::Rx { site: site + 1, angle: b1 },
                    Gate::Rz { site, angle: g0 },
                    Gate::Rz { site: site + 1, angle: g1 },
                ]);
            }
        }
    }
    out
}

/// Product of a native gate list on two qubits (site 0 and 1).
pub fn native_product(gates: &[Gate]) -> Mat4 {
    let site0 = gates.iter().map(Gate::first_site).min().unwrap_or(0);
    let mut m = Mat4::identity();
    for g in gates {
        let local = match g {
            Gate::Rz { site, angle } if *site == site0 => kron2(&rz(*angle), &Mat2::identity()),
            Gate::Rz { angle, .. } => kron2(&Mat2::identity(), &rz(*angle)),
            Gate::Rx { site, angle } if *site == site0 => kron2(&rx(*angle), &Mat2::identity()),
            Gate::Rx { angle, .. } => kron2(&Mat2::identity(), &rx(*angle)),
            other => other.matrix4().expect("two-site gate"),
        };
        m = local * m;
    }
    m
}

/// Distance `‖a − e^{iφ}b‖_F` minimized over the global phase.
pub fn phase_distance(a: &Mat4, b: &Mat4) -> f64 {
    let tr = (b.adjoint() * a).trace();
    let phase = if tr.norm() > 0.0 { tr / tr.norm() } else { c(1.0, 0.0) };
    (a - b * phase).norm()
}

/// Replaces every `DENSE2Q` by its native decomposition. Each original layer
/// becomes as many layers as its longest decomposition, the `k`-th gates of
/// all sequences sharing a layer.
pub fn decompose_circuit(circuit: &Circuit) -> Result<Circuit> {
    let mut out = Circuit::new(circuit.sites());
    for layer in circuit.layers() {
        let seqs: Vec<Vec<Gate>> = layer
            .iter()
            .map(|g| match g {
                Gate::Dense2q { site, matrix } => decompose_to_native(matrix, *site),
                other => vec![other.clone()],
            })
            .collect();
        let depth = seqs.iter().map(Vec::len).max().unwrap_or(0);
        if depth == 0 {
            out.push_layer(Vec::new())?;
        }
        for k in 0..depth {
            out.push_layer(seqs.iter().filter_map(|s| s.get(k).cloned()).collect())?;
        }
    }
    Ok(out)
}
