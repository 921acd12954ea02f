//! Matrix product operators with SVD truncation.

use nalgebra::{DMatrix, Matrix4, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::Mat4;
use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// Largest chain [`MPOperator::to_dense`] will expand.
pub const MAX_DENSE_MPO_SITES: usize = 10;

/// Site tensor with indices (left bond, out, in, right bond), stored
/// row-major in that order.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteTensor {
    pub left: usize,
    pub right: usize,
    pub data: Vec<Complex64>,
}

impl SiteTensor {
    fn zeros(left: usize, right: usize) -> Self {
        Self { left, right, data: vec![Complex64::new(0.0, 0.0); left * 4 * right] }
    }

    #[inline]
    fn idx(&self, l: usize, o: usize, i: usize, r: usize) -> usize {
        ((l * 2 + o) * 2 + i) * self.right + r
    }

    pub fn get(&self, l: usize, o: usize, i: usize, r: usize) -> Complex64 {
        self.data[self.idx(l, o, i, r)]
    }

    /// `Σ_o T[l, o, o, r]`.
    fn transfer(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.left, self.right, |l, r| self.get(l, 0, 0, r) + self.get(l, 1, 1, r))
    }
}

/// Which side of the operator a gate multiplies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// `M ← G·M`
    Left,
    /// `M ← M·G`
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    /// Singular values below `tol·s_max` are dropped.
    pub tol: f64,
    pub max_bond: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Self { tol: 1e-10, max_bond: 64 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MPOperator {
    tensors: Vec<SiteTensor>,
    /// Accumulated discarded weight `Σ s²_dropped / Σ s²` over all splits.
    pub truncation_error: f64,
    /// Orthogonality centre: tensors to its left are left isometries and
    /// those to its right right isometries. `None` until first needed.
    center: Option<usize>,
}

impl MPOperator {
    pub fn identity(sites: usize) -> Self {
        let mut t = SiteTensor::zeros(1, 1);
        let (k0, k1) = (t.idx(0, 0, 0, 0), t.idx(0, 1, 1, 0));
        t.data[k0] = Complex64::new(1.0, 0.0);
        t.data[k1] = Complex64::new(1.0, 0.0);
        Self { tensors: vec![t; sites], truncation_error: 0.0, center: None }
    }

    pub fn sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn site_tensors(&self) -> &[SiteTensor] {
        &self.tensors
    }

    /// Bond dimensions including the two trivial boundary bonds.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.tensors[0].left];
        dims.extend(self.tensors.iter().map(|t| t.right));
        dims
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn adjoint(&self) -> Self {
        let tensors = self
            .tensors
            .iter()
            .map(|t| {
                let mut a = SiteTensor::zeros(t.left, t.right);
                for l in 0..t.left {
                    for o in 0..2 {
                        for i in 0..2 {
                            for r in 0..t.right {
                                let k = a.idx(l, o, i, r);
                                a.data[k] = t.get(l, i, o, r).conj();
                            }
                        }
                    }
                }
                a
            })
            .collect();
        Self { tensors, truncation_error: self.truncation_error, center: self.center }
    }

    pub fn trace(&self) -> Complex64 {
        let mut acc = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        for t in &self.tensors {
            acc = acc * t.transfer();
        }
        acc[(0, 0)]
    }

    /// Multiplies a two-site gate on `(site, site + 1)` into the operator and
    /// re-splits the pair by truncated SVD.
    pub fn apply_gate(&mut self, site: usize, g: &Mat4, side: Side, trunc: &Truncation) -> Result<()> {
        if site + 1 >= self.sites() {
            return Err(Error::SiteOutOfRange { site: site + 2, len: self.sites() });
        }
        self.move_center(site);
        let (a, b) = (&self.tensors[site], &self.tensors[site + 1]);
        let (dl, m, dr) = (a.left, a.right, b.right);
        // theta[(l, o1, i1), (o2, i2, r)]
        let am = DMatrix::from_row_slice(dl * 4, m, &a.data);
        let bm = DMatrix::from_row_slice(m, 4 * dr, &b.data);
        let mut theta = am * bm;
        for l in 0..dl {
            for r in 0..dr {
                // block[o1 o2][i1 i2]
                let mut block = Mat4::zeros();
                for o1 in 0..2 {
                    for i1 in 0..2 {
                        for o2 in 0..2 {
                            for i2 in 0..2 {
                                block[(o1 * 2 + o2, i1 * 2 + i2)] = theta[((l * 2 + o1) * 2 + i1, (o2 * 2 + i2) * dr + r)];
                            }
                        }
                    }
                }
                let block = match side {
                    Side::Left => g * block,
                    Side::Right => block * g,
                };
                for o1 in 0..2 {
                    for i1 in 0..2 {
                        for o2 in 0..2 {
                            for i2 in 0..2 {
                                theta[((l * 2 + o1) * 2 + i1, (o2 * 2 + i2) * dr + r)] = block[(o1 * 2 + o2, i1 * 2 + i2)];
                            }
                        }
                    }
                }
            }
        }
        let svd = theta.svd(true, true);
        let u = svd.u.ok_or_else(|| Error::Numerical("SVD did not return U".into()))?;
        let vt = svd.v_t.ok_or_else(|| Error::Numerical("SVD did not return V".into()))?;
        let s = svd.singular_values;
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|&x, &y| s[y].total_cmp(&s[x]));
        let s_max = s[order[0]];
        let keep = order.iter().take_while(|&&k| s[k] > trunc.tol * s_max).count().max(1);
        if keep > trunc.max_bond {
            return Err(Error::BondDimension { tol: trunc.tol, max_bond: trunc.max_bond });
        }
        let total: f64 = s.iter().map(|x| x * x).sum();
        let dropped: f64 = order[keep..].iter().map(|&k| s[k] * s[k]).sum();
        if total > 0.0 {
            self.truncation_error += dropped / total;
        }
        let mut na = SiteTensor::zeros(dl, keep);
        let mut nb = SiteTensor::zeros(keep, dr);
        for row in 0..dl * 4 {
            for (c, &k) in order[..keep].iter().enumerate() {
                na.data[row * keep + c] = u[(row, k)];
            }
        }
        for (c, &k) in order[..keep].iter().enumerate() {
            for col in 0..4 * dr {
                nb.data[c * 4 * dr + col] = vt[(k, col)] * s[k];
            }
        }
        self.tensors[site] = na;
        self.tensors[site + 1] = nb;
        self.center = Some(site + 1);
        Ok(())
    }

    fn move_center(&mut self, to: usize) {
        match self.center {
            None => {
                for c in 0..to {
                    self.shift_right(c);
                }
                for c in (to + 1..self.sites()).rev() {
                    self.shift_left(c);
                }
            }
            Some(mut c) => {
                while c < to {
                    self.shift_right(c);
                    c += 1;
                }
                while c > to {
                    self.shift_left(c);
                    c -= 1;
                }
            }
        }
        self.center = Some(to);
    }

    /// QR of site `c` as a `(left·4) × right` matrix; `R` moves into `c + 1`.
    fn shift_right(&mut self, c: usize) {
        let a = &self.tensors[c];
        let qr = DMatrix::from_row_slice(a.left * 4, a.right, &a.data).qr();
        let (q, r) = (qr.q(), qr.r());
        let k = q.ncols();
        let mut na = SiteTensor::zeros(a.left, k);
        for row in 0..a.left * 4 {
            for col in 0..k {
                na.data[row * k + col] = q[(row, col)];
            }
        }
        let b = &self.tensors[c + 1];
        let bm = r * DMatrix::from_row_slice(b.left, 4 * b.right, &b.data);
        let mut nb = SiteTensor::zeros(k, b.right);
        for row in 0..k {
            for col in 0..4 * b.right {
                nb.data[row * 4 * b.right + col] = bm[(row, col)];
            }
        }
        self.tensors[c] = na;
        self.tensors[c + 1] = nb;
    }

    /// LQ of site `c` as a `left × (4·right)` matrix; `L` moves into `c − 1`.
    fn shift_left(&mut self, c: usize) {
        let b = &self.tensors[c];
        let qr = DMatrix::from_row_slice(b.left, 4 * b.right, &b.data).adjoint().qr();
        let (q, r) = (qr.q().adjoint(), qr.r().adjoint());
        let k = q.nrows();
        let mut nb = SiteTensor::zeros(k, b.right);
        for row in 0..k {
            for col in 0..4 * b.right {
                nb.data[row * 4 * b.right + col] = q[(row, col)];
            }
        }
        let a = &self.tensors[c - 1];
        let am = DMatrix::from_row_slice(a.left * 4, a.right, &a.data) * r;
        let mut na = SiteTensor::zeros(a.left, k);
        for row in 0..a.left * 4 {
            for col in 0..k {
                na.data[row * k + col] = am[(row, col)];
            }
        }
        self.tensors[c - 1] = na;
        self.tensors[c] = nb;
    }

    /// Dense `2^L × 2^L` matrix, site 0 most significant.
    pub fn to_dense(&self) -> Result<DMatrix<Complex64>> {
        let sites = self.sites();
        if sites > MAX_DENSE_MPO_SITES {
            return Err(Error::TooLarge { len: sites, max: MAX_DENSE_MPO_SITES });
        }
        // cur[(out, in, r)] with out/in accumulated over the sites so far
        let mut cur = vec![Complex64::new(1.0, 0.0)];
        let mut dim = 1usize;
        let mut bond = 1usize;
        for t in &self.tensors {
            let nd = dim * 2;
            let mut next = vec![Complex64::new(0.0, 0.0); nd * nd * t.right];
            for oo in 0..dim {
                for ii in 0..dim {
                    for l in 0..bond {
                        let c = cur[(oo * dim + ii) * bond + l];
                        if c == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        for o in 0..2 {
                            for i in 0..2 {
                                let base = ((oo * 2 + o) * nd + ii * 2 + i) * t.right;
                                for r in 0..t.right {
                                    next[base + r] += c * t.get(l, o, i, r);
                                }
                            }
                        }
                    }
                }
            }
            cur = next;
            dim = nd;
            bond = t.right;
        }
        Ok(DMatrix::from_fn(dim, dim, |o, i| cur[o * dim + i]))
    }

    /// For each left site `s` in `bonds`, the 4×4 matrix obtained by tracing
    /// every other site: `Q[(o_s o_{s+1}), (i_s i_{s+1})]`.
    pub fn pair_partial_traces(&self, bonds: &[usize]) -> Vec<Mat4> {
        let n = self.sites();
        let transfers: Vec<DMatrix<Complex64>> = self.tensors.iter().map(SiteTensor::transfer).collect();
        let mut left = vec![DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0))];
        for t in &transfers {
            let next = left.last().expect("non-empty") * t;
            left.push(next);
        }
        let mut right = vec![DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)); n + 1];
        for k in (0..n).rev() {
            right[k] = &transfers[k] * &right[k + 1];
        }
        bonds
            .iter()
            .map(|&s| {
                let (a, b) = (&self.tensors[s], &self.tensors[s + 1]);
                let lv = &left[s];
                let rv = &right[s + 2];
                let mut q = Mat4::zeros();
                for o1 in 0..2 {
                    for i1 in 0..2 {
                        // x[m] = Σ_l L[l] A[l, o1, i1, m]
                        let x: Vec<Complex64> = (0..a.right)
                            .map(|m| (0..a.left).map(|l| lv[(0, l)] * a.get(l, o1, i1, m)).sum())
                            .collect();
                        for o2 in 0..2 {
                            for i2 in 0..2 {
                                let mut acc = Complex64::new(0.0, 0.0);
                                for (m, xm) in x.iter().enumerate() {
                                    for r in 0..b.right {
                                        acc += xm * b.get(m, o2, i2, r) * rv[(r, 0)];
                                    }
                                }
                                q[(o1 * 2 + o2, i1 * 2 + i2)] = acc;
                            }
                        }
                    }
                }
                q
            })
            .collect()
    }
}

/// Settings for building the target propagator as an MPO.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpoOptions {
    pub truncation: Truncation,
    /// Even product-formula order, 2 or higher.
    pub order: usize,
    /// Longest sub-step of the product formula.
    pub max_step: f64,
}

impl Default for MpoOptions {
    fn default() -> Self {
        Self { truncation: Truncation::default(), order: 4, max_step: 0.01 }
    }
}

/// Real symmetric bond Hamiltonian on `(bond, bond + 1)`. Single-site field
/// terms are shared equally by the two bonds touching a site; the end sites
/// belong to one bond only, so the bond terms sum to `H`.
pub fn bond_hamiltonian(spec: &ModelSpec, bond: usize) -> Matrix4<f64> {
    let l = spec.sites;
    let weight = |site: usize| if site == 0 || site == l - 1 { 1.0 } else { 0.5 };
    let (wl, wr) = (weight(bond), weight(bond + 1));
    Matrix4::from_fn(|r, c| {
        let (bl, br) = (r >> 1, r & 1);
        let (cl, cr) = (c >> 1, c & 1);
        let z = |b: usize| if b == 0 { 1.0 } else { -1.0 };
        let mut h = 0.0;
        if r == c {
            h -= z(bl) * z(br) + spec.h_z * (wl * z(bl) + wr * z(br));
        }
        if br == cr && bl != cl {
            h -= spec.h_x * wl;
        }
        if bl == cl && br != cr {
            h -= spec.h_x * wr;
        }
        h
    })
}

/// `exp(−iτ h)` for a real symmetric 4×4 `h`.
pub fn expm_symmetric4(h: &Matrix4<f64>, tau: f64) -> Mat4 {
    let eig = SymmetricEigen::new(*h);
    let v = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
    let phases = Mat4::from_diagonal(&eig.eigenvalues.map(|e| Complex64::from_polar(1.0, -tau * e)));
    v * phases * v.transpose()
}

/// Bond parity layers with durations, in application order, for one
/// product-formula step of length `tau`.
pub(crate) fn product_formula(order: usize, tau: f64) -> Vec<(usize, f64)> {
    fn rec(order: usize, tau: f64, out: &mut Vec<(usize, f64)>) {
        if order <= 2 {
            out.extend([(0, tau / 2.0), (1, tau), (0, tau / 2.0)]);
            return;
        }
        let k = (order - 2) as f64;
        let w1 = 1.0 / (2.0 - 2f64.powf(1.0 / (k + 1.0)));
        let w0 = 1.0 - 2.0 * w1;
        rec(order - 2, w1 * tau, out);
        rec(order - 2, w0 * tau, out);
        rec(order - 2, w1 * tau, out);
    }
    let mut raw = Vec::new();
    rec(order, tau, &mut raw);
    merge_layers(raw)
}

pub(crate) fn merge_layers(raw: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(raw.len());
    for (p, t) in raw {
        match out.last_mut() {
            Some(last) if last.0 == p => last.1 += t,
            _ => out.push((p, t)),
        }
    }
    out
}

/// `e^{−iHt}` as an MPO built from `⌈t/max_step⌉` product-formula steps.
pub fn target_mpo(spec: &ModelSpec, t: f64, opts: &MpoOptions) -> Result<MPOperator> {
    spec.validate()?;
    if !(opts.truncation.tol > 0.0) {
        return Err(Error::InvalidArgument("MPO tolerance must be positive".into()));
    }
    if opts.order < 2 || opts.order % 2 != 0 || !(opts.max_step > 0.0) {
        return Err(Error::InvalidArgument("product formula needs an even order ≥ 2 and a positive step".into()));
    }
    let mut mpo = MPOperator::identity(spec.sites);
    if t == 0.0 {
        return Ok(mpo);
    }
    let steps = (t.abs() / opts.max_step).ceil() as usize;
    let tau = t / steps as f64;
    let one_step = product_formula(opts.order, tau);
    let mut layers = Vec::with_capacity(one_step.len() * steps);
    for _ in 0..steps {
        layers.extend_from_slice(&one_step);
    }
    let bond_h: Vec<Matrix4<f64>> = (0..spec.sites - 1).map(|b| bond_hamiltonian(spec, b)).collect();
    for (parity, dur) in merge_layers(layers) {
        for b in (parity..spec.sites - 1).step_by(2) {
            mpo.apply_gate(b, &expm_symmetric4(&bond_h[b], dur), Side::Left, &opts.truncation)?;
        }
    }
    Ok(mpo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::diagonalize;
    use crate::model::build_hamiltonian;

    fn max_abs(m: &DMatrix<Complex64>) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn bond_terms_sum_to_hamiltonian() {
        let spec = ModelSpec::new(4, 0.7, 1.3).unwrap();
        let h = build_hamiltonian(&spec).unwrap();
        let mut sum = DMatrix::<f64>::zeros(16, 16);
        for b in 0..3 {
            let hb = bond_hamiltonian(&spec, b);
            for row in 0..16 {
                for col in 0..16 {
                    let mask = 0b11 << (2 - b);
                    if row & !mask != col & !mask {
                        continue;
                    }
                    let (lr, lc) = ((row & mask) >> (2 - b), (col & mask) >> (2 - b));
                    sum[(row, col)] += hb[(lr, lc)];
                }
            }
        }
        assert!((sum - h).abs().max() < 1e-14);
    }

    #[test]
    fn zero_time_is_trivial_identity() {
        let spec = ModelSpec::new(5, 1.0, 3.0).unwrap();
        let m = target_mpo(&spec, 0.0, &MpoOptions::default()).unwrap();
        assert_eq!(m.bond_dims(), vec![1; 6]);
        assert_eq!(m.to_dense().unwrap(), DMatrix::identity(32, 32));
        assert_eq!(m.trace(), Complex64::new(32.0, 0.0));
    }

    #[test]
    fn mpo_target_matches_dense_propagator() {
        let spec = ModelSpec::new(6, 1.0, 3.0).unwrap();
        let opts = MpoOptions::default();
        let m = target_mpo(&spec, 0.1, &opts).unwrap();
        let u = m.to_dense().unwrap();
        let exact = diagonalize(&build_hamiltonian(&spec).unwrap()).unwrap().propagator(0.1);
        let err = max_abs(&(&u - exact));
        assert!(err < 1e-8, "err {err:e}");
        let gram = u.adjoint() * &u - DMatrix::identity(64, 64);
        let ge = max_abs(&gram);
        assert!(ge <= 10.0 * opts.truncation.tol, "gram {ge:e} trunc {:e} bonds {:?}", m.truncation_error, m.bond_dims());
        assert_eq!(m.bond_dims()[0], 1);
        assert_eq!(*m.bond_dims().last().unwrap(), 1);
    }

    #[test]
    fn gate_sides_adjoint_and_partial_traces() {
        let g1 = crate::circuit::rzz(0.3) * crate::circuit::kron2(&crate::circuit::rx(0.4), &crate::circuit::rz(0.2));
        let g2 = crate::circuit::kron2(&crate::circuit::rx(1.1), &crate::circuit::rx(-0.3)) * crate::circuit::rzz(0.9);
        let mut m = MPOperator::identity(4);
        let t = Truncation::default();
        m.apply_gate(1, &g1, Side::Left, &t).unwrap();
        m.apply_gate(2, &g2, Side::Right, &t).unwrap();
        m.apply_gate(0, &g2, Side::Left, &t).unwrap();
        let dense = m.to_dense().unwrap();

        let embed = |g: &Mat4, s: usize| {
            let mut c = crate::circuit::Circuit::new(4);
            c.push_layer(vec![crate::circuit::Gate::Dense2q { site: s, matrix: *g }]).unwrap();
            crate::circuit::circuit_to_matrix(&c).unwrap()
        };
        let expect = embed(&g2, 0) * embed(&g1, 1) * embed(&g2, 2);
        assert!(max_abs(&(&dense - &expect)) < 1e-12);
        assert!(max_abs(&(m.adjoint().to_dense().unwrap() - expect.adjoint())) < 1e-12);
        assert!((m.trace() - expect.trace()).norm() < 1e-12);

        for (s, q) in [1usize, 2].iter().zip(m.pair_partial_traces(&[1, 2])) {
            let lo = 4 - 2 - s;
            let mut want = Mat4::zeros();
            for b in 0..4 {
                for c in 0..4 {
                    for r in 0..4usize {
                        let base = ((r >> lo) << (lo + 2)) | (r & ((1 << lo) - 1));
                        want[(b, c)] += expect[(base | (b << lo), base | (c << lo))];
                    }
                }
            }
            assert!((q - want).norm() < 1e-12);
        }
    }

    #[test]
    fn bond_cap_is_enforced() {
        let spec = ModelSpec::new(8, 1.0, 3.0).unwrap();
        let opts = MpoOptions { truncation: Truncation { tol: 1e-14, max_bond: 2 }, ..Default::default() };
        assert!(matches!(target_mpo(&spec, 1.0, &opts), Err(Error::BondDimension { .. })));
        let bad = MpoOptions { truncation: Truncation { tol: 0.0, max_bond: 8 }, ..Default::default() };
        assert!(target_mpo(&spec, 1.0, &bad).is_err());
    }

    #[test]
    fn product_formula_durations_sum_to_step() {
        for order in [2, 4, 6] {
            let layers = product_formula(order, 0.3);
            let a: f64 = layers.iter().filter(|l| l.0 == 0).map(|l| l.1).sum();
            let b: f64 = layers.iter().filter(|l| l.0 == 1).map(|l| l.1).sum();
            assert!((a - 0.3).abs() < 1e-14 && (b - 0.3).abs() < 1e-14);
            assert!(layers.windows(2).all(|w| w[0].0 != w[1].0));
        }
    }
}
