//! Density matrices stored as `2L`-site vectors, so the state-vector kernels
//! apply unchanged: `ρ[i, j]` sits at `j·2^L + i`, the row index occupying
//! sites `L..2L` and the column index sites `0..L`.

use num_complex::Complex64;

use crate::circuit::{gates, Gate};
use crate::error::{Error, Result};
use crate::state::StateVector;

/// Widest register simulated with a density matrix.
pub const MAX_DENSITY_SITES: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    sites: usize,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn from_state(psi: &StateVector) -> Result<Self> {
        let sites = psi.sites();
        if sites > MAX_DENSITY_SITES {
            return Err(Error::TooLarge { len: sites, max: MAX_DENSITY_SITES });
        }
        let a = psi.amplitudes();
        let d = a.len();
        let mut data = vec![Complex64::new(0.0, 0.0); d * d];
        for j in 0..d {
            for i in 0..d {
                data[j * d + i] = a[i] * a[j].conj();
            }
        }
        Ok(Self { sites, data })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        1 << self.sites
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[j * self.dim() + i]
    }

    pub fn trace(&self) -> Complex64 {
        let d = self.dim();
        (0..d).map(|i| self.data[i * d + i]).sum()
    }

    /// `ρ ← G ρ G†`.
    pub fn apply_gate(&mut self, g: &Gate) {
        let (l, wide) = (self.sites, 2 * self.sites);
        let s = g.first_site();
        if let Some(m) = g.matrix2() {
            gates::apply_1q(&mut self.data, wide, l + s, &m);
            gates::apply_1q(&mut self.data, wide, s, &m.map(|z| z.conj()));
        } else {
            let m = g.matrix4().expect("two-site gate");
            gates::apply_2q(&mut self.data, wide, l + s, &m);
            gates::apply_2q(&mut self.data, wide, s, &m.map(|z| z.conj()));
        }
    }

    /// `(1 − p)ρ + (p/3) Σ_{P∈{X,Y,Z}} PρP` on one site, using
    /// `Σ_{P∈{I,X,Y,Z}} PρP = 2·I ⊗ Tr_s ρ`.
    pub fn depolarize_1q(&mut self, site: usize, p: f64) {
        if p == 0.0 {
            return;
        }
        let d = self.dim();
        let row_bit = self.sites - 1 - site;
        let col_bit = row_bit + self.sites;
        let keep = 1.0 - 4.0 * p / 3.0;
        let mix = 2.0 * p / 3.0;
        let (rb, cb) = (1usize << row_bit, 1usize << col_bit);
        for k in 0..d * d {
            if k & (rb | cb) != 0 {
                continue;
            }
            let (a, dd) = (self.data[k], self.data[k | rb | cb]);
            let tr = a + dd;
            self.data[k] = a * keep + tr * mix;
            self.data[k | rb | cb] = dd * keep + tr * mix;
            self.data[k | rb] *= keep;
            self.data[k | cb] *= keep;
        }
    }

    /// `(1 − p)ρ + (p/15) Σ_{P≠II} PρP` on `(site, site + 1)`, using
    /// `Σ_P PρP = 4·I ⊗ Tr_pair ρ` over all sixteen two-site Paulis.
    pub fn depolarize_2q(&mut self, site: usize, p: f64) {
        if p == 0.0 {
            return;
        }
        let d = self.dim();
        let l = self.sites;
        let keep = 1.0 - 16.0 * p / 15.0;
        let mix = 4.0 * p / 15.0;
        let r_hi = 1usize << (l - 1 - site);
        let r_lo = 1usize << (l - 2 - site);
        let (c_hi, c_lo) = (r_hi << l, r_lo << l);
        let pair_mask = r_hi | r_lo | c_hi | c_lo;
        let row_off = |b: usize| (if b & 2 != 0 { r_hi } else { 0 }) | (if b & 1 != 0 { r_lo } else { 0 });
        let col_off = |b: usize| (if b & 2 != 0 { c_hi } else { 0 }) | (if b & 1 != 0 { c_lo } else { 0 });
        for k in 0..d * d {
            if k & pair_mask != 0 {
                continue;
            }
            let tr: Complex64 = (0..4).map(|b| self.data[k | row_off(b) | col_off(b)]).sum();
            for r in 0..4 {
                for c in 0..4 {
                    let idx = k | row_off(r) | col_off(c);
                    self.data[idx] *= keep;
                    if r == c {
                        self.data[idx] += tr * mix;
                    }
                }
            }
        }
    }

    /// `(1 − λ)ρ + λ·I/d`.
    pub fn depolarize_global(&mut self, lambda: f64) {
        if lambda == 0.0 {
            return;
        }
        let d = self.dim();
        let tr = self.trace();
        for z in &mut self.data {
            *z *= 1.0 - lambda;
        }
        for i in 0..d {
            self.data[i * d + i] += tr * (lambda / d as f64);
        }
    }

    /// `Tr(ρ σᶻ)` at a 0-based site.
    pub fn z_expectation(&self, site: usize) -> Result<f64> {
        if site >= self.sites {
            return Err(Error::SiteOutOfRange { site: site + 1, len: self.sites });
        }
        let d = self.dim();
        let bit = self.sites - 1 - site;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..d {
            let z = if (i >> bit) & 1 == 0 { 1.0 } else { -1.0 };
            acc += self.data[i * d + i] * z;
        }
        if acc.im.abs() > 1e-10 {
            return Err(Error::Numerical(format!("expectation has imaginary part {:.3e}", acc.im)));
        }
        Ok(acc.re)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{apply_circuit, haar_unitary4, trotter_first_order, Circuit, Mat2};
    use crate::model::{kink_state, ModelSpec};
    use crate::rng::stream_rng;
    use nalgebra::DMatrix;

    fn dense(rho: &DensityMatrix) -> DMatrix<Complex64> {
        let d = rho.dim();
        DMatrix::from_fn(d, d, |i, j| rho.get(i, j))
    }

    fn embed1(p: &Mat2, sites: usize, site: usize) -> DMatrix<Complex64> {
        let mut out = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        for s in 0..sites {
            let m = if s == site { *p } else { Mat2::identity() };
            let mm = DMatrix::from_fn(2, 2, |i, j| m[(i, j)]);
            out = out.kronecker(&mm);
        }
        out
    }

    fn paulis() -> [Mat2; 4] {
        let c = |r: f64, i: f64| Complex64::new(r, i);
        [
            Mat2::identity(),
            Mat2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)),
            Mat2::new(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)),
            Mat2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)),
        ]
    }

    fn mixed_state(sites: usize, seed: u64) -> DensityMatrix {
        let mut rng = stream_rng(seed, 0);
        let mut c = Circuit::new(sites);
        for l in 0..3 {
            c.push_layer((l % 2..sites - 1).step_by(2).map(|s| Gate::Dense2q { site: s, matrix: haar_unitary4(&mut rng) }).collect()).unwrap();
        }
        let psi = apply_circuit(&StateVector::basis(sites, 1).unwrap(), &c).unwrap();
        let mut rho = DensityMatrix::from_state(&psi).unwrap();
        rho.depolarize_1q(0, 0.3);
        rho
    }

    #[test]
    fn noiseless_matches_state_vector() {
        let spec = ModelSpec::new(5, 1.0, 3.0).unwrap();
        let psi0 = kink_state(&"UDDDU".parse().unwrap()).unwrap();
        let step = trotter_first_order(&spec, 0.2).unwrap();
        let mut rho = DensityMatrix::from_state(&psi0).unwrap();
        let mut psi = psi0.clone();
        for _ in 0..3 {
            for g in step.gates() {
                rho.apply_gate(g);
            }
            psi = apply_circuit(&psi, &step).unwrap();
        }
        let want = DensityMatrix::from_state(&psi).unwrap();
        let diff = rho.data.iter().zip(&want.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12);
        for s in 0..5 {
            assert!((rho.z_expectation(s).unwrap() - psi.z_expectation(s).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn single_site_channel_matches_pauli_sum() {
        let mut rho = mixed_state(3, 4);
        let before = dense(&rho);
        let p = 0.17;
        rho.depolarize_1q(1, p);
        let ps = paulis();
        let mut want = &before * Complex64::new(1.0 - p, 0.0);
        for pm in &ps[1..] {
            let e = embed1(pm, 3, 1);
            want += &e * &before * &e * Complex64::new(p / 3.0, 0.0);
        }
        assert!((dense(&rho) - want).norm() < 1e-13);
    }

    #[test]
    fn two_site_channel_matches_pauli_sum() {
        let mut rho = mixed_state(4, 5);
        let before = dense(&rho);
        let p = 0.08;
        rho.depolarize_2q(2, p);
        let ps = paulis();
        let mut want = &before * Complex64::new(1.0 - p, 0.0);
        for (a, pa) in ps.iter().enumerate() {
            for (b, pb) in ps.iter().enumerate() {
                if a == 0 && b == 0 {
                    continue;
                }
                let e = embed1(pa, 4, 2) * embed1(pb, 4, 3);
                want += &e * &before * &e * Complex64::new(p / 15.0, 0.0);
            }
        }
        assert!((dense(&rho) - want).norm() < 1e-13);
        assert!((rho.trace() - Complex64::new(1.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn global_channel_scales_traceless_part() {
        let mut rho = mixed_state(3, 6);
        let z0 = rho.z_expectation(2).unwrap();
        rho.depolarize_global(0.25);
        assert!((rho.z_expectation(2).unwrap() - 0.75 * z0).abs() < 1e-14);
        assert!((rho.trace() - Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn size_guard() {
        let psi = StateVector::basis(11, 0).unwrap();
        assert!(matches!(DensityMatrix::from_state(&psi), Err(Error::TooLarge { .. })));
    }
}
