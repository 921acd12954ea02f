use nalgebra::DMatrix;
use num_complex::Complex64;

use super::ansatz::{layer_bonds, BrickwallAnsatz};
use super::mpo::{target_mpo, MPOperator, MpoOptions, Side, Truncation};
use crate::circuit::{gates, Mat4};
use crate::error::{Error, Result};
use crate::exact::{diagonalize, EigenSystem};
use crate::model::{build_hamiltonian, ModelSpec, MAX_DENSE_SITES};
use crate::par;

/// Largest width for dense targets.
pub const MAX_DENSE_TARGET_SITES: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetMode {
    Dense,
    Mpo,
}

/// Target unitary in one of two representations.
#[derive(Clone, Debug)]
pub enum Target {
    Dense {
        sites: usize,
        /// Elementwise conjugate of `U`, i.e. `(U†)ᵀ`.
        u_conj: DMatrix<Complex64>,
    },
    Mpo {
        /// `U†`.
        u_adj: MPOperator,
        truncation: Truncation,
    },
}

impl Target {
    pub fn dense(u: &DMatrix<Complex64>) -> Result<Self> {
        let d = u.nrows();
        if u.ncols() != d || !d.is_power_of_two() || d < 4 {
            return Err(Error::InvalidArgument(format!("target must be 2^L × 2^L with L ≥ 2, got {}×{}", d, u.ncols())));
        }
        let sites = d.trailing_zeros() as usize;
        if sites > MAX_DENSE_TARGET_SITES {
            return Err(Error::TooLarge { len: sites, max: MAX_DENSE_TARGET_SITES });
        }
        Ok(Target::Dense { sites, u_conj: u.map(|z| z.conj()) })
    }

    pub fn from_mpo(u: &MPOperator, truncation: Truncation) -> Self {
        Target::Mpo { u_adj: u.adjoint(), truncation }
    }

    pub fn sites(&self) -> usize {
        match self {
            Target::Dense { sites, .. } => *sites,
            Target::Mpo { u_adj, .. } => u_adj.sites(),
        }
    }

    /// Hilbert-space dimension as a float.
    pub fn dim(&self) -> f64 {
        2f64.powi(self.sites() as i32)
    }

    fn check(&self, w: &BrickwallAnsatz) -> Result<()> {
        if w.sites() != self.sites() {
            return Err(Error::DimensionMismatch { expected: self.sites(), actual: w.sites() });
        }
        Ok(())
    }

    /// `Tr(U† W)`.
    pub fn overlap(&self, w: &BrickwallAnsatz) -> Result<Complex64> {
        self.check(w)?;
        match self {
            Target::Dense { .. } => Ok(self.dense_start(w).trace()),
            Target::Mpo { .. } => Ok(self.mpo_start(w)?.trace()),
        }
    }

    /// `Tr(U† W)` and, for every gate `G`, the environment `E` with
    /// `Tr(U† W) = Tr(E† G)`, indexed `[layer][gate]`.
    pub fn overlap_and_environments(&self, w: &BrickwallAnsatz) -> Result<(Complex64, Vec<Vec<Mat4>>)> {
        self.check(w)?;
        let n = w.n_layers();
        let sites = self.sites();
        let mut envs = Vec::with_capacity(n);
        // P_ℓ = Λ_{ℓ−1}⋯Λ_0 U† Λ_{n−1}⋯Λ_ℓ, so Tr(P_ℓ) = Tr(U†W) for all ℓ and
        // the partial trace Q of P_ℓ around a gate G of layer ℓ gives E = G Q†.
        match self {
            Target::Dense { .. } => {
                let mut pt = self.dense_start(w);
                let overlap = pt.trace();
                for l in 0..n {
                    let bonds: Vec<usize> = layer_bonds(sites, l).collect();
                    let qs = par::map_slice(&bonds, |&b| partial_trace_pair(&pt, sites, b).transpose());
                    envs.push(w.layers()[l].iter().zip(&qs).map(|(g, q)| g * q.adjoint()).collect());
                    if l + 1 < n {
                        // Pᵀ ← conj(Λ) Pᵀ Λᵀ
                        let conj: Vec<(usize, Mat4)> = w.layer_gates(l).map(|(s, g)| (s, g.map(|z| z.conj()))).collect();
                        left_apply(&mut pt, sites, &conj);
                        let mut tr = pt.transpose();
                        let plain: Vec<(usize, Mat4)> = w.layer_gates(l).map(|(s, g)| (s, *g)).collect();
                        left_apply(&mut tr, sites, &plain);
                        pt = tr.transpose();
                    }
                }
                Ok((overlap, envs))
            }
            Target::Mpo { truncation, .. } => {
                let mut p = self.mpo_start(w)?;
                let overlap = p.trace();
                for l in 0..n {
                    let bonds: Vec<usize> = layer_bonds(sites, l).collect();
                    let qs = p.pair_partial_traces(&bonds);
                    envs.push(w.layers()[l].iter().zip(&qs).map(|(g, q)| g * q.adjoint()).collect());
                    if l + 1 < n {
                        for (s, g) in w.layer_gates(l) {
                            p.apply_gate(s, g, Side::Left, truncation)?;
                            p.apply_gate(s, &g.adjoint(), Side::Right, truncation)?;
                        }
                    }
                }
                Ok((overlap, envs))
            }
        }
    }

    /// `(U† W)ᵀ = Λ_0ᵀ ⋯ Λ_{n−1}ᵀ conj(U)`.
    fn dense_start(&self, w: &BrickwallAnsatz) -> DMatrix<Complex64> {
        let Target::Dense { sites, u_conj } = self else { unreachable!("dense target") };
        let mut pt = u_conj.clone();
        for l in (0..w.n_layers()).rev() {
            let gates: Vec<(usize, Mat4)> = w.layer_gates(l).map(|(s, g)| (s, g.transpose())).collect();
            left_apply(&mut pt, *sites, &gates);
        }
        pt
    }

    /// `U† Λ_{n−1} ⋯ Λ_0` as an MPO.
    fn mpo_start(&self, w: &BrickwallAnsatz) -> Result<MPOperator> {
        let Target::Mpo { u_adj, truncation } = self else { unreachable!("mpo target") };
        let mut p = u_adj.clone();
        for l in (0..w.n_layers()).rev() {
            for (s, g) in w.layer_gates(l) {
                p.apply_gate(s, g, Side::Right, truncation)?;
            }
        }
        Ok(p)
    }
}

/// `M ← Λ M` for a layer of two-site gates, column by column.
fn left_apply(m: &mut DMatrix<Complex64>, sites: usize, gates: &[(usize, Mat4)]) {
    let d = m.nrows();
    par::for_each_chunk_mut(m.as_mut_slice(), d, |col| {
        for (s, g) in gates {
            gates::apply_2q(col, sites, *s, g);
        }
    });
}

/// `Q[b, c] = Σ_r M[(b r), (c r)]` with `b, c` the two-site index on
/// `(site, site + 1)` and `r` the remaining sites.
pub(crate) fn partial_trace_pair(m: &DMatrix<Complex64>, sites: usize, site: usize) -> Mat4 {
    let lo = sites - 2 - site;
    let low_bits = (1usize << lo) - 1;
    let mut q = Mat4::zeros();
    for r in 0..m.nrows() >> 2 {
        let base = ((r >> lo) << (lo + 2)) | (r & low_bits);
        for b in 0..4 {
            for c in 0..4 {
                q[(b, c)] += m[(base | (b << lo), base | (c << lo))];
            }
        }
    }
    q
}

/// `e^{−iHt}` as a compression target.
pub fn target_operator(spec: &ModelSpec, t: f64, mode: TargetMode, mpo: &MpoOptions) -> Result<Target> {
    match mode {
        TargetMode::Dense => {
            if spec.sites > MAX_DENSE_TARGET_SITES.min(MAX_DENSE_SITES) {
                return Err(Error::TooLarge { len: spec.sites, max: MAX_DENSE_TARGET_SITES });
            }
            let eig = diagonalize(&build_hamiltonian(spec)?)?;
            dense_target_from(&eig, t)
        }
        TargetMode::Mpo => Ok(Target::from_mpo(&target_mpo(spec, t, mpo)?, mpo.truncation)),
    }
}

pub fn dense_target_from(eig: &EigenSystem, t: f64) -> Result<Target> {
    Target::dense(&eig.propagator(t))
}

/// `1 − Re Tr(U† W)/d`.
pub fn cost(target: &Target, w: &BrickwallAnsatz) -> Result<f64> {
    Ok(1.0 - target.overlap(w)?.re / target.dim())
}

/// Environment of gate `index` in layer `layer`.
pub fn gate_environment(target: &Target, w: &BrickwallAnsatz, layer: usize, index: usize) -> Result<Mat4> {
    w.gate(layer, index)?;
    let (_, envs) = target.overlap_and_environments(w)?;
    Ok(envs[layer][index])
}
