//! Exact-diagonalization evolution, the reference every circuit backend is
//! checked against.

use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{build_hamiltonian, central_site, kink_state_for, KinkPattern, ModelSpec};
use crate::par;
use crate::series::{step_count, SeriesMeta, TimeSeries};
use crate::state::StateVector;

/// Eigen-decomposition `H = V diag(λ) Vᵀ` of a real symmetric Hamiltonian.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    /// Ascending.
    pub eigenvalues: DVector<f64>,
    /// Orthonormal eigenvectors as columns, in eigenvalue order.
    pub eigenvectors: DMatrix<f64>,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V diag(λ) Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let v = &self.eigenvectors;
        let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * self.eigenvalues[j]);
        scaled * v.transpose()
    }

    /// Dense `e^{−iHt}`.
    pub fn propagator(&self, t: f64) -> DMatrix<Complex64> {
        let v = &self.eigenvectors;
        let n = self.dim();
        let phased = DMatrix::from_fn(n, n, |i, j| {
            let phase = Complex64::from_polar(1.0, -self.eigenvalues[j] * t);
            phase * v[(i, j)]
        });
        let vt = v.transpose().map(|x| Complex64::new(x, 0.0));
        phased * vt
    }

    /// Energy expectation ⟨ψ|H|ψ⟩ evaluated in the eigenbasis.
    pub fn energy(&self, psi: &StateVector) -> Result<f64> {
        let c = self.coefficients(psi)?;
        Ok(c.iter().zip(self.eigenvalues.iter()).map(|(c, l)| c.norm_sqr() * l).sum())
    }

    /// Eigenbasis coefficients `Vᵀ ψ`.
    fn coefficients(&self, psi: &StateVector) -> Result<Vec<Complex64>> {
        if psi.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: psi.dim() });
        }
        let (re, im) = split(psi.amplitudes());
        let cr = self.eigenvectors.tr_mul(&re);
        let ci = self.eigenvectors.tr_mul(&im);
        Ok(cr.iter().zip(ci.iter()).map(|(r, i)| Complex64::new(*r, *i)).collect())
    }

    fn synthesize(&self, sites: usize, coeffs: &[Complex64]) -> StateVector {
        let re = DVector::from_iterator(coeffs.len(), coeffs.iter().map(|c| c.re));
        let im = DVector::from_iterator(coeffs.len(), coeffs.iter().map(|c| c.im));
        let pr = &self.eigenvectors * re;
        let pi = &self.eigenvectors * im;
        let amps = pr.iter().zip(pi.iter()).map(|(r, i)| Complex64::new(*r, *i)).collect();
        StateVector::from_amplitudes(sites, amps).expect("dimension checked by caller")
    }
}

fn split(a: &[Complex64]) -> (DVector<f64>, DVector<f64>) {
    (
        DVector::from_iterator(a.len(), a.iter().map(|c| c.re)),
        DVector::from_iterator(a.len(), a.iter().map(|c| c.im)),
    )
}

/// Largest absolute asymmetry `max|H − Hᵀ|`.
pub fn asymmetry(h: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..h.ncols() {
        for i in 0..j {
            worst = worst.max((h[(i, j)] - h[(j, i)]).abs());
        }
    }
    worst
}

pub fn diagonalize(h: &DMatrix<f64>) -> Result<EigenSystem> {
    if h.nrows() != h.ncols() {
        return Err(Error::DimensionMismatch { expected: h.nrows(), actual: h.ncols() });
    }
    let asym = asymmetry(h);
    if asym > 1e-10 * h.amax().max(1.0) {
        return Err(Error::NotHermitian(asym));
    }
    let n = h.nrows();
    let m = Mat::<f64>::from_fn(n, n, |i, j| h[(i, j)]);
    let eig = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| s[k]));
    let eigenvectors = DMatrix::from_fn(n, n, |i, j| u[(i, order[j])]);
    Ok(EigenSystem { eigenvalues, eigenvectors })
}

/// `V e^{−iλt} Vᵀ ψ₀`.
pub fn evolve_exact(psi0: &StateVector, eig: &EigenSystem, t: f64) -> Result<StateVector> {
    let mut c = eig.coefficients(psi0)?;
    for (ck, lambda) in c.iter_mut().zip(eig.eigenvalues.iter()) {
        *ck *= Complex64::from_polar(1.0, -lambda * t);
    }
    Ok(eig.synthesize(psi0.sites(), &c))
}

/// ⟨σᶻ⟩ computed as a complex inner product; the imaginary residue is
/// checked rather than dropped.
pub(crate) fn checked_z(psi: &StateVector, site0: usize) -> Result<f64> {
    let sites = psi.sites();
    if site0 >= sites {
        return Err(Error::SiteOutOfRange { site: site0 + 1, len: sites });
    }
    let bit = sites - 1 - site0;
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, a) in psi.amplitudes().iter().enumerate() {
        let z = if (i >> bit) & 1 == 0 { 1.0 } else { -1.0 };
        acc += a.conj() * (a * z);
    }
    if acc.im.abs() > 1e-10 {
        return Err(Error::Numerical(format!("expectation has imaginary part {:.3e}", acc.im)));
    }
    Ok(acc.re)
}

/// ⟨σᶻ_cen(k·dt)⟩ for `k = 0..=t_max/dt` by exact evolution.
pub fn run_exact_series(spec: &ModelSpec, pattern: &KinkPattern, dt: f64, t_max: f64) -> Result<TimeSeries> {
    let n = step_count(dt, t_max)?;
    let psi0 = kink_state_for(spec, pattern)?;
    let eig = diagonalize(&build_hamiltonian(spec)?)?;
    exact_series_from(&eig, spec, pattern, &psi0, dt, n)
}

/// Series evaluation with a precomputed eigensystem. Each time point is
/// independent, so the evaluation is parallel across `k`.
pub fn exact_series_from(
    eig: &EigenSystem,
    spec: &ModelSpec,
    pattern: &KinkPattern,
    psi0: &StateVector,
    dt: f64,
    steps: usize,
) -> Result<TimeSeries> {
    let site = central_site(spec.sites);
    let c0 = eig.coefficients(psi0)?;
    let values = par::try_map_range(steps + 1, |k| {
        let t = k as f64 * dt;
        let c: Vec<Complex64> = c0
            .iter()
            .zip(eig.eigenvalues.iter())
            .map(|(c, l)| c * Complex64::from_polar(1.0, -l * t))
            .collect();
        let psi = eig.synthesize(spec.sites, &c);
        checked_z(&psi, site - 1)
    })?;
    let mut values = values;
    // Product-state inputs: the t = 0 sample is exactly ±1.
    values[0] = checked_z(psi0, site - 1)?;
    let mut meta = SeriesMeta::new("exact");
    meta.model = Some(*spec);
    meta.pattern = Some(pattern.to_string());
    meta.site = site;
    Ok(TimeSeries::new(dt, values, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_z_eigenvalues_sorted() {
        let z = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let e = diagonalize(&z).unwrap();
        assert_eq!(e.eigenvalues.as_slice(), &[-1.0, 1.0]);
    }

    #[test]
    fn rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(diagonalize(&m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn evolve_identity_at_zero_time() {
        let spec = ModelSpec::new(4, 1.0, 0.5).unwrap();
        let eig = diagonalize(&build_hamiltonian(&spec).unwrap()).unwrap();
        let psi = kink_state_for(&spec, &"UDDU".parse().unwrap()).unwrap();
        let out = evolve_exact(&psi, &eig, 0.0).unwrap();
        assert!(out.distance(&psi).unwrap() < 1e-14);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let spec = ModelSpec::new(3, 1.0, 0.5).unwrap();
        let eig = diagonalize(&build_hamiltonian(&spec).unwrap()).unwrap();
        let psi = StateVector::basis(2, 0).unwrap();
        assert!(matches!(evolve_exact(&psi, &eig, 1.0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn zero_field_series_is_constant() {
        let spec = ModelSpec::new(6, 0.0, 0.0).unwrap();
        let s = run_exact_series(&spec, &"UDDDUU".parse().unwrap(), 0.1, 2.0).unwrap();
        assert!(s.values.iter().all(|v| (v + 1.0).abs() < 1e-12));
    }
}
