//! Gate-level circuit IR, state-vector simulation and the Trotter circuits.

pub mod gates;
mod random;
mod text;

pub use gates::{
    apply_1q, apply_2q, kron2, rx, rz, rzz, unitarity_error2, unitarity_error4, Mat2, Mat4,
};
pub use random::haar_unitary4;
pub use text::{parse_circuit, write_circuit};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::model::{central_site, kink_state_for, KinkPattern, ModelSpec};
use crate::par;
use crate::rng::stream_rng;
use crate::series::{step_count, SeriesMeta, TimeSeries};
use crate::state::StateVector;

/// Largest register for which [`circuit_to_matrix`] builds a dense unitary.
pub const MAX_MATRIX_SITES: usize = 12;

/// One gate. Sites are 0-based; two-site gates act on `(site, site + 1)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    Rx { site: usize, angle: f64 },
    Rz { site: usize, angle: f64 },
    Rzz { site: usize, angle: f64 },
    Dense2q { site: usize, matrix: Mat4 },
}

impl Gate {
    pub fn first_site(&self) -> usize {
        match *self {
            Gate::Rx { site, .. } | Gate::Rz { site, .. } | Gate::Rzz { site, .. } | Gate::Dense2q { site, .. } => site,
        }
    }

    pub fn is_two_site(&self) -> bool {
        matches!(self, Gate::Rzz { .. } | Gate::Dense2q { .. })
    }

    /// Occupied 0-based sites.
    pub fn sites(&self) -> impl Iterator<Item = usize> {
        let s = self.first_site();
        s..s + if self.is_two_site() { 2 } else { 1 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Gate::Rx { .. } => "RX",
            Gate::Rz { .. } => "RZ",
            Gate::Rzz { .. } => "RZZ",
            Gate::Dense2q { .. } => "DENSE2Q",
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Rx { angle, .. } | Gate::Rz { angle, .. } | Gate::Rzz { angle, .. } => Some(angle),
            Gate::Dense2q { .. } => None,
        }
    }

    /// Two-site matrix of a two-site gate.
    pub fn matrix4(&self) -> Option<Mat4> {
        match self {
            Gate::Rzz { angle, .. } => Some(rzz(*angle)),
            Gate::Dense2q { matrix, .. } => Some(*matrix),
            _ => None,
        }
    }

    pub fn matrix2(&self) -> Option<Mat2> {
        match *self {
            Gate::Rx { angle, .. } => Some(rx(angle)),
            Gate::Rz { angle, .. } => Some(rz(angle)),
            _ => None,
        }
    }

    /// Applies the gate in place to an amplitude slice of a `sites`-wide register.
    pub fn apply(&self, amps: &mut [Complex64], sites: usize) {
        match self {
            Gate::Rx { site, angle } => gates::apply_1q(amps, sites, *site, &rx(*angle)),
            Gate::Rz { site, angle } => {
                let p0 = Complex64::from_polar(1.0, -angle / 2.0);
                gates::apply_1q_diag(amps, sites, *site, p0, p0.conj())
            }
            Gate::Rzz { site, angle } => gates::apply_zz_phase(amps, sites, *site, *angle),
            Gate::Dense2q { site, matrix } => gates::apply_2q(amps, sites, *site, matrix),
        }
    }

    fn check(&self, sites: usize) -> Result<()> {
        let last = self.sites().last().expect("gates occupy at least one site");
        if last >= sites {
            return Err(Error::SiteOutOfRange { site: last + 1, len: sites });
        }
        if let Gate::Dense2q { matrix, .. } = self {
            let err = unitarity_error4(matrix);
            if err > 1e-10 {
                return Err(Error::NotUnitary(err));
            }
        }
        Ok(())
    }
}

/// Ordered layers of gates; gates within one layer act on disjoint sites.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    sites: usize,
    layers: Vec<Vec<Gate>>,
}

impl Circuit {
    pub fn new(sites: usize) -> Self {
        Self { sites, layers: Vec::new() }
    }

    pub fn from_layers(sites: usize, layers: Vec<Vec<Gate>>) -> Result<Self> {
        let mut c = Self::new(sites);
        for layer in layers {
            c.push_layer(layer)?;
        }
        Ok(c)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn layers(&self) -> &[Vec<Gate>] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn gate_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn gates(&self) -> impl Iterator<Item = &Gate> {
        self.layers.iter().flatten()
    }

    /// Appends a layer after checking ranges and site disjointness.
    pub fn push_layer(&mut self, layer: Vec<Gate>) -> Result<()> {
        let mut used = vec![false; self.sites];
        for g in &layer {
            g.check(self.sites)?;
            for s in g.sites() {
                if std::mem::replace(&mut used[s], true) {
                    return Err(Error::InvalidCircuit(format!(
                        "site {} used twice in layer {}",
                        s + 1,
                        self.layers.len() + 1
                    )));
                }
            }
        }
        self.layers.push(layer);
        Ok(())
    }

    /// Concatenation: `other` is applied after `self`.
    pub fn then(mut self, other: &Circuit) -> Result<Circuit> {
        if other.sites != self.sites {
            return Err(Error::DimensionMismatch { expected: self.sites, actual: other.sites });
        }
        self.layers.extend(other.layers.iter().cloned());
        Ok(self)
    }

    /// `reps` back-to-back copies.
    pub fn repeat(&self, reps: usize) -> Circuit {
        let mut layers = Vec::with_capacity(self.layers.len() * reps);
        for _ in 0..reps {
            layers.extend(self.layers.iter().cloned());
        }
        Circuit { sites: self.sites, layers }
    }

    /// Same structure with every gate rewritten by `f`.
    pub fn map_gates(&self, mut f: impl FnMut(&Gate) -> Gate) -> Circuit {
        Circuit {
            sites: self.sites,
            layers: self.layers.iter().map(|l| l.iter().map(&mut f).collect()).collect(),
        }
    }
}

/// Applies layers in order; the result is independent of gate order
/// within a layer.
pub fn apply_circuit(psi: &StateVector, c: &Circuit) -> Result<StateVector> {
    let mut out = psi.clone();
    apply_circuit_in_place(&mut out, c)?;
    Ok(out)
}

pub fn apply_circuit_in_place(psi: &mut StateVector, c: &Circuit) -> Result<()> {
    if psi.sites() != c.sites {
        return Err(Error::DimensionMismatch { expected: c.sites, actual: psi.sites() });
    }
    let sites = c.sites;
    let amps = psi.amplitudes_mut();
    for g in c.gates() {
        g.apply(amps, sites);
    }
    Ok(())
}

/// Dense unitary of the circuit, the ordered product of gate embeddings.
pub fn circuit_to_matrix(c: &Circuit) -> Result<DMatrix<Complex64>> {
    if c.sites > MAX_MATRIX_SITES {
        return Err(Error::TooLarge { len: c.sites, max: MAX_MATRIX_SITES });
    }
    let dim = 1usize << c.sites;
    let mut m = DMatrix::<Complex64>::identity(dim, dim);
    for g in c.gates() {
        left_multiply_gate(&mut m, g, c.sites);
    }
    Ok(m)
}

/// `M ← G·M` for a gate embedded in a `sites`-wide register.
pub fn left_multiply_gate(m: &mut DMatrix<Complex64>, g: &Gate, sites: usize) {
    for j in 0..m.ncols() {
        let mut col = m.column_mut(j);
        g.apply(col.as_mut_slice(), sites);
    }
}

/// First-order Trotter step: even-bond `RZZ`, odd-bond `RZZ`, all-site `RX`,
/// all-site `RZ`, in application order. Bond parity refers to the 1-based
/// left site.
pub fn trotter_first_order(spec: &ModelSpec, dt: f64) -> Result<Circuit> {
    spec.validate()?;
    let l = spec.sites;
    let zz = -2.0 * dt;
    let mut c = Circuit::new(l);
    c.push_layer(bond_layer(l, 1, zz))?;
    c.push_layer(bond_layer(l, 0, zz))?;
    c.push_layer((0..l).map(|site| Gate::Rx { site, angle: -2.0 * spec.h_x * dt }).collect())?;
    c.push_layer((0..l).map(|site| Gate::Rz { site, angle: -2.0 * spec.h_z * dt }).collect())?;
    Ok(c)
}

/// Symmetric second-order step: half-step `RZ`, `RX`, the full interaction,
/// then half-step `RX`, `RZ`.
pub fn trotter_second_order(spec: &ModelSpec, dt: f64) -> Result<Circuit> {
    spec.validate()?;
    let l = spec.sites;
    let zz = -2.0 * dt;
    let rz_half: Vec<Gate> = (0..l).map(|site| Gate::Rz { site, angle: -spec.h_z * dt }).collect();
    let rx_half: Vec<Gate> = (0..l).map(|site| Gate::Rx { site, angle: -spec.h_x * dt }).collect();
    let mut c = Circuit::new(l);
    c.push_layer(rz_half.clone())?;
    c.push_layer(rx_half.clone())?;
    c.push_layer(bond_layer(l, 1, zz))?;
    c.push_layer(bond_layer(l, 0, zz))?;
    c.push_layer(rx_half)?;
    c.push_layer(rz_half)?;
    Ok(c)
}

/// `RZZ` on every bond whose 0-based left site has the given parity.
fn bond_layer(sites: usize, parity: usize, angle: f64) -> Vec<Gate> {
    (parity..sites - 1).step_by(2).map(|site| Gate::Rzz { site, angle }).collect()
}

/// ⟨σᶻ⟩ at a 1-based site.
pub fn expectation_z(psi: &StateVector, site: usize) -> Result<f64> {
    if site == 0 || site > psi.sites() {
        return Err(Error::SiteOutOfRange { site, len: psi.sites() });
    }
    psi.z_expectation(site - 1)
}

/// Shot estimate of ⟨σᶻ⟩ at a 1-based site: `shots` Bernoulli outcomes with
/// `p(up) = (1 + ⟨σᶻ⟩)/2`, returned as `2·ups/shots − 1`.
pub fn sample_expectation_z(psi: &StateVector, site: usize, shots: u64, seed: u64) -> Result<f64> {
    let z = expectation_z(psi, site)?;
    sample_from_expectation(z, shots, seed, 0)
}

/// Binomial shot sampling of a known expectation on stream `stream`.
pub fn sample_from_expectation(z: f64, shots: u64, seed: u64, stream: u64) -> Result<f64> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be at least 1".into()));
    }
    let p = ((1.0 + z) / 2.0).clamp(0.0, 1.0);
    let mut rng = stream_rng(seed, stream);
    let ups = Binomial::new(shots, p)
        .map_err(|e| Error::Numerical(format!("binomial: {e}")))?
        .sample(&mut rng);
    Ok(2.0 * ups as f64 / shots as f64 - 1.0)
}

/// Shot-noise settings for circuit backends.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Shots {
    pub shots: u64,
    pub seed: u64,
}

/// `⟨σᶻ_cen⟩` after `k` first-order steps, for `k = 0..=t_max/dt`. Every time
/// point rebuilds its circuit from the initial state.
pub fn run_trotter_series(
    spec: &ModelSpec,
    pattern: &KinkPattern,
    dt: f64,
    t_max: f64,
    shots: Option<Shots>,
) -> Result<TimeSeries> {
    let n = step_count(dt, t_max)?;
    let psi0 = kink_state_for(spec, pattern)?;
    let step = trotter_first_order(spec, dt)?;
    let site = central_site(spec.sites);
    let values = par::try_map_range(n + 1, |k| {
        let mut psi = psi0.clone();
        for _ in 0..k {
            apply_circuit_in_place(&mut psi, &step)?;
        }
        let z = expectation_z(&psi, site)?;
        match shots {
            Some(s) => sample_from_expectation(z, s.shots, s.seed, k as u64),
            None => Ok(z),
        }
    })?;
    let mut meta = SeriesMeta::new("trotter");
    meta.model = Some(*spec);
    meta.pattern = Some(pattern.to_string());
    meta.site = site;
    meta.shots = shots.map(|s| s.shots);
    meta.seed = shots.map(|s| s.seed);
    Ok(TimeSeries::new(dt, values, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn empty_circuit_is_identity() {
        let psi = StateVector::basis(3, 5).unwrap();
        let out = apply_circuit(&psi, &Circuit::new(3)).unwrap();
        assert_eq!(out, psi);
        let m = circuit_to_matrix(&Circuit::new(2)).unwrap();
        assert_eq!(m, DMatrix::identity(4, 4));
    }

    #[test]
    fn rx_pi_flips_with_phase_minus_i() {
        let psi = StateVector::basis(1, 0).unwrap();
        let c = Circuit::from_layers(1, vec![vec![Gate::Rx { site: 0, angle: PI }]]).unwrap();
        let out = apply_circuit(&psi, &c).unwrap();
        assert!(out.amplitudes()[0].norm() < 1e-15);
        assert!((out.amplitudes()[1] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn single_rz_matrix() {
        let theta = 0.4;
        let c = Circuit::from_layers(1, vec![vec![Gate::Rz { site: 0, angle: theta }]]).unwrap();
        let m = circuit_to_matrix(&c).unwrap();
        assert!((m[(0, 0)] - Complex64::from_polar(1.0, -theta / 2.0)).norm() < 1e-15);
        assert!((m[(1, 1)] - Complex64::from_polar(1.0, theta / 2.0)).norm() < 1e-15);
        assert_eq!(m[(0, 1)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn layer_collisions_and_ranges_are_rejected() {
        let mut c = Circuit::new(3);
        let clash = vec![Gate::Rzz { site: 0, angle: 0.1 }, Gate::Rx { site: 1, angle: 0.1 }];
        assert!(matches!(c.push_layer(clash), Err(Error::InvalidCircuit(_))));
        assert!(matches!(c.push_layer(vec![Gate::Rzz { site: 2, angle: 0.1 }]), Err(Error::SiteOutOfRange { .. })));
        let psi = StateVector::basis(2, 0).unwrap();
        assert!(apply_circuit(&psi, &c).is_err());
        assert!(circuit_to_matrix(&Circuit::new(13)).is_err());
    }

    #[test]
    fn non_unitary_dense_gate_is_rejected() {
        let mut c = Circuit::new(2);
        let m = Mat4::from_element(Complex64::new(0.5, 0.0));
        assert!(matches!(c.push_layer(vec![Gate::Dense2q { site: 0, matrix: m }]), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn first_order_step_structure() {
        let spec = ModelSpec::new(2, 1.0, 3.0).unwrap();
        let c = trotter_first_order(&spec, 0.1).unwrap();
        assert_eq!(c.depth(), 4);
        let names: Vec<_> = c.gates().map(Gate::name).collect();
        assert_eq!(names, ["RZZ", "RX", "RX", "RZ", "RZ"]);

        let zero = trotter_first_order(&ModelSpec::new(4, 1.0, 3.0).unwrap(), 0.0).unwrap();
        let m = circuit_to_matrix(&zero).unwrap();
        assert!((m - DMatrix::identity(16, 16)).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn expectation_errors_and_values() {
        let psi = crate::model::kink_state(&"UUDDDDUU".parse().unwrap()).unwrap();
        assert_eq!(expectation_z(&psi, 4).unwrap(), -1.0);
        assert!(expectation_z(&psi, 0).is_err());
        assert!(expectation_z(&psi, 9).is_err());

        let amp = Complex64::new(0.25, 0.0);
        let uniform = StateVector::from_amplitudes(4, vec![amp; 16]).unwrap();
        for s in 1..=4 {
            assert!(expectation_z(&uniform, s).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let psi = crate::model::kink_state(&"UUDDDDUU".parse().unwrap()).unwrap();
        assert_eq!(sample_expectation_z(&psi, 4, 17, 3).unwrap(), -1.0);
        let amp = Complex64::new(0.25, 0.0);
        let uniform = StateVector::from_amplitudes(4, vec![amp; 16]).unwrap();
        let a = sample_expectation_z(&uniform, 2, 8192, 11).unwrap();
        let b = sample_expectation_z(&uniform, 2, 8192, 11).unwrap();
        assert_eq!(a, b);
        assert!(sample_expectation_z(&uniform, 2, 0, 11).is_err());
    }

    #[test]
    fn trotter_series_edge_cases() {
        let spec = ModelSpec::new(6, 1.0, 3.0).unwrap();
        let p: KinkPattern = "UDDDUU".parse().unwrap();
        let s = run_trotter_series(&spec, &p, 0.1, 0.0, None).unwrap();
        assert_eq!(s.values, vec![-1.0]);

        let frozen = ModelSpec::new(6, 0.0, 2.5).unwrap();
        let s = run_trotter_series(&frozen, &p, 0.1, 2.0, None).unwrap();
        assert!(s.values.iter().all(|v| (v - s.values[0]).abs() < 1e-14));
    }
}
