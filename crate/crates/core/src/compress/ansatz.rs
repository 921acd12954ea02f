use nalgebra::DMatrix;
use num_complex::Complex64;

use super::mpo::{bond_hamiltonian, expm_symmetric4, merge_layers};
use crate::circuit::{self, unitarity_error4, Circuit, Gate, Mat4};
use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// Left sites of the bonds covered by layer `layer` of a `sites`-wide
/// brickwall. Even layers start on bond 0, odd layers on bond 1.
pub fn layer_bonds(sites: usize, layer: usize) -> impl Iterator<Item = usize> + Clone {
    (layer % 2..sites.saturating_sub(1)).step_by(2)
}

/// Fixed-depth brickwall of dense two-site unitaries. Layer 0 acts first.
#[derive(Clone, Debug, PartialEq)]
pub struct BrickwallAnsatz {
    sites: usize,
    layers: Vec<Vec<Mat4>>,
}

impl BrickwallAnsatz {
    pub fn identity(sites: usize, n_layers: usize) -> Result<Self> {
        if sites < 2 {
            return Err(Error::InvalidArgument("a brickwall needs at least two sites".into()));
        }
        let layers = (0..n_layers).map(|l| vec![Mat4::identity(); layer_bonds(sites, l).count()]).collect();
        Ok(Self { sites, layers })
    }

    /// Validates gate counts per layer and unitarity (to 1e-12).
    pub fn from_layers(sites: usize, layers: Vec<Vec<Mat4>>) -> Result<Self> {
        if sites < 2 {
            return Err(Error::InvalidArgument("a brickwall needs at least two sites".into()));
        }
        for (l, layer) in layers.iter().enumerate() {
            let want = layer_bonds(sites, l).count();
            if layer.len() != want {
                return Err(Error::InvalidCircuit(format!(
                    "layer {} has {} gates, expected {want}",
                    l + 1,
                    layer.len()
                )));
            }
            for g in layer {
                let err = unitarity_error4(g);
                if err > 1e-12 {
                    return Err(Error::NotUnitary(err));
                }
            }
        }
        Ok(Self { sites, layers })
    }

    /// Reads back a circuit written by [`BrickwallAnsatz::to_circuit`].
    pub fn from_circuit(c: &Circuit) -> Result<Self> {
        let mut layers = Vec::with_capacity(c.depth());
        for (l, layer) in c.layers().iter().enumerate() {
            let bonds: Vec<usize> = layer_bonds(c.sites(), l).collect();
            let mut gates = Vec::with_capacity(bonds.len());
            for (g, &b) in layer.iter().zip(&bonds) {
                match g {
                    Gate::Dense2q { site, matrix } if *site == b => gates.push(*matrix),
                    Gate::Rzz { site, angle } if *site == b => gates.push(circuit::rzz(*angle)),
                    _ => return Err(Error::InvalidCircuit(format!("layer {} is not a brickwall layer", l + 1))),
                }
            }
            if layer.len() != bonds.len() {
                return Err(Error::InvalidCircuit(format!("layer {} is not a brickwall layer", l + 1)));
            }
            layers.push(gates);
        }
        Self::from_layers(c.sites(), layers)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn num_gates(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn layers(&self) -> &[Vec<Mat4>] {
        &self.layers
    }

    pub fn gate(&self, layer: usize, index: usize) -> Result<&Mat4> {
        self.layers
            .get(layer)
            .and_then(|l| l.get(index))
            .ok_or_else(|| Error::InvalidArgument(format!("no gate {index} in layer {layer}")))
    }

    pub fn set_gate(&mut self, layer: usize, index: usize, g: Mat4) -> Result<()> {
        let slot = self
            .layers
            .get_mut(layer)
            .and_then(|l| l.get_mut(index))
            .ok_or_else(|| Error::InvalidArgument(format!("no gate {index} in layer {layer}")))?;
        *slot = g;
        Ok(())
    }

    /// `(left site, gate)` pairs of one layer.
    pub fn layer_gates(&self, layer: usize) -> impl Iterator<Item = (usize, &Mat4)> {
        layer_bonds(self.sites, layer).zip(&self.layers[layer])
    }

    /// Appends identity layers up to `n_layers`.
    pub fn padded(&self, n_layers: usize) -> Self {
        let mut out = self.clone();
        for l in self.n_layers()..n_layers {
            out.layers.push(vec![Mat4::identity(); layer_bonds(self.sites, l).count()]);
        }
        out
    }

    pub fn max_unitarity_error(&self) -> f64 {
        self.layers.iter().flatten().map(unitarity_error4).fold(0.0, f64::max)
    }

    pub fn to_circuit(&self) -> Circuit {
        let layers = (0..self.n_layers())
            .map(|l| self.layer_gates(l).map(|(site, g)| Gate::Dense2q { site, matrix: *g }).collect())
            .collect();
        Circuit::from_layers(self.sites, layers).expect("brickwall layers are disjoint and in range")
    }

    /// Dense unitary `Λ_{n−1} ⋯ Λ_0`.
    pub fn to_matrix(&self) -> Result<DMatrix<Complex64>> {
        circuit::circuit_to_matrix(&self.to_circuit())
    }
}

/// Second-order product formula for `e^{−iHt}` laid out as a brickwall.
///
/// Single-site fields are split between neighbouring bonds so each bond
/// factor is one dense gate. With `2n + 1` layers the gates form `n`
/// symmetric steps of length `t/n` with the adjacent half steps merged;
/// one layer is a single even-bond factor, two layers a first-order step, and
/// an even depth of four or more is the odd depth below it plus an identity
/// layer.
pub fn trotter_init(spec: &ModelSpec, t: f64, n_layers: usize) -> Result<BrickwallAnsatz> {
    spec.validate()?;
    if n_layers == 0 {
        return Err(Error::InvalidArgument("ansatz needs at least one layer".into()));
    }
    let strang_layers = if n_layers >= 3 && n_layers % 2 == 0 { n_layers - 1 } else { n_layers };
    let schedule: Vec<(usize, f64)> = match strang_layers {
        1 => vec![(0, t)],
        2 => vec![(0, t), (1, t)],
        odd => {
            let steps = (odd - 1) / 2;
            let tau = t / steps as f64;
            let raw = (0..steps).flat_map(|_| [(0, tau / 2.0), (1, tau), (0, tau / 2.0)]).collect();
            merge_layers(raw)
        }
    };
    debug_assert_eq!(schedule.len(), strang_layers);
    let bond_h: Vec<_> = (0..spec.sites - 1).map(|b| bond_hamiltonian(spec, b)).collect();
    let mut layers: Vec<Vec<Mat4>> = schedule
        .iter()
        .enumerate()
        .map(|(l, &(parity, tau))| {
            debug_assert_eq!(parity, l % 2);
            layer_bonds(spec.sites, l).map(|b| expm_symmetric4(&bond_h[b], tau)).collect()
        })
        .collect();
    if strang_layers < n_layers {
        layers.push(vec![Mat4::identity(); layer_bonds(spec.sites, n_layers - 1).count()]);
    }
    BrickwallAnsatz::from_layers(spec.sites, layers)
}
