//! The tilted-field Ising chain
//!
//! ```text
//! H = −( Σᵢ σᶻᵢ σᶻᵢ₊₁ + h_x Σᵢ σˣᵢ + h_z Σᵢ σᶻᵢ )
//! ```
//!
//! on an open chain, together with the kink initial states, the central-site
//! convention and the tabulated E8 mass ratios.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{bit_of, z_sign, StateVector};

/// Largest chain for which dense `2^L × 2^L` matrices are built.
pub const MAX_DENSE_SITES: usize = 14;

/// Chain length and field strengths. Boundaries are always open.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(rename = "L")]
    pub sites: usize,
    pub h_x: f64,
    pub h_z: f64,
}

impl ModelSpec {
    pub fn new(sites: usize, h_x: f64, h_z: f64) -> Result<Self> {
        let spec = Self { sites, h_x, h_z };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites < 2 {
            return Err(Error::InvalidModel(format!("need at least 2 sites, got {}", self.sites)));
        }
        if !self.h_x.is_finite() || !self.h_z.is_finite() {
            return Err(Error::InvalidModel("fields must be finite".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1usize << self.sites
    }

    /// Diagonal (σᶻ-basis) energy of basis state `index`.
    pub fn diagonal_energy(&self, index: usize) -> f64 {
        let l = self.sites;
        let mut zz = 0.0;
        let mut z = 0.0;
        for i in 0..l {
            let zi = z_sign(l, i, index);
            z += zi;
            if i + 1 < l {
                zz += zi * z_sign(l, i + 1, index);
            }
        }
        -(zz + self.h_z * z)
    }
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self { sites: 8, h_x: 1.0, h_z: 3.0 }
    }
}

/// Dense Hamiltonian. The matrix is real symmetric in the σᶻ basis.
pub fn build_hamiltonian(spec: &ModelSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if spec.sites > MAX_DENSE_SITES {
        return Err(Error::TooLarge { len: spec.sites, max: MAX_DENSE_SITES });
    }
    let l = spec.sites;
    let dim = spec.dim();
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for b in 0..dim {
        h[(b, b)] = spec.diagonal_energy(b);
        for i in 0..l {
            let flipped = b ^ (1 << bit_of(l, i));
            h[(flipped, b)] -= spec.h_x;
        }
    }
    Ok(h)
}

/// Only the nearest-neighbour σᶻσᶻ part of the Hamiltonian (without the sign).
pub fn zz_interaction(sites: usize) -> Result<DMatrix<f64>> {
    if !(2..=MAX_DENSE_SITES).contains(&sites) {
        return Err(Error::InvalidModel(format!("sites {sites}")));
    }
    let dim = 1usize << sites;
    Ok(DMatrix::from_fn(dim, dim, |r, c| {
        if r != c {
            return 0.0;
        }
        (0..sites - 1).map(|i| z_sign(sites, i, r) * z_sign(sites, i + 1, r)).sum()
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Spin {
    Up,
    Down,
}

/// A product state written as a string of `U`/`D`, site 1 first.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct KinkPattern {
    spins: Vec<Spin>,
}

impl KinkPattern {
    pub fn new(spins: Vec<Spin>) -> Result<Self> {
        if spins.is_empty() {
            return Err(Error::InvalidPattern("empty pattern".into()));
        }
        Ok(Self { spins })
    }

    /// Up spins everywhere except `down_len` down spins starting at
    /// 1-based site `first_down`.
    pub fn domain(sites: usize, first_down: usize, down_len: usize) -> Result<Self> {
        if first_down == 0 || first_down + down_len > sites + 1 {
            return Err(Error::InvalidPattern(format!(
                "down block {first_down}+{down_len} does not fit in {sites} sites"
            )));
        }
        let spins = (1..=sites)
            .map(|s| if s >= first_down && s < first_down + down_len { Spin::Down } else { Spin::Up })
            .collect();
        Self::new(spins)
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn spins(&self) -> &[Spin] {
        &self.spins
    }

    /// Basis index of the pattern.
    pub fn basis_index(&self) -> usize {
        self.spins
            .iter()
            .fold(0usize, |acc, s| (acc << 1) | usize::from(*s == Spin::Down))
    }

    /// Number of domain walls (adjacent anti-aligned pairs).
    pub fn domain_walls(&self) -> usize {
        self.spins.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

impl FromStr for KinkPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let spins = s
            .trim()
            .chars()
            .enumerate()
            .map(|(i, c)| match c {
                'U' => Ok(Spin::Up),
                'D' => Ok(Spin::Down),
                other => Err(Error::InvalidPattern(format!(
                    "character {other:?} at position {} (expected U or D)",
                    i + 1
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(spins)
    }
}

impl fmt::Display for KinkPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.spins {
            f.write_str(if *s == Spin::Up { "U" } else { "D" })?;
        }
        Ok(())
    }
}

impl Serialize for KinkPattern {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for KinkPattern {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Product state with amplitude one on the pattern's basis state.
pub fn kink_state(pattern: &KinkPattern) -> Result<StateVector> {
    StateVector::basis(pattern.len(), pattern.basis_index())
}

/// Like [`kink_state`] but checks the pattern against a register width.
pub fn kink_state_for(spec: &ModelSpec, pattern: &KinkPattern) -> Result<StateVector> {
    if pattern.len() != spec.sites {
        return Err(Error::DimensionMismatch { expected: spec.sites, actual: pattern.len() });
    }
    kink_state(pattern)
}

/// 1-based measurement site: the middle site for odd `L`, the
/// central-left site for even `L`.
pub fn central_site(sites: usize) -> usize {
    sites.div_ceil(2).max(1)
}

/// The four low-lying E8 combinations carried by the reference table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum E8Label {
    #[serde(rename = "m2-m1")]
    M2MinusM1,
    #[serde(rename = "m1")]
    M1,
    #[serde(rename = "m2")]
    M2,
    #[serde(rename = "m1+m2")]
    M1PlusM2,
}

impl E8Label {
    pub const ALL: [E8Label; 4] = [E8Label::M2MinusM1, E8Label::M1, E8Label::M2, E8Label::M1PlusM2];

    /// Tabulated ratio to m1 (three decimals).
    pub fn ratio(self) -> f64 {
        match self {
            E8Label::M2MinusM1 => 0.618,
            E8Label::M1 => 1.0,
            E8Label::M2 => 1.618,
            E8Label::M1PlusM2 => 2.618,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            E8Label::M2MinusM1 => "m2-m1",
            E8Label::M1 => "m1",
            E8Label::M2 => "m2",
            E8Label::M1PlusM2 => "m1+m2",
        }
    }
}

impl fmt::Display for E8Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct E8Reference {
    pub m1: f64,
    /// `(label, value)` sorted by value.
    pub entries: Vec<(E8Label, f64)>,
}

impl E8Reference {
    pub fn value(&self, label: E8Label) -> f64 {
        self.entries
            .iter()
            .find(|(l, _)| *l == label)
            .map(|(_, v)| *v)
            .unwrap_or(label.ratio() * self.m1)
    }
}

pub fn e8_reference(m1: f64) -> Result<E8Reference> {
    if !(m1 > 0.0) || !m1.is_finite() {
        return Err(Error::InvalidArgument(format!("m1 must be positive, got {m1}")));
    }
    let entries = E8Label::ALL.iter().map(|&l| (l, l.ratio() * m1)).collect();
    Ok(E8Reference { m1, entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_site_pure_ising_is_diagonal() {
        let h = build_hamiltonian(&ModelSpec::new(2, 0.0, 0.0).unwrap()).unwrap();
        let expected = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 1.0, 1.0, -1.0]));
        assert_eq!(h, expected);
    }

    #[test]
    fn hamiltonian_guards() {
        assert!(matches!(ModelSpec::new(1, 1.0, 1.0), Err(Error::InvalidModel(_))));
        let big = ModelSpec { sites: 15, h_x: 1.0, h_z: 0.0 };
        assert!(matches!(build_hamiltonian(&big), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn hamiltonian_is_symmetric() {
        let h = build_hamiltonian(&ModelSpec::new(6, 0.7, -1.3).unwrap()).unwrap();
        let asym = (&h - h.transpose()).amax();
        assert!(asym <= 1e-14 * h.norm());
    }

    #[test]
    fn kink_patterns() {
        let p: KinkPattern = "UU".parse().unwrap();
        let s = kink_state(&p).unwrap();
        assert_eq!(s.amplitudes()[0].re, 1.0);

        let p: KinkPattern = "UUDDDDUU".parse().unwrap();
        let s = kink_state(&p).unwrap();
        assert_eq!(s.support(0.0), 1);
        assert_eq!(s.z_expectation(3).unwrap(), -1.0);
        assert_eq!(p.domain_walls(), 2);

        let p: KinkPattern = "UUDDDDDDDUU".parse().unwrap();
        assert_eq!(kink_state(&p).unwrap().norm(), 1.0);
        assert_eq!(p.to_string(), "UUDDDDDDDUU");

        assert!(matches!("UXD".parse::<KinkPattern>(), Err(Error::InvalidPattern(_))));
        assert!("".parse::<KinkPattern>().is_err());
    }

    #[test]
    fn kink_state_checks_width() {
        let spec = ModelSpec::new(4, 1.0, 1.0).unwrap();
        let p: KinkPattern = "UDU".parse().unwrap();
        assert!(kink_state_for(&spec, &p).is_err());
    }

    #[test]
    fn domain_builder() {
        assert_eq!(KinkPattern::domain(8, 3, 4).unwrap().to_string(), "UUDDDDUU");
        assert!(KinkPattern::domain(8, 6, 4).is_err());
    }

    #[test]
    fn central_sites() {
        assert_eq!(central_site(8), 4);
        assert_eq!(central_site(11), 6);
        assert_eq!(central_site(5), 3);
        assert_eq!(central_site(2), 1);
    }

    #[test]
    fn e8_table() {
        let r = e8_reference(1.0).unwrap();
        let vals: Vec<f64> = r.entries.iter().map(|e| e.1).collect();
        assert_eq!(vals, vec![0.618, 1.0, 1.618, 2.618]);
        assert!(vals.windows(2).all(|w| w[0] < w[1]));

        let r = e8_reference(2.0).unwrap();
        let vals: Vec<f64> = r.entries.iter().map(|e| e.1).collect();
        for (v, e) in vals.iter().zip([1.236, 2.0, 3.236, 5.236]) {
            assert!((v - e).abs() < 1e-12);
        }

        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        let r = e8_reference(1.0).unwrap();
        assert!((r.value(E8Label::M2) / r.m1 - golden).abs() < 5e-4);

        assert!(e8_reference(0.0).is_err());
        assert!(e8_reference(-1.0).is_err());
    }

    #[test]
    fn pattern_serde_round_trip() {
        let p: KinkPattern = "UUDDUU".parse().unwrap();
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, "\"UUDDUU\"");
        let back: KinkPattern = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }
}
