//! Complex amplitude vectors over the `2^L` computational basis.
//!
//! Site 1 is the most significant bit of the basis index. Bit 0 is spin up
//! (σᶻ = +1), bit 1 is spin down.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bit position of a 0-based site in a basis index.
#[inline]
pub(crate) fn bit_of(sites: usize, site: usize) -> usize {
    sites - 1 - site
}

/// σᶻ eigenvalue of a 0-based site in basis state `index`.
#[inline]
pub fn z_sign(sites: usize, site: usize, index: usize) -> f64 {
    if (index >> bit_of(sites, site)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    sites: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// The computational basis state `|index⟩`.
    pub fn basis(sites: usize, index: usize) -> Result<Self> {
        if sites == 0 || sites > 30 {
            return Err(Error::InvalidArgument(format!("register width {sites}")));
        }
        let dim = 1usize << sites;
        if index >= dim {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} outside dimension {dim}"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { sites, amps })
    }

    pub fn from_amplitudes(sites: usize, amps: Vec<Complex64>) -> Result<Self> {
        let dim = 1usize << sites;
        if amps.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: amps.len() });
        }
        Ok(Self { sites, amps })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: other.dim() });
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// Euclidean distance ‖self − other‖.
    pub fn distance(&self, other: &StateVector) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: other.dim() });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// Number of amplitudes with modulus above `eps`.
    pub fn support(&self, eps: f64) -> usize {
        self.amps.iter().filter(|a| a.norm() > eps).count()
    }

    /// ⟨σᶻ⟩ at a 0-based site.
    pub fn z_expectation(&self, site: usize) -> Result<f64> {
        if site >= self.sites {
            return Err(Error::SiteOutOfRange { site: site + 1, len: self.sites });
        }
        let bit = bit_of(self.sites, site);
        let mut up = 0.0;
        let mut down = 0.0;
        for (i, a) in self.amps.iter().enumerate() {
            if (i >> bit) & 1 == 0 {
                up += a.norm_sqr();
            } else {
                down += a.norm_sqr();
            }
        }
        Ok(up - down)
    }
}
