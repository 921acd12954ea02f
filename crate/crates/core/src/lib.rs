//! Real-time dynamics and meson spectroscopy of the Ising chain in
//! transverse and longitudinal fields.
//!
//! Three ways to evolve a kink initial state are provided: exact
//! diagonalization ([`exact`]), first-order Trotter circuits ([`circuit`])
//! and Riemannian-optimized fixed-depth brickwall circuits ([`compress`]).
//! [`noise`] adds synthetic device noise and the reference-circuit
//! mitigation, and [`spectral`] turns the central-site magnetization into a
//! spectrum with E8 mass assignments.

pub mod error;
pub mod exact;
pub mod model;
pub mod noise;
pub mod circuit;
pub mod compress;
pub mod par;
pub mod rng;
pub mod series;
pub mod spectral;
pub mod state;

pub use error::{Error, Result};
pub use model::{E8Label, KinkPattern, ModelSpec};
pub use series::{SeriesMeta, TimeSeries};
pub use state::StateVector;
