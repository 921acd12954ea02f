//! Configuration-driven experiment runner for Ising meson spectroscopy.
//!
//! Every command writes plain CSV, JSON or markdown. A run directory's
//! `manifest.json` holds the resolved configuration and derived seeds, and
//! feeding it back to `meson run --config` reproduces the outputs byte for
//! byte.

pub mod compare;
pub mod config;
pub mod error;
pub mod io;
pub mod run;
pub mod tools;

pub use compare::{compare, Comparison, Reference};
pub use config::{Backend, ExperimentConfig, Overrides};
pub use error::{CliError, CliResult};
pub use run::{run, Manifest, RunOutcome, RunReport};
