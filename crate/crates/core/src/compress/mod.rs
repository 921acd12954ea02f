//! Fixed-depth brickwall compression of `e^{−iHt}` by Riemannian
//! optimization of the gates, with dense or MPO targets.

mod ansatz;
pub mod mpo;
mod optimize;
mod series;
mod target;

pub use ansatz::{layer_bonds, trotter_init, BrickwallAnsatz};
pub use mpo::{bond_hamiltonian, expm_symmetric4, target_mpo, MPOperator, MpoOptions, Truncation};
pub use optimize::{
    optimize, retract, riemannian_gradient, write_trace_csv, OptimizeOptions, OptimizeResult, Status, TraceRow,
};
pub use series::{run_compressed_series, CompressOptions, CompressedPoint, CompressedRun, LayerSchedule};
pub use target::{cost, dense_target_from, gate_environment, target_operator, Target, TargetMode, MAX_DENSE_TARGET_SITES};

#[cfg(test)]
mod tests;
