//! Experiment harness: dataset generation, training, hybrid solves,
//! comparison against the reference solver, and timing.

pub mod bench;
pub mod compare;
pub mod config;
pub mod dataset;
pub mod io;
pub mod plot;
pub mod solve;
pub mod stats;
pub mod train;

pub use config::{source_seed, ExperimentConfig, Split};

/// Process exit code for a failed command: 1 for numerical failures, 2 for
/// usage, format and I/O errors.
pub fn exit_code(err: &latentpde::Error) -> u8 {
    if err.is_numerical() {
        1
    } else {
        2
    }
}
