//! Hybrid latent-space PDE solver.
//!
//! Autoencoders compress PDE conditions (geometry, boundary conditions, heat
//! sources) and solutions into latent vectors. Inference starts from a
//! coarse-grid classical solve, encodes it, and iterates
//! `eta <- E(D(eta, conditions))` until successive latents agree, then decodes
//! the fine-grid solution. Finite-difference solvers supply training data,
//! the coarse initializer and ground truth.

pub mod autoencoder;
pub mod conditions;
pub mod error;
pub mod field;
pub mod hybrid;
pub mod neural;
pub mod solver;

pub use error::{Error, Result};
pub use field::{FieldStats, Grid, ScalarField};
