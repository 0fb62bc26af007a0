//! Thermodynamics-informed latent-space reduced-order models.
//!
//! An autoencoder maps full-order states to a small latent space whose
//! dynamics follow the GENERIC form `ż = L∇E + M∇S` with the degeneracy
//! conditions built into the network construction. The crate also ships the
//! full-order data generators, the training losses, error diagnostics and
//! greedy parameter sampling used to build and assess such models.

pub mod autodiff;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod fom;
pub mod integrate;
pub mod nn;
pub mod train;

pub use error::{Error, Result};
