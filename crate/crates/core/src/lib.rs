//! Dissipative dynamics of N fully Rydberg-blockaded Λ-type atoms under a
//! strong coherent probe.
//!
//! - [`linsys`]: generic linear expectation-value engine (integration,
//!   regression-theorem correlations, spectra).
//! - [`single_atom`]: one Λ atom, its generator and closed-form spectra.
//! - [`ladder`]: the collective `(G_j, W_j)` ladder with its dark sink.
//! - [`decomposition`]: rung-population dynamics and the closed-form
//!   analytics built on them.
//! - [`cli`]: scenario runner and data-file plumbing behind the binary.

pub mod cli;
pub mod decomposition;
mod error;
pub mod ladder;
pub mod linsys;
pub mod single_atom;

pub use error::{ModelError, Result};
