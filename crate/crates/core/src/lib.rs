//! Quantum hydrodynamics workbench: split-operator wavefunction evolution,
//! Bohmian field decomposition and residual checks, trajectories, two-slit
//! interference formulas and lattice path integrals.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bohm;
pub mod complexified;
pub mod config;
pub mod constants;
pub mod error;
pub mod evolve;
pub mod field;
pub mod grid;
pub mod interference;
pub mod io;
pub mod potential;
pub mod propagator;
pub mod run;
pub mod spectral;
pub mod trajectories;

pub use error::{Error, Result};
