//! Open-system dynamics engineered from repeated indirect measurements.
//!
//! A driven harmonic oscillator is coupled to a three-level meter; state
//! selective Zeno pulses entangle a chosen Fock level with the meter, which
//! is traced out after every interval. The crate provides the exact
//! piecewise dynamics, the Markovian (Lindblad) limit, dissipation and
//! non-Markovianity diagnostics, and sweep drivers.

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod kraus;
pub mod lindblad;
pub mod measures;
pub mod model;
pub mod statespace;
#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
