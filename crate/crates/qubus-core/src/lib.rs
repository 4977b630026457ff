//! Open-system simulation of driven ("dressed") qubits coupled to a damped
//! harmonic oscillator: Hamiltonians, Lindblad propagation, readout spectra
//! and two-qubit gate metrics.
//!
//! Frequencies, rates and times are expressed in units of the oscillator
//! frequency `omega_h`.

pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod metrics;
pub mod models;
pub mod spectral;

pub use error::{Error, Result};
