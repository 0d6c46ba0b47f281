//! Simulation of Abelian-anyon braiding on a four-qubit toric-code cell
//! coupled to a shared resonator.
//!
//! * [`hilbert`] dense states and operators over composite spaces
//! * [`toric`] lattice stabilizers, anyon operators and loop phases
//! * [`dynamics`] pulse-level and gate-level evolution, frames, calibration
//! * [`tomo`] readout simulation, tomography and the GHZ witness
//! * [`interference`] parity scans, cosine fits and braiding scenarios

pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod interference;
pub mod tolerance;
pub mod tomo;
pub mod toric;

pub use error::{Error, Result};
