//! Gate-level and rf-pulse-level simulation of the single-ququart
//! permutation parity algorithm.
//!
//! The crate is organized bottom-up:
//!
//! * [`qudit`]: states, unitaries, density matrices, Fourier gates, fidelities
//! * [`parity`]: the oracle families, the one-query circuit and the classical bound
//! * [`spin`]: spin-s quadrupolar Hamiltonians, propagators and thermal states
//! * [`smp`]: strong-modulating-pulse synthesis of target gates
//! * [`tomography`]: simulated readout and least-squares state reconstruction
//! * [`figures`]: bar-chart data, CSV and SVG rendering
//! * [`experiment`]: configuration and the end-to-end simulated experiment

pub mod error;
pub mod experiment;
pub mod figures;
pub mod linalg;
pub mod parity;
pub mod qudit;
pub mod smp;
pub mod spin;
pub mod tomography;

pub use error::{Error, Result};
