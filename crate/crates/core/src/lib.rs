//! Pseudo-spectral kernels for constructing and certifying finite-energy
//! steady states of the forced incompressible Navier-Stokes equations on a
//! periodic box.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, configuration
//! and the command line live in the `steadylab` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod decay;
pub mod error;
pub mod evolution;
pub mod fft;
pub mod field;
pub mod forcing;
pub mod lattice;
pub mod nonlinear;
pub mod nse;
pub mod params;
pub mod semigroup;
pub mod steady;

pub use error::{Error, Result};
pub use field::{NormKind, SpectralVectorField};
pub use forcing::{random_bandpass_forcing, random_solenoidal, ForcingSpec};
pub use lattice::{Lattice, WaveTable, DEFAULT_DEALIAS};
pub use nonlinear::{nonlinear_term, PhysicalField, Transformer};
pub use params::PhysicalParams;
