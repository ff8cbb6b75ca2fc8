//! Giant atoms in a coupled-resonator waveguide.
//!
//! The crate covers the single-excitation spectrum of atoms plus lattice
//! (bound states inside and outside the band), reduction to atomic density
//! matrices and Uhlmann fidelities, the Markovian master equation with the
//! collective coupling kernel, drive protocols that prepare Bell and W
//! states, and Monte Carlo averaging over waveguide disorder.
//!
//! Energies are in units of the hopping strength ξ and times in units of
//! 1/ξ throughout.

#![forbid(unsafe_code)]

pub mod config;
pub mod disorder;
pub mod error;
pub mod experiments;
pub mod io;
pub mod lindblad;
pub mod model;
pub mod spectral;

pub use num_complex::Complex64;

pub use error::{Error, Result};
pub use model::{Boundary, GiantAtomSpec, SingleExcitationState, SystemSpec, WaveguideSpec};
pub use spectral::{AtomicDensityMatrix, StateClass, StateKind};
pub use lindblad::{CouplingKernel, DriveSpec, Trajectory};
pub use disorder::{DisorderKind, DisorderSpec};
pub use experiments::{NamedConfiguration, ProtocolResult};
