//! Markovian master equation for the atoms with the waveguide traced out.

pub mod evolve;
pub mod generator;
pub mod integrate;
pub mod kernel;

pub use evolve::{evolve, evolve_from, fidelity_key, Target, Trajectory, EXCITATION, TRACE};
pub use generator::{lindblad_generator, DriveSpec, LindbladGenerator};
pub use integrate::{Dopri5, IntegratorOptions};
pub use kernel::{coupling_matrix, phase_sum, CouplingKernel};
