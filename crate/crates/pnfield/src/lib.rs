//! Numerical library for planar-slip phase-field dislocation energies.
//!
//! The crate evaluates the nonlocal slip energy with its lattice-misfit and
//! long-range elastic terms, derives line-tension densities and their relaxed
//! upper bounds, builds the convex macroscopic density by linear programming
//! over rank-one slip atoms, constructs replicated-and-mollified recovery
//! fields, and runs the log-scaling sweeps that exhibit the two energy
//! regimes at desk scale.

pub mod config;
pub mod energy;
pub mod envelope;
pub mod error;
pub mod experiments;
pub mod fft;
pub mod fields;
pub mod kernel;
pub mod limits;
pub mod linetension;
pub mod recovery;

pub use error::{Error, Result};
pub use kernel::{AnisotropyKernel, KernelVariant, SymMat, TruncatedKernel};
