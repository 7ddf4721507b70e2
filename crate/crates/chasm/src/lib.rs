//! chasm: a deterministic phase-space kinetic solver.
//!
//! Semi-Lagrangian advection on distributed local cubic splines closed by
//! perfectly matched boundary conditions, combined with a truncated-kernel
//! spectral method for the singular Coulomb pseudodifferential operator.
//! The library exposes the numerical building blocks; the `chasm` binary
//! drives desk-scale experiments on top of them.

pub mod advection;
pub mod bspline;
pub mod error;
pub mod field;
pub mod grid;
pub mod harness;
pub mod integrator;
pub mod io;
pub mod num;
pub mod pmbc;
pub mod runtime;
#[cfg(test)]
pub(crate) mod testutil;
pub mod tkm;

pub use error::{ChasmError, Result};
pub use field::{ErrorReport, WignerField};
pub use grid::{build_grid, PhaseSpaceGrid};
pub use num::Real;
