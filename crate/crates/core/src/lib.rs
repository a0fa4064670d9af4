//! Yee FDTD assembled as a discrete-time matrix system, with Krylov-subspace
//! model order reduction that preserves the leap-frog block structure, and
//! singular-value clipping that keeps the reduced update stable for timesteps
//! above the CFL limit.
//!
//! Pipeline: [`grid`] describes the problem, [`assembly`] turns it into the
//! sparse update pair, [`fdtd`] is the full-order reference simulator,
//! [`solver`] handles the shifted systems behind the Arnoldi process,
//! [`reduction`] builds the projection basis and the reduced model,
//! [`stability`] checks and enforces the timestep stability condition,
//! [`reduced`] advances the reduced model, and [`postprocess`] extracts
//! spectra, resonances and S-parameters.

pub mod assembly;
pub mod constants;
pub mod error;
pub mod fdtd;
pub mod grid;
pub mod postprocess;
pub mod reduced;
pub mod reduction;
pub mod solver;
pub mod sparse;
pub mod stability;
pub mod timeseries;

pub use error::{FdtdError, Result};
