//! Pseudo-spectral simulation and control synthesis for the normal
//! parabolic equation derived from the 3-D Helmholtz system on the torus.
//!
//! The crate evaluates the closed-form solution of the equation, detects
//! finite-time blow-up, classifies initial data into stability, explosion
//! and growing regimes, builds a compactly supported starting control,
//! certifies its decay inequality numerically, and assembles end-to-end
//! stabilization plans. A CLI front end (`npe`) drives experiments from
//! JSON configs and emits CSV/JSON artifacts.

pub mod config;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod estimate;
mod fft;
pub mod field;
pub mod functionals;
pub mod io;
pub mod lattice;
pub mod report;

pub use error::{Error, Result};
pub use field::{PhysicalField, SpectralField};
pub use lattice::LatticeSpec;
