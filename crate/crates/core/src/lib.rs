//! Force-sensing models for optically levitated spheres.
//!
//! The crate is organised bottom-up:
//!
//! - [`quantities`]: constants, units and dimension-tagged scalars
//! - [`sensor`]: sphere, trap and force-noise floors
//! - [`dynamics`]: Langevin simulation, spectral estimation, impulse detection
//! - [`newforces`]: Yukawa, screened-Coulomb and Casimir force models
//! - [`limits`]: projected coupling limits and the axion line helper

pub mod dynamics;
pub mod error;
pub mod limits;
pub mod newforces;
pub mod quadrature;
pub mod quantities;
pub mod sensor;

pub use error::{Error, Result};
pub use quantities::{Dimension, Quantity, CODATA_2018};
pub use sensor::{NoiseModel, Sphere, TrapState};

/// Crate version recorded in output provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
