//! Frequency shifts and clock metrics for optical clocks built from large
//! ion Coulomb crystals in RF Paul traps.
//!
//! Module map:
//! - [`physics`]: constants, unit conversion, clock-species records
//! - [`trap`]: trap geometry, scaled units, magic RF frequency
//! - [`crystal`]: equilibrium crystals by damped annealing
//! - [`micromotion`]: micromotion amplitudes and fractional shifts
//! - [`multipole`]: quadrupole and tensor-polarisability shifts
//! - [`metrics`]: Ramsey contrast, stability, systematic budget
//! - [`oracle`]: time-domain integration of the RF-driven motion
//! - [`distribution`], [`config`]: shared result type and configuration files

pub mod config;
pub mod crystal;
pub mod distribution;
pub mod error;
pub mod metrics;
pub mod micromotion;
pub mod multipole;
pub mod oracle;
pub mod physics;
pub mod special;
pub mod trap;

pub use error::{Error, Result};
