//! Two-photon ionization of hydrogenic atoms by combs of odd harmonics.
//!
//! Three engines share the field and atom descriptions:
//!
//! * [`combinatorial`]: closed-form path counting for equal-strength combs,
//! * [`perturbation`]: lowest-order two-photon amplitudes on the discretized
//!   spectrum, with a Dalgarno–Lewis cross-check,
//! * [`propagator`]: length-gauge time propagation on a B-spline basis, with
//!   [`spectrum`] turning final states into directional photoelectron spectra.
//!
//! [`campaign`] runs ensembles over harmonic counts and phase schemes and
//! fits power laws; [`config`] binds it all to TOML run files.

pub mod basis;
pub mod campaign;
pub mod combinatorial;
pub mod config;
pub mod error;
pub mod field;
pub mod linalg;
pub mod perturbation;
pub mod propagator;
pub mod spectrum;
pub mod units;

pub use error::{Error, Result};
