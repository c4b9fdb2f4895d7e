//! Simulation and analysis of stochastic resonance in a tristable
//! optomechanical membrane system with quadratic coupling.
//!
//! * [`model`]: drifts, effective potential, fixed points and stability.
//! * [`sde`]: stochastic integration with reproducible noise streams.
//! * [`analysis`]: well symbolization, spectra, SNR and sweeps.
//! * [`config`]: flat `key=value` run configurations and presets.

pub mod analysis;
pub mod eigen;
pub mod model;
pub mod params;
pub mod rng;
pub mod sde;

pub use params::{StateDerivative, SystemParams, SystemState};
