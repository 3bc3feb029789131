//! Simulator and analysis toolkit for counterfactual quantum key
//! distribution over a Mach-Zehnder interferometer.
//!
//! - [`optics`]: single-photon state propagation and click probabilities
//! - [`protocol`]: round simulation, sifting and session tallies
//! - [`adversary`]: intercept-resend eavesdropping and security margins
//! - [`stats`]: QBER, fringe visibility, g2(0) and stability estimators
//! - [`experiment`]: configuration, calibrated preset and experiment runner

pub mod adversary;
pub mod error;
pub mod experiment;
pub mod optics;
pub mod protocol;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
