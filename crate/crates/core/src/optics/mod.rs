//! Photon propagation through the Mach-Zehnder realization of the protocol.
//!
//! Alice's arm (A) holds the optical delay; Bob's arm (B) contains the
//! quantum channel and his station (HWP, PBS routing V to D2, HWP). The
//! recombining splitter sends the bright fringe to D0 and the dark one to
//! D1. [`round_distribution`] gives closed-form click probabilities and
//! [`sample_photon`] resolves one photon history by Monte Carlo.

mod config;
mod outcome;
mod sampler;
mod state;

pub use config::{ApparatusConfig, DarkProbs, Efficiencies, PolPair};
pub use outcome::{round_distribution, Detector, OutcomeDistribution, Setting};
pub(crate) use outcome::arm_weights;
pub use sampler::{sample_photon, ChannelTap, EveObservation, NoTap, Pass, PhotonFate};
pub use state::{
    apply_bs, apply_hwp, apply_hwp_radians, apply_pbs_and_d2, apply_phase, attenuate, attenuate_mode, envelope,
    output_weights, pbs_split, HwpAngle, Path, PathSet, PhotonState, Polarization, SUPPORT_EPS,
};
