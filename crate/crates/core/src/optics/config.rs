use serde::{Deserialize, Serialize};

use super::state::Polarization;
use crate::error::{Error, Result};

/// A value that may differ between the two polarizations carried through the
/// interferometer (H for Alice bit 0, V for Alice bit 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolPair {
    pub h: f64,
    pub v: f64,
}

impl PolPair {
    pub const fn both(x: f64) -> Self {
        PolPair { h: x, v: x }
    }

    pub fn get(&self, pol: Polarization) -> f64 {
        match pol {
            Polarization::H => self.h,
            Polarization::V => self.v,
        }
    }
}

/// Per-detector efficiencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Efficiencies {
    pub d0: f64,
    pub d1: f64,
    pub d2: f64,
    pub herald: f64,
}

/// Per-gate background click probabilities of the three output detectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DarkProbs {
    pub d0: f64,
    pub d1: f64,
    pub d2: f64,
}

impl DarkProbs {
    pub const ZERO: DarkProbs = DarkProbs { d0: 0.0, d1: 0.0, d2: 0.0 };

    pub fn as_array(&self) -> [f64; 3] {
        [self.d0, self.d1, self.d2]
    }
}

/// Physical imperfections of source, interferometer and detectors.
///
/// Lengths: `coherence_length_um` and `path_delta_um` in micrometres,
/// `wavelength_nm` in nanometres. Rates in events per second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApparatusConfig {
    /// Mode overlap of the two arms at the recombining splitter, the ceiling
    /// on fringe visibility. May differ per polarization.
    pub mode_overlap: PolPair,
    pub coherence_length_um: f64,
    pub wavelength_nm: f64,
    /// Path-length difference B - A.
    pub path_delta_um: f64,
    /// Alice's arm.
    pub arm_transmittance_a: f64,
    /// Bob's arm, quantum channel up to his station.
    pub arm_transmittance_b: f64,
    /// Bob's arm from his station back to the recombining splitter, by
    /// the polarization the photon carries there.
    pub return_transmittance: PolPair,
    /// Inverse extinction ratio of Bob's PBS (0 = ideal).
    pub pbs_leakage: f64,
    pub efficiency: Efficiencies,
    pub dark_prob: DarkProbs,
    pub gate_width_ns: f64,
    /// Herald detector clicks per second; each opens one detection gate.
    pub herald_rate_hz: f64,
    /// Probability that a heralded photon is coupled into the interferometer.
    pub coupling: f64,
    /// Probability that a heralded round carries two photons.
    pub multi_photon_leak: f64,
    /// Photons entering the channel outside any detection gate.
    pub unheralded_leak_rate_hz: f64,
    pub shuttered: bool,
}

impl Default for ApparatusConfig {
    fn default() -> Self {
        Self::ideal()
    }
}

impl ApparatusConfig {
    /// Lossless, noiseless, perfectly balanced apparatus at the D0 bright
    /// fringe.
    pub fn ideal() -> Self {
        ApparatusConfig {
            mode_overlap: PolPair::both(1.0),
            coherence_length_um: 660.0,
            wavelength_nm: 812.0,
            path_delta_um: 0.0,
            arm_transmittance_a: 1.0,
            arm_transmittance_b: 1.0,
            return_transmittance: PolPair::both(1.0),
            pbs_leakage: 0.0,
            efficiency: Efficiencies {
                d0: 1.0,
                d1: 1.0,
                d2: 1.0,
                herald: 1.0,
            },
            dark_prob: DarkProbs::ZERO,
            gate_width_ns: 1.0,
            herald_rate_hz: 1000.0,
            coupling: 1.0,
            multi_photon_leak: 0.0,
            unheralded_leak_rate_hz: 0.0,
            shuttered: false,
        }
    }

    pub fn wavelength_um(&self) -> f64 {
        self.wavelength_nm * 1e-3
    }

    pub fn with_delta(&self, delta_um: f64) -> Self {
        ApparatusConfig {
            path_delta_um: delta_um,
            ..self.clone()
        }
    }

    pub fn without_darks(&self) -> Self {
        ApparatusConfig {
            dark_prob: DarkProbs::ZERO,
            ..self.clone()
        }
    }

    /// Rate at which photons reach the channel without a gate. Forced to
    /// zero for a shuttered source.
    pub fn effective_unheralded_rate(&self) -> f64 {
        if self.shuttered {
            0.0
        } else {
            self.unheralded_leak_rate_hz
        }
    }

    /// Fringe visibility ceiling at the configured delay for photons of the
    /// given polarization.
    pub fn effective_visibility(&self, pol: Polarization) -> f64 {
        let env = super::state::envelope(self.path_delta_um, self.coherence_length_um).unwrap_or(0.0);
        (self.mode_overlap.get(pol) * env).clamp(0.0, 1.0)
    }

    /// True when swapping H and V leaves every parameter unchanged.
    pub fn is_polarization_symmetric(&self) -> bool {
        self.mode_overlap.h == self.mode_overlap.v && self.return_transmittance.h == self.return_transmittance.v
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("mode_overlap.h", self.mode_overlap.h),
            ("mode_overlap.v", self.mode_overlap.v),
            ("arm_transmittance_a", self.arm_transmittance_a),
            ("arm_transmittance_b", self.arm_transmittance_b),
            ("return_transmittance.h", self.return_transmittance.h),
            ("return_transmittance.v", self.return_transmittance.v),
            ("pbs_leakage", self.pbs_leakage),
            ("efficiency.d0", self.efficiency.d0),
            ("efficiency.d1", self.efficiency.d1),
            ("efficiency.d2", self.efficiency.d2),
            ("efficiency.herald", self.efficiency.herald),
            ("dark_prob.d0", self.dark_prob.d0),
            ("dark_prob.d1", self.dark_prob.d1),
            ("dark_prob.d2", self.dark_prob.d2),
            ("coupling", self.coupling),
            ("multi_photon_leak", self.multi_photon_leak),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.efficiency.herald <= 0.0 {
            return Err(Error::InvalidConfig("efficiency.herald must be positive".into()));
        }
        let positive = [
            ("coherence_length_um", self.coherence_length_um),
            ("wavelength_nm", self.wavelength_nm),
            ("gate_width_ns", self.gate_width_ns),
        ];
        for (name, x) in positive {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {x}")));
            }
        }
        let non_negative = [
            ("herald_rate_hz", self.herald_rate_hz),
            ("unheralded_leak_rate_hz", self.unheralded_leak_rate_hz),
        ];
        for (name, x) in non_negative {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be non-negative, got {x}")));
            }
        }
        if !self.path_delta_um.is_finite() {
            return Err(Error::InvalidConfig("path_delta_um must be finite".into()));
        }
        Ok(())
    }
}
