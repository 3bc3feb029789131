use std::fmt;

use serde::{Deserialize, Serialize};

use super::config::ApparatusConfig;
use super::state::{envelope, Polarization};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Detector {
    D0,
    D1,
    D2,
}

impl Detector {
    pub const ALL: [Detector; 3] = [Detector::D0, Detector::D1, Detector::D2];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "D{}", self.index())
    }
}

/// Alice's and Bob's rotation bits for one round (`true` = pi/2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Setting {
    pub a: bool,
    pub b: bool,
}

impl Setting {
    /// Count-table column order: {0,0}, {0,pi/2}, {pi/2,pi/2}, {pi/2,0}.
    pub const TABLE_ORDER: [Setting; 4] = [
        Setting { a: false, b: false },
        Setting { a: false, b: true },
        Setting { a: true, b: true },
        Setting { a: true, b: false },
    ];

    pub fn new(a: bool, b: bool) -> Self {
        Setting { a, b }
    }

    /// Equal rotations: both arms return the same polarization and interfere.
    pub fn is_interfering(self) -> bool {
        self.a == self.b
    }

    /// Position in [`Setting::TABLE_ORDER`].
    pub fn table_index(self) -> usize {
        match (self.a, self.b) {
            (false, false) => 0,
            (false, true) => 1,
            (true, true) => 2,
            (true, false) => 3,
        }
    }

    pub fn alice_polarization(self) -> Polarization {
        Polarization::from_bit(self.a)
    }

    /// Polarization Bob's station diverts to D2, in the lab frame.
    pub fn bob_detected_polarization(self) -> Polarization {
        Polarization::from_bit(!self.b)
    }

    pub fn label(self) -> &'static str {
        match (self.a, self.b) {
            (false, false) => "{0,0}",
            (false, true) => "{0,pi/2}",
            (true, true) => "{pi/2,pi/2}",
            (true, false) => "{pi/2,0}",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Single-photon click probabilities for one heralded round, dark counts
/// excluded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub p_d0: f64,
    pub p_d1: f64,
    pub p_d2: f64,
    pub p_none: f64,
    /// Polarization of a photon arriving at D0/D1 (Alice's prepared one).
    pub pol_alice_detectors: Polarization,
    /// Polarization Bob's D2 registers, in the lab frame.
    pub pol_d2: Polarization,
}

impl OutcomeDistribution {
    pub fn get(&self, det: Detector) -> f64 {
        match det {
            Detector::D0 => self.p_d0,
            Detector::D1 => self.p_d1,
            Detector::D2 => self.p_d2,
        }
    }

    pub fn clicks(&self) -> [f64; 3] {
        [self.p_d0, self.p_d1, self.p_d2]
    }

    /// Weighted mixture `(1 - w) * self + w * other`.
    pub fn mix(&self, other: &OutcomeDistribution, w: f64) -> OutcomeDistribution {
        let m = |x: f64, y: f64| (1.0 - w) * x + w * y;
        let p_d0 = m(self.p_d0, other.p_d0);
        let p_d1 = m(self.p_d1, other.p_d1);
        let p_d2 = m(self.p_d2, other.p_d2);
        OutcomeDistribution {
            p_d0,
            p_d1,
            p_d2,
            p_none: 1.0 - p_d0 - p_d1 - p_d2,
            ..*self
        }
    }
}

/// Weights reaching the recombining splitter and Bob's D2 for a coupled
/// photon, before detector efficiency.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ArmWeights {
    pub to_bs_a: f64,
    pub to_bs_b: f64,
    pub to_d2: f64,
}

pub(crate) fn arm_weights(setting: Setting, cfg: &ApparatusConfig) -> ArmWeights {
    let pol = setting.alice_polarization();
    // Fraction of Bob's arm that continues past the PBS.
    let pass = if setting.is_interfering() {
        1.0 - cfg.pbs_leakage
    } else {
        cfg.pbs_leakage
    };
    let forward_b = 0.5 * cfg.arm_transmittance_b;
    ArmWeights {
        to_bs_a: 0.5 * cfg.arm_transmittance_a,
        to_bs_b: forward_b * pass * cfg.return_transmittance.get(pol),
        to_d2: forward_b * (1.0 - pass),
    }
}

/// Closed-form click probabilities for a heralded round with rotation bits
/// `(a, b)`.
///
/// With `w_A`, `w_B` the weights reaching the second splitter from each arm,
/// `V = mu * envelope(delta)` and `phi = 2 pi delta / lambda`:
/// `p_D0 = c eta0 [(w_A + w_B)/2 + sqrt(w_A w_B) V cos(phi)]`,
/// `p_D1 = c eta1 [(w_A + w_B)/2 - sqrt(w_A w_B) V cos(phi)]`,
/// `p_D2 = c eta2 w_D2`. Dark counts are not included.
pub fn round_distribution(a: bool, b: bool, cfg: &ApparatusConfig) -> Result<OutcomeDistribution> {
    cfg.validate()?;
    let setting = Setting::new(a, b);
    let pol = setting.alice_polarization();
    let w = arm_weights(setting, cfg);
    let vis = cfg.mode_overlap.get(pol) * envelope(cfg.path_delta_um, cfg.coherence_length_um)?;
    let phi = 2.0 * std::f64::consts::PI * cfg.path_delta_um / cfg.wavelength_um();
    let mean = 0.5 * (w.to_bs_a + w.to_bs_b);
    let cross = (w.to_bs_a * w.to_bs_b).sqrt() * vis * phi.cos();
    let c = cfg.coupling;
    let p_d0 = c * cfg.efficiency.d0 * (mean + cross);
    let p_d1 = c * cfg.efficiency.d1 * (mean - cross);
    let p_d2 = c * cfg.efficiency.d2 * w.to_d2;
    Ok(OutcomeDistribution {
        p_d0,
        p_d1,
        p_d2,
        p_none: 1.0 - p_d0 - p_d1 - p_d2,
        pol_alice_detectors: pol,
        pol_d2: setting.bob_detected_polarization(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ideal_limits() {
        let cfg = ApparatusConfig::ideal();
        for a in [false, true] {
            let d = round_distribution(a, a, &cfg).unwrap();
            assert_eq!((d.p_d0, d.p_d1, d.p_d2), (1.0, 0.0, 0.0));
            let d = round_distribution(a, !a, &cfg).unwrap();
            assert_eq!((d.p_d0, d.p_d1, d.p_d2), (0.25, 0.25, 0.5));
            assert_eq!(d.p_none, 0.0);
        }
    }

    #[test]
    fn imperfect_overlap_leaks_into_d1() {
        let mut cfg = ApparatusConfig::ideal();
        cfg.mode_overlap.v = 0.94;
        let d = round_distribution(true, true, &cfg).unwrap();
        assert_abs_diff_eq!(d.p_d1, 0.03, epsilon = 1e-12);
        assert_abs_diff_eq!(d.p_d0, 0.97, epsilon = 1e-12);
    }

    #[test]
    fn complementary_settings_agree_when_symmetric() {
        let mut cfg = ApparatusConfig::ideal();
        cfg.arm_transmittance_b = 0.7;
        cfg.efficiency.d2 = 0.6;
        cfg.coupling = 0.3;
        assert!(cfg.is_polarization_symmetric());
        let x = round_distribution(false, true, &cfg).unwrap();
        let y = round_distribution(true, false, &cfg).unwrap();
        assert_abs_diff_eq!(x.p_d0, y.p_d0, epsilon = 1e-15);
        assert_abs_diff_eq!(x.p_d1, y.p_d1, epsilon = 1e-15);
        assert_abs_diff_eq!(x.p_d2, y.p_d2, epsilon = 1e-15);
    }

    #[test]
    fn invalid_config_rejected() {
        let mut cfg = ApparatusConfig::ideal();
        cfg.coupling = -0.1;
        assert!(round_distribution(false, false, &cfg).is_err());
    }

    #[test]
    fn setting_table_order_roundtrip() {
        for (i, s) in Setting::TABLE_ORDER.iter().enumerate() {
            assert_eq!(s.table_index(), i);
        }
    }
}
