use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{
    arm_weights, round_distribution, ApparatusConfig, ChannelTap, EveObservation, OutcomeDistribution, Pass, Path,
    PhotonState, Polarization, Setting,
};

/// Eavesdropper acting during a session.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackModel {
    #[default]
    None,
    /// Each photon is attacked with probability `p_attack`.
    InterceptResend { p_attack: f64 },
    /// Accounted for analytically in the time-shift margin only; the
    /// simulated channel is untouched.
    TimeShift,
}

impl AttackModel {
    pub fn validate(&self) -> Result<()> {
        if let AttackModel::InterceptResend { p_attack } = self {
            if !(0.0..=1.0).contains(p_attack) {
                return Err(Error::InvalidArgument(format!(
                    "attack probability must lie in [0, 1], got {p_attack}"
                )));
            }
        }
        Ok(())
    }

    /// Tap to install on the channel, if the model simulates one.
    pub fn tap(&self) -> Option<InterceptResend> {
        match *self {
            AttackModel::InterceptResend { p_attack } => Some(InterceptResend { p_attack }),
            _ => None,
        }
    }
}

impl FromStr for AttackModel {
    type Err = Error;

    /// Parses `none`, `ts` or `ir:<p>`.
    fn from_str(s: &str) -> Result<Self> {
        let model = match s {
            "none" => AttackModel::None,
            "ts" => AttackModel::TimeShift,
            _ => {
                let p = s
                    .strip_prefix("ir:")
                    .and_then(|p| p.parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown attack {s:?}; use none, ts or ir:<p>")))?;
                AttackModel::InterceptResend { p_attack: p }
            }
        };
        model.validate()?;
        Ok(model)
    }
}

impl fmt::Display for AttackModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackModel::None => f.write_str("none"),
            AttackModel::TimeShift => f.write_str("ts"),
            AttackModel::InterceptResend { p_attack } => write!(f, "ir:{p_attack}"),
        }
    }
}

/// Intercept-resend on Bob's arm: Eve measures which-path and, when the
/// photon is in the channel, its H/V polarization, then re-injects a photon
/// of the measured polarization. Applied on both channel passes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterceptResend {
    pub p_attack: f64,
}

impl ChannelTap for InterceptResend {
    fn engage<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        rng.random::<f64>() < self.p_attack
    }

    fn intercept<R: Rng + ?Sized>(
        &self,
        state: PhotonState,
        pass: Pass,
        rng: &mut R,
    ) -> (PhotonState, Option<EveObservation>) {
        apply_intercept_resend(state, pass, rng)
    }
}

/// Eve's measurement on one pass for an attacked photon.
pub fn apply_intercept_resend<R: Rng + ?Sized>(
    state: PhotonState,
    pass: Pass,
    rng: &mut R,
) -> (PhotonState, Option<EveObservation>) {
    if state.is_vacuum() {
        return (state, None);
    }
    match state.sample_path(rng) {
        Path::A => (state.collapse_to(Path::A), Some(EveObservation { pass, found: None })),
        Path::B => {
            let wh = state.amp(Path::B, Polarization::H).norm_sqr();
            let wv = state.amp(Path::B, Polarization::V).norm_sqr();
            let pol = if rng.random::<f64>() * (wh + wv) < wh {
                Polarization::H
            } else {
                Polarization::V
            };
            (
                PhotonState::single(Path::B, pol),
                Some(EveObservation { pass, found: Some(pol) }),
            )
        }
    }
}

/// Click probabilities when every photon is attacked: the arms never
/// interfere, so each arm reaching the recombining splitter splits evenly
/// between D0 and D1.
fn fully_attacked(setting: Setting, cfg: &ApparatusConfig) -> OutcomeDistribution {
    let w = arm_weights(setting, cfg);
    let c = cfg.coupling;
    let half = 0.5 * (w.to_bs_a + w.to_bs_b);
    let p_d0 = c * cfg.efficiency.d0 * half;
    let p_d1 = c * cfg.efficiency.d1 * half;
    let p_d2 = c * cfg.efficiency.d2 * w.to_d2;
    OutcomeDistribution {
        p_d0,
        p_d1,
        p_d2,
        p_none: 1.0 - p_d0 - p_d1 - p_d2,
        pol_alice_detectors: setting.alice_polarization(),
        pol_d2: setting.bob_detected_polarization(),
    }
}

/// Closed-form click probabilities under intercept-resend with attack
/// probability `p_attack`: the mixture of the untouched and the fully
/// attacked apparatus.
pub fn attacked_distribution(a: bool, b: bool, cfg: &ApparatusConfig, p_attack: f64) -> Result<OutcomeDistribution> {
    AttackModel::InterceptResend { p_attack }.validate()?;
    let clean = round_distribution(a, b, cfg)?;
    Ok(clean.mix(&fully_attacked(Setting::new(a, b), cfg), p_attack))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{sample_photon, Detector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parse_attack_models() {
        assert_eq!("none".parse::<AttackModel>().unwrap(), AttackModel::None);
        assert_eq!("ts".parse::<AttackModel>().unwrap(), AttackModel::TimeShift);
        assert_eq!(
            "ir:0.25".parse::<AttackModel>().unwrap(),
            AttackModel::InterceptResend { p_attack: 0.25 }
        );
        assert!("ir:1.5".parse::<AttackModel>().is_err());
        assert!("ir:x".parse::<AttackModel>().is_err());
        assert!("mitm".parse::<AttackModel>().is_err());
    }

    #[test]
    fn attack_model_json_tag() {
        let m = AttackModel::InterceptResend { p_attack: 0.5 };
        let v = serde_json::to_value(m).unwrap();
        assert_eq!(v["kind"], "intercept_resend");
        assert_eq!(serde_json::from_value::<AttackModel>(v).unwrap(), m);
    }

    #[test]
    fn zero_attack_matches_clean() {
        let cfg = ApparatusConfig::ideal();
        for s in Setting::TABLE_ORDER {
            let d = attacked_distribution(s.a, s.b, &cfg, 0.0).unwrap();
            assert_eq!(d.clicks(), round_distribution(s.a, s.b, &cfg).unwrap().clicks());
        }
    }

    /// Enumerates the ideal attacked histories by hand: the photon is in A
    /// or B with weight 1/2 each. In A it reaches the second splitter alone
    /// (D0/D1 evenly). In B with equal rotations it passes Bob's PBS, is
    /// found again on return, and also splits evenly; with unequal rotations
    /// it is diverted to D2.
    #[test]
    fn fully_attacked_ideal_branches() {
        let cfg = ApparatusConfig::ideal();
        let brute = |a: bool, b: bool| -> [f64; 3] {
            let mut p = [0.0; 3];
            p[0] += 0.5 * 0.5;
            p[1] += 0.5 * 0.5;
            if a == b {
                p[0] += 0.5 * 0.5;
                p[1] += 0.5 * 0.5;
            } else {
                p[2] += 0.5;
            }
            p
        };
        for s in Setting::TABLE_ORDER {
            let d = attacked_distribution(s.a, s.b, &cfg, 1.0).unwrap();
            assert_eq!(d.clicks(), brute(s.a, s.b), "{s}");
        }
    }

    #[test]
    fn monte_carlo_matches_mixture() {
        let mut cfg = ApparatusConfig::ideal();
        cfg.mode_overlap.h = 0.9;
        cfg.arm_transmittance_b = 0.8;
        cfg.efficiency.d0 = 0.7;
        let tap = InterceptResend { p_attack: 0.6 };
        let n = 200_000;
        for (i, s) in Setting::TABLE_ORDER.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(40 + i as u64);
            let mut counts = [0usize; 3];
            for _ in 0..n {
                if let Some(d) = sample_photon(*s, &cfg, &tap, &mut rng).click() {
                    counts[d.index()] += 1;
                }
            }
            let want = attacked_distribution(s.a, s.b, &cfg, 0.6).unwrap();
            for det in Detector::ALL {
                let p = want.get(det);
                let f = counts[det.index()] as f64 / n as f64;
                let sigma = (p * (1.0 - p) / n as f64).sqrt().max(1e-9);
                assert!((f - p).abs() < 4.5 * sigma, "{s} {det}: {f} vs {p}");
            }
        }
    }

    #[test]
    fn eve_learns_polarization_when_found() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = PhotonState::single(Path::B, Polarization::V);
        let (out, obs) = apply_intercept_resend(s, Pass::Forward, &mut rng);
        assert_eq!(obs.unwrap().found, Some(Polarization::V));
        assert_eq!(out, PhotonState::single(Path::B, Polarization::V));
    }
}
