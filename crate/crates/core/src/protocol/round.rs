use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::optics::{
    sample_photon, ApparatusConfig, ChannelTap, Detector, EveObservation, NoTap, Path, PathSet, PhotonFate,
    Polarization, Setting,
};

/// Why a detector fired in a gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClickCause {
    Photon,
    Dark,
    PhotonAndDark,
}

impl ClickCause {
    fn combine(photon: bool, dark: bool) -> Option<Self> {
        match (photon, dark) {
            (false, false) => None,
            (true, false) => Some(ClickCause::Photon),
            (false, true) => Some(ClickCause::Dark),
            (true, true) => Some(ClickCause::PhotonAndDark),
        }
    }

    pub fn has_photon(self) -> bool {
        !matches!(self, ClickCause::Dark)
    }
}

/// Resolved detector outcome of a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    None,
    Single(Detector),
    /// More than one detector fired in the gate.
    Multiple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiftClass {
    KeyBit,
    EveCheckD0,
    EveCheckD2,
    ErrorAnnounced,
    Discard,
}

/// Polarizations made public on the classical channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Announcement {
    pub initial: Polarization,
    pub detected: Polarization,
}

/// One gate of the protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round_id: u64,
    pub heralded: bool,
    pub a: bool,
    pub b: bool,
    /// Per detector D0, D1, D2.
    pub clicks: [Option<ClickCause>; 3],
    /// Photons present in the gate (empty when nothing was emitted).
    pub photons: Vec<PhotonFate>,
    pub announced: Option<Announcement>,
    pub sift: SiftClass,
}

impl RoundRecord {
    pub fn setting(&self) -> Setting {
        Setting::new(self.a, self.b)
    }

    pub fn outcome(&self) -> Outcome {
        let mut fired = Detector::ALL.into_iter().filter(|d| self.clicks[d.index()].is_some());
        match (fired.next(), fired.next()) {
            (None, _) => Outcome::None,
            (Some(d), None) => Outcome::Single(d),
            _ => Outcome::Multiple,
        }
    }

    pub fn click(&self, det: Detector) -> Option<ClickCause> {
        self.clicks[det.index()]
    }

    /// Key bits (Alice, Bob) of a sifted key round: Alice keeps her rotation
    /// bit, Bob the complement of his.
    pub fn key_bits(&self) -> Option<(bool, bool)> {
        (self.sift == SiftClass::KeyBit).then_some((self.a, !self.b))
    }

    /// Union of the trajectories of every photon whose arrival made D1 fire.
    /// Empty when D1 fired on a dark count alone.
    pub fn d1_carrier_paths(&self) -> PathSet {
        self.photons
            .iter()
            .filter(|f| f.click() == Some(Detector::D1))
            .fold(PathSet::EMPTY, |acc, f| acc.union(f.trajectory))
    }

    /// True when no photon that produced a D1 click ever occupied arm B.
    pub fn d1_confined_to_alice(&self) -> bool {
        !self.d1_carrier_paths().contains(Path::B)
    }

    pub fn eve_observations(&self) -> impl Iterator<Item = &EveObservation> {
        self.photons.iter().filter_map(|f| f.eve.as_ref())
    }
}

/// Classification of a resolved round by the public sifting rules.
///
/// D0 or D2 alone: both polarizations are announced for eavesdropper checks.
/// D1 alone: a key bit when the rotations differ, otherwise Alice announces
/// an error. Empty gates and multi-click gates are discarded.
pub fn sift(record: &RoundRecord) -> (SiftClass, Option<Announcement>) {
    let setting = record.setting();
    let initial = setting.alice_polarization();
    match record.outcome() {
        Outcome::None | Outcome::Multiple => (SiftClass::Discard, None),
        Outcome::Single(Detector::D0) => (
            SiftClass::EveCheckD0,
            Some(Announcement {
                initial,
                detected: initial,
            }),
        ),
        Outcome::Single(Detector::D2) => (
            SiftClass::EveCheckD2,
            Some(Announcement {
                initial,
                detected: setting.bob_detected_polarization(),
            }),
        ),
        Outcome::Single(Detector::D1) => {
            if setting.is_interfering() {
                (
                    SiftClass::ErrorAnnounced,
                    Some(Announcement {
                        initial,
                        detected: initial,
                    }),
                )
            } else {
                (SiftClass::KeyBit, None)
            }
        }
    }
}

/// How rotation bits are chosen each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SettingPolicy {
    /// Uniform, independent bits for Alice and Bob.
    #[default]
    Random,
    Fixed(Setting),
}

impl SettingPolicy {
    pub fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> Setting {
        match self {
            SettingPolicy::Random => Setting::new(rng.random(), rng.random()),
            SettingPolicy::Fixed(s) => s,
        }
    }
}

/// Simulates one heralded gate: draws the settings, the photon number,
/// propagates each photon, overlays per-gate dark counts and sifts.
pub fn simulate_round_with<T, R>(
    cfg: &ApparatusConfig,
    policy: SettingPolicy,
    tap: &T,
    round_id: u64,
    rng: &mut R,
) -> RoundRecord
where
    T: ChannelTap,
    R: Rng + ?Sized,
{
    let setting = policy.draw(rng);
    let n_photons = if cfg.multi_photon_leak > 0.0 && rng.random::<f64>() < cfg.multi_photon_leak {
        2
    } else {
        1
    };
    let photons: Vec<PhotonFate> = (0..n_photons)
        .map(|_| sample_photon(setting, cfg, tap, rng))
        .filter(|f| f.reached.is_some() || f.eve.is_some() || f.trajectory != PathSet::EMPTY)
        .collect();
    let mut photon_click = [false; 3];
    for f in &photons {
        if let Some(d) = f.click() {
            photon_click[d.index()] = true;
        }
    }
    let dark = cfg.dark_prob.as_array();
    let mut clicks = [None; 3];
    for i in 0..3 {
        let dark_click = dark[i] > 0.0 && rng.random::<f64>() < dark[i];
        clicks[i] = ClickCause::combine(photon_click[i], dark_click);
    }
    let mut record = RoundRecord {
        round_id,
        heralded: true,
        a: setting.a,
        b: setting.b,
        clicks,
        photons,
        announced: None,
        sift: SiftClass::Discard,
    };
    let (class, announced) = sift(&record);
    record.sift = class;
    record.announced = announced;
    record
}

/// One heralded round with uniformly random settings and an untouched
/// channel.
pub fn simulate_round<R: Rng + ?Sized>(cfg: &ApparatusConfig, rng: &mut R) -> RoundRecord {
    simulate_round_with(cfg, SettingPolicy::Random, &NoTap, 0, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::DarkProbs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn record(a: bool, b: bool, clicks: [Option<ClickCause>; 3]) -> RoundRecord {
        RoundRecord {
            round_id: 0,
            heralded: true,
            a,
            b,
            clicks,
            photons: vec![],
            announced: None,
            sift: SiftClass::Discard,
        }
    }

    const P: Option<ClickCause> = Some(ClickCause::Photon);

    #[test]
    fn sifting_rules() {
        let (c, ann) = sift(&record(false, true, [None, P, None]));
        assert_eq!(c, SiftClass::KeyBit);
        assert!(ann.is_none());
        let mut r = record(false, true, [None, P, None]);
        r.sift = c;
        assert_eq!(r.key_bits(), Some((false, false)));

        assert_eq!(sift(&record(true, true, [None, P, None])).0, SiftClass::ErrorAnnounced);

        let (c, ann) = sift(&record(false, false, [None, None, P]));
        assert_eq!(c, SiftClass::EveCheckD2);
        let ann = ann.unwrap();
        assert_eq!(ann.initial, Polarization::H);
        assert_eq!(ann.detected, Polarization::V);

        assert_eq!(sift(&record(false, false, [P, None, None])).0, SiftClass::EveCheckD0);
        assert_eq!(sift(&record(false, true, [None, None, None])).0, SiftClass::Discard);
        assert_eq!(sift(&record(false, true, [P, P, None])).0, SiftClass::Discard);
    }

    #[test]
    fn ideal_interfering_round_is_d0() {
        let cfg = ApparatusConfig::ideal();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in 0..1000 {
            let r = simulate_round_with(&cfg, SettingPolicy::Fixed(Setting::new(false, false)), &NoTap, i, &mut rng);
            assert_eq!(r.outcome(), Outcome::Single(Detector::D0));
            assert_eq!(r.sift, SiftClass::EveCheckD0);
        }
    }

    #[test]
    fn ideal_key_setting_yields_quarter_key_bits() {
        let cfg = ApparatusConfig::ideal();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 100_000;
        let keys = (0..n)
            .filter(|&i| {
                simulate_round_with(&cfg, SettingPolicy::Fixed(Setting::new(false, true)), &NoTap, i, &mut rng).sift
                    == SiftClass::KeyBit
            })
            .count();
        let p = keys as f64 / n as f64;
        let sigma = (0.25f64 * 0.75 / n as f64).sqrt();
        assert!((p - 0.25).abs() < 4.0 * sigma, "{p}");
    }

    #[test]
    fn dark_d1_without_photon_is_announced_error() {
        let mut cfg = ApparatusConfig::ideal();
        cfg.coupling = 0.0;
        cfg.dark_prob = DarkProbs { d0: 0.0, d1: 1.0, d2: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r = simulate_round_with(&cfg, SettingPolicy::Fixed(Setting::new(true, true)), &NoTap, 0, &mut rng);
        assert_eq!(r.click(Detector::D1), Some(ClickCause::Dark));
        assert_eq!(r.sift, SiftClass::ErrorAnnounced);
        assert!(r.photons.is_empty());
        assert!(r.d1_confined_to_alice());
    }
}
