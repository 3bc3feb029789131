//! Monte Carlo propagation of one photon through the interferometer.
//!
//! Every non-unitary event (coupling, arm loss, the PBS/D2 branch, partial
//! mode overlap, detector efficiency) is resolved by sampling, so each call
//! yields one concrete history. The arms the surviving amplitude occupies
//! when it reaches the recombining splitter form the trajectory record.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::ApparatusConfig;
use super::outcome::{Detector, Setting};
use super::state::{
    apply_bs, apply_hwp, apply_pbs_and_d2, apply_phase, attenuate, attenuate_mode, output_weights, HwpAngle,
    Path, PathSet, PhotonState, Polarization,
};

/// Channel pass on Bob's arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pass {
    Forward,
    Return,
}

/// What an eavesdropper on the channel learned in one pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EveObservation {
    pub pass: Pass,
    /// Polarization found, or `None` when the photon was not in the channel.
    pub found: Option<Polarization>,
}

/// Anything acting on the photon while it travels the channel segment of
/// arm B.
pub trait ChannelTap {
    /// Decides once per photon whether the tap acts on it at all.
    fn engage<R: Rng + ?Sized>(&self, _rng: &mut R) -> bool {
        true
    }

    fn intercept<R: Rng + ?Sized>(
        &self,
        state: PhotonState,
        pass: Pass,
        rng: &mut R,
    ) -> (PhotonState, Option<EveObservation>);
}

/// Untouched channel.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoTap;

impl ChannelTap for NoTap {
    fn intercept<R: Rng + ?Sized>(
        &self,
        state: PhotonState,
        _pass: Pass,
        _rng: &mut R,
    ) -> (PhotonState, Option<EveObservation>) {
        (state, None)
    }
}

/// History of one photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhotonFate {
    /// Detector the photon reached (before efficiency), if any.
    pub reached: Option<Detector>,
    pub clicked: bool,
    pub trajectory: PathSet,
    /// First channel observation made by an eavesdropper, if any.
    pub eve: Option<EveObservation>,
}

impl PhotonFate {
    fn lost(trajectory: PathSet, eve: Option<EveObservation>) -> Self {
        PhotonFate {
            reached: None,
            clicked: false,
            trajectory,
            eve,
        }
    }

    pub fn click(&self) -> Option<Detector> {
        if self.clicked {
            self.reached
        } else {
            None
        }
    }
}

/// Propagates one heralded photon for the given setting.
pub fn sample_photon<T, R>(setting: Setting, cfg: &ApparatusConfig, tap: &T, rng: &mut R) -> PhotonFate
where
    T: ChannelTap,
    R: Rng + ?Sized,
{
    if rng.random::<f64>() >= cfg.coupling {
        return PhotonFate::lost(PathSet::EMPTY, None);
    }
    let engaged = tap.engage(rng);
    let pol = setting.alice_polarization();
    let angle_b = HwpAngle::from_bit(setting.b);

    let s = apply_hwp(&PhotonState::input(Polarization::H), Path::B, HwpAngle::from_bit(setting.a));
    let s = apply_bs(&s);
    let s = attenuate(&attenuate(&s, Path::A, cfg.arm_transmittance_a), Path::B, cfg.arm_transmittance_b);
    let Some(s) = s.sample_survival(rng) else {
        return PhotonFate::lost(s.support(), None);
    };

    let mut trajectory = PathSet::EMPTY;
    let (s, forward) = if engaged {
        tap.intercept(s, Pass::Forward, rng)
    } else {
        (s, None)
    };
    if let Some(EveObservation { found: Some(_), .. }) = forward {
        trajectory = trajectory.union(PathSet::only(Path::B));
    }
    let mut eve = forward;
    if s.is_vacuum() {
        return PhotonFate::lost(trajectory, eve);
    }

    let s = apply_hwp(&s, Path::B, angle_b);
    let (s, d2_click) = apply_pbs_and_d2(&s, cfg.pbs_leakage, cfg.efficiency.d2, rng);
    if s.is_vacuum() {
        return PhotonFate {
            reached: Some(Detector::D2),
            clicked: d2_click,
            trajectory: trajectory.union(PathSet::only(Path::B)),
            eve,
        };
    }
    let s = apply_hwp(&s, Path::B, angle_b);
    let s = attenuate_mode(&s, Path::B, Polarization::H, cfg.return_transmittance.h);
    let s = attenuate_mode(&s, Path::B, Polarization::V, cfg.return_transmittance.v);
    let Some(s) = s.sample_survival(rng) else {
        return PhotonFate::lost(trajectory.union(s.support()), eve);
    };

    let (s, ret) = if engaged {
        tap.intercept(s, Pass::Return, rng)
    } else {
        (s, None)
    };
    if let Some(EveObservation { found: Some(_), .. }) = ret {
        trajectory = trajectory.union(PathSet::only(Path::B));
    }
    if eve.is_none() {
        eve = ret;
    }
    if s.is_vacuum() {
        return PhotonFate::lost(trajectory, eve);
    }

    let mut s = apply_phase(&s, cfg.path_delta_um, cfg.wavelength_um());
    // Partial mode overlap: with probability 1 - V the arms are
    // distinguishable and the photon behaves as a which-path mixture.
    if rng.random::<f64>() >= cfg.effective_visibility(pol) {
        let path = s.sample_path(rng);
        s = s.collapse_to(path);
    }
    let trajectory = trajectory.union(s.support());

    let (w0, w1) = output_weights(&s);
    let det = if rng.random::<f64>() * (w0 + w1) < w0 {
        Detector::D0
    } else {
        Detector::D1
    };
    let eta = match det {
        Detector::D0 => cfg.efficiency.d0,
        _ => cfg.efficiency.d1,
    };
    PhotonFate {
        reached: Some(det),
        clicked: rng.random::<f64>() < eta,
        trajectory,
        eve,
    }
}
