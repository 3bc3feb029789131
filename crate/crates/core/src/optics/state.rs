//! Single-photon state over the four interferometer modes and the optical
//! elements acting on it.
//!
//! Conventions: the photon enters the first beam splitter through the port
//! whose transmitted output is arm B, so a fresh photon is written as the
//! mode `(B, pol)` before the splitter. Reflection carries a factor `i`.
//! After the second splitter arm A feeds D0 and arm B feeds D1.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Amplitudes below this weight are treated as absent when deciding which
/// arms a photon occupies.
pub const SUPPORT_EPS: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Path {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    /// Polarization produced by rotating H by `bit * pi/2`.
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Polarization::V
        } else {
            Polarization::H
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Polarization::H => Polarization::V,
            Polarization::V => Polarization::H,
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarization::H => "H",
            Polarization::V => "V",
        })
    }
}

/// Half-wave plate setting. The protocol only ever rotates by 0 or pi/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HwpAngle {
    Zero,
    HalfPi,
}

impl HwpAngle {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            HwpAngle::HalfPi
        } else {
            HwpAngle::Zero
        }
    }

    /// Accepts only the two protocol settings (to 1e-9 rad).
    pub fn from_radians(theta: f64) -> Result<Self> {
        if theta.abs() < 1e-9 {
            Ok(HwpAngle::Zero)
        } else if (theta - PI / 2.0).abs() < 1e-9 {
            Ok(HwpAngle::HalfPi)
        } else {
            Err(Error::InvalidAngle(theta))
        }
    }

    pub fn radians(self) -> f64 {
        match self {
            HwpAngle::Zero => 0.0,
            HwpAngle::HalfPi => PI / 2.0,
        }
    }
}

/// Set of arms, used for trajectory records.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathSet {
    pub a: bool,
    pub b: bool,
}

impl PathSet {
    pub const EMPTY: PathSet = PathSet { a: false, b: false };

    pub fn only(path: Path) -> Self {
        match path {
            Path::A => PathSet { a: true, b: false },
            Path::B => PathSet { a: false, b: true },
        }
    }

    pub fn union(self, other: PathSet) -> Self {
        PathSet {
            a: self.a || other.a,
            b: self.b || other.b,
        }
    }

    pub fn contains(self, path: Path) -> bool {
        match path {
            Path::A => self.a,
            Path::B => self.b,
        }
    }
}

fn index(path: Path, pol: Polarization) -> usize {
    (match path {
        Path::A => 0,
        Path::B => 2,
    }) + match pol {
        Polarization::H => 0,
        Polarization::V => 1,
    }
}

const MODES: [(Path, Polarization); 4] = [
    (Path::A, Polarization::H),
    (Path::A, Polarization::V),
    (Path::B, Polarization::H),
    (Path::B, Polarization::V),
];

/// One photon: amplitudes over (arm, polarization) plus the probability
/// weight already removed by loss or diversion. `norm() + lost == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonState {
    amp: [Complex64; 4],
    lost: f64,
}

impl PhotonState {
    /// A photon entirely in one mode.
    pub fn single(path: Path, pol: Polarization) -> Self {
        let mut amp = [Complex64::new(0.0, 0.0); 4];
        amp[index(path, pol)] = Complex64::new(1.0, 0.0);
        PhotonState { amp, lost: 0.0 }
    }

    /// The photon at the interferometer input, before the first splitter.
    pub fn input(pol: Polarization) -> Self {
        Self::single(Path::B, pol)
    }

    /// Builds a state from raw amplitudes ordered (A,H), (A,V), (B,H), (B,V).
    /// The remaining weight is booked as lost.
    pub fn from_amplitudes(amp: [Complex64; 4]) -> Result<Self> {
        let norm: f64 = amp.iter().map(|c| c.norm_sqr()).sum();
        if !(norm <= 1.0 + 1e-12) {
            return Err(Error::InvalidState(format!("norm {norm} exceeds 1")));
        }
        Ok(PhotonState {
            amp,
            lost: (1.0 - norm).max(0.0),
        })
    }

    pub fn vacuum() -> Self {
        PhotonState {
            amp: [Complex64::new(0.0, 0.0); 4],
            lost: 1.0,
        }
    }

    pub fn amp(&self, path: Path, pol: Polarization) -> Complex64 {
        self.amp[index(path, pol)]
    }

    pub fn amplitudes(&self) -> &[Complex64; 4] {
        &self.amp
    }

    pub fn lost(&self) -> f64 {
        self.lost
    }

    /// Sum of squared amplitudes still in the interferometer.
    pub fn norm(&self) -> f64 {
        self.amp.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn path_weight(&self, path: Path) -> f64 {
        self.amp(path, Polarization::H).norm_sqr() + self.amp(path, Polarization::V).norm_sqr()
    }

    pub fn support(&self) -> PathSet {
        PathSet {
            a: self.path_weight(Path::A) > SUPPORT_EPS,
            b: self.path_weight(Path::B) > SUPPORT_EPS,
        }
    }

    pub fn is_vacuum(&self) -> bool {
        self.norm() <= SUPPORT_EPS
    }

    /// Rescales the remaining amplitudes to unit norm, clearing `lost`.
    /// Used on Monte Carlo branches after a sampled "not lost" outcome.
    pub fn renormalized(&self) -> Self {
        let n = self.norm();
        if n <= SUPPORT_EPS {
            return Self::vacuum();
        }
        let s = 1.0 / n.sqrt();
        PhotonState {
            amp: self.amp.map(|c| c * s),
            lost: 0.0,
        }
    }

    /// Removes the amplitude of one arm (projective which-path outcome),
    /// booking its weight as lost.
    pub fn without_path(&self, path: Path) -> Self {
        let mut out = *self;
        for pol in [Polarization::H, Polarization::V] {
            let i = index(path, pol);
            out.lost += out.amp[i].norm_sqr();
            out.amp[i] = Complex64::new(0.0, 0.0);
        }
        out
    }

    /// Keeps only one arm, renormalized: the post-measurement state after
    /// finding the photon there.
    pub fn collapse_to(&self, path: Path) -> Self {
        let other = match path {
            Path::A => Path::B,
            Path::B => Path::A,
        };
        self.without_path(other).renormalized()
    }

    /// Samples which arm the photon is found in, weighted by |amp|^2.
    /// Only meaningful for a non-vacuum state.
    pub fn sample_path<R: Rng + ?Sized>(&self, rng: &mut R) -> Path {
        let wa = self.path_weight(Path::A);
        let total = wa + self.path_weight(Path::B);
        if rng.random::<f64>() * total < wa {
            Path::A
        } else {
            Path::B
        }
    }

    /// Monte Carlo resolution of accumulated loss: returns the renormalized
    /// state with probability `norm()`, otherwise `None`.
    pub fn sample_survival<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Self> {
        let n = self.norm();
        if n >= 1.0 - 1e-15 {
            return Some(*self);
        }
        if rng.random::<f64>() < n {
            Some(self.renormalized())
        } else {
            None
        }
    }

    pub fn iter_modes(&self) -> impl Iterator<Item = ((Path, Polarization), Complex64)> + '_ {
        MODES.iter().copied().zip(self.amp.iter().copied())
    }
}

/// 50:50 splitter, `i` on reflection. Acts on the arm index only.
pub fn apply_bs(state: &PhotonState) -> PhotonState {
    let r = Complex64::new(0.0, FRAC_1_SQRT_2);
    let t = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let mut out = *state;
    for pol in [Polarization::H, Polarization::V] {
        let a = state.amp(Path::A, pol);
        let b = state.amp(Path::B, pol);
        out.amp[index(Path::A, pol)] = t * a + r * b;
        out.amp[index(Path::B, pol)] = r * a + t * b;
    }
    out
}

/// Half-wave plate on one arm: identity at 0, H<->V swap at pi/2.
pub fn apply_hwp(state: &PhotonState, path: Path, angle: HwpAngle) -> PhotonState {
    let mut out = *state;
    if angle == HwpAngle::HalfPi {
        out.amp.swap(index(path, Polarization::H), index(path, Polarization::V));
    }
    out
}

/// Same as [`apply_hwp`] but taking the angle in radians; rejects anything
/// other than the two protocol settings.
pub fn apply_hwp_radians(state: &PhotonState, path: Path, theta: f64) -> Result<PhotonState> {
    Ok(apply_hwp(state, path, HwpAngle::from_radians(theta)?))
}

/// Optical delay: multiplies arm-B amplitudes by `exp(i 2 pi delta / lambda)`.
/// Both lengths in the same unit.
pub fn apply_phase(state: &PhotonState, delta: f64, wavelength: f64) -> PhotonState {
    let phase = Complex64::from_polar(1.0, 2.0 * PI * delta / wavelength);
    let mut out = *state;
    for pol in [Polarization::H, Polarization::V] {
        out.amp[index(Path::B, pol)] *= phase;
    }
    out
}

/// Power transmittance `t` on one arm (both polarizations).
pub fn attenuate(state: &PhotonState, path: Path, t: f64) -> PhotonState {
    let mut out = *state;
    let s = t.clamp(0.0, 1.0).sqrt();
    for pol in [Polarization::H, Polarization::V] {
        let i = index(path, pol);
        out.lost += out.amp[i].norm_sqr() * (1.0 - s * s);
        out.amp[i] *= s;
    }
    out
}

/// Power transmittance on a single (arm, polarization) mode.
pub fn attenuate_mode(state: &PhotonState, path: Path, pol: Polarization, t: f64) -> PhotonState {
    let mut out = *state;
    let s = t.clamp(0.0, 1.0).sqrt();
    let i = index(path, pol);
    out.lost += out.amp[i].norm_sqr() * (1.0 - s * s);
    out.amp[i] *= s;
    out
}

/// Analytic action of Bob's polarizing splitter on arm B.
///
/// V is routed to D2 and H continues to the mirror; a fraction `leakage`
/// (inverse extinction ratio) of each polarization takes the wrong port.
/// Returns the continuing state, with the diverted weight moved to `lost`,
/// and the diverted weight itself.
pub fn pbs_split(state: &PhotonState, leakage: f64) -> (PhotonState, f64) {
    let leak = leakage.clamp(0.0, 1.0);
    let before = state.lost;
    let out = attenuate_mode(state, Path::B, Polarization::V, leak);
    let out = attenuate_mode(&out, Path::B, Polarization::H, 1.0 - leak);
    let diverted = out.lost - before;
    (out, diverted)
}

/// Monte Carlo branch of the PBS followed by D2.
///
/// Samples whether the photon is diverted to D2 (probability equal to the
/// diverted weight of a normalized state). A diverted photon clicks D2 with
/// probability `eta_d2` and leaves the interferometer; otherwise the
/// continuing state is returned renormalized.
pub fn apply_pbs_and_d2<R: Rng + ?Sized>(
    state: &PhotonState,
    leakage: f64,
    eta_d2: f64,
    rng: &mut R,
) -> (PhotonState, bool) {
    let (passed, diverted) = pbs_split(state, leakage);
    let total = state.norm();
    if total <= SUPPORT_EPS {
        return (PhotonState::vacuum(), false);
    }
    if rng.random::<f64>() * total < diverted {
        let click = rng.random::<f64>() < eta_d2;
        (PhotonState::vacuum(), click)
    } else {
        (passed.renormalized(), false)
    }
}

/// Second splitter plus detection probabilities at D0 (arm A output) and D1
/// (arm B output), before detector efficiency.
pub fn output_weights(state: &PhotonState) -> (f64, f64) {
    let out = apply_bs(state);
    (out.path_weight(Path::A), out.path_weight(Path::B))
}

/// Gaussian fringe envelope with FWHM `coherence_length`:
/// `exp(-4 ln2 (delta / L)^2)`.
pub fn envelope(delta: f64, coherence_length: f64) -> Result<f64> {
    if !(coherence_length > 0.0) || !coherence_length.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "coherence length must be positive, got {coherence_length}"
        )));
    }
    let x = delta / coherence_length;
    Ok((-4.0 * std::f64::consts::LN_2 * x * x).exp())
}
