use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::visibility::FringeScan;
use crate::error::{Error, Result};
use crate::optics::{ApparatusConfig, Setting};
use crate::protocol::{Session, SessionTally, SettingPolicy};
use crate::rng::{child_id, stream};

const SCAN_STREAM: u64 = 0x5CA1;
const STABILITY_STREAM: u64 = 0x57AB;
const DRIFT_STREAM: u64 = 0xD81F;

/// Stepped path-difference scan at a fixed rotation setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub setting: Setting,
    pub start_um: f64,
    pub stop_um: f64,
    pub step_um: f64,
    pub dwell_s: f64,
}

impl ScanSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step_um > 0.0 && self.stop_um >= self.start_um && self.dwell_s > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "scan needs start <= stop, positive step and dwell, got {self:?}"
            )));
        }
        let n = ((self.stop_um - self.start_um) / self.step_um + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| self.start_um + i as f64 * self.step_um).collect())
    }
}

fn fixed_session(cfg: &ApparatusConfig, setting: Setting, dwell_s: f64, seed: u64, stream_id: u64) -> Result<SessionTally> {
    Session::new(cfg, dwell_s, seed)
        .policy(SettingPolicy::Fixed(setting))
        .stream(stream_id)
        .run()
}

/// Monte Carlo fringe scan: one fixed-setting session per point.
pub fn simulate_scan(cfg: &ApparatusConfig, spec: &ScanSpec, seed: u64) -> Result<FringeScan> {
    let points = spec.points()?;
    let tallies = points
        .par_iter()
        .enumerate()
        .map(|(i, &x)| fixed_session(&cfg.with_delta(x), spec.setting, spec.dwell_s, seed, child_id(SCAN_STREAM, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let counts = |d: usize| tallies.iter().map(|t| t.setting(spec.setting).clicks[d]).collect();
    Ok(FringeScan {
        setting: spec.setting,
        dwell_s: spec.dwell_s,
        wavelength_nm: cfg.wavelength_nm,
        coherence_length_um: cfg.coherence_length_um,
        displacements_um: points,
        counts_d0: counts(0),
        counts_d1: counts(1),
        counts_d2: counts(2),
    })
}

/// Slow drift of the path difference during a long acquisition.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftModel {
    #[default]
    None,
    Linear { um_per_s: f64 },
    /// Gaussian increments with standard deviation `um_per_sqrt_s * sqrt(dt)`.
    RandomWalk { um_per_sqrt_s: f64 },
}

impl DriftModel {
    /// Path-difference offset at the middle of each bin.
    fn offsets(&self, bins: usize, bin_s: f64, seed: u64) -> Result<Vec<f64>> {
        let mid = |i: usize| (i as f64 + 0.5) * bin_s;
        Ok(match *self {
            DriftModel::None => vec![0.0; bins],
            DriftModel::Linear { um_per_s } => (0..bins).map(|i| um_per_s * mid(i)).collect(),
            DriftModel::RandomWalk { um_per_sqrt_s } => {
                if !(um_per_sqrt_s >= 0.0) {
                    return Err(Error::InvalidArgument("random-walk strength must be non-negative".into()));
                }
                let mut rng = stream(seed, DRIFT_STREAM);
                let mut x = 0.0;
                (0..bins)
                    .map(|i| {
                        let dt = if i == 0 { 0.5 * bin_s } else { bin_s };
                        let sd = um_per_sqrt_s * dt.sqrt();
                        if sd > 0.0 {
                            x += Normal::new(0.0, sd).expect("finite sd").sample(&mut rng);
                        }
                        x
                    })
                    .collect()
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityTrace {
    pub setting: Setting,
    pub bin_s: f64,
    pub drift: DriftModel,
    pub bin_start_s: Vec<f64>,
    /// Path difference in effect during each bin.
    pub delta_um: Vec<f64>,
    pub counts_d0: Vec<u64>,
    pub counts_d1: Vec<u64>,
    pub counts_d2: Vec<u64>,
}

/// Per-bin counts at a fixed path difference over a long acquisition.
pub fn stability_trace(
    cfg: &ApparatusConfig,
    setting: Setting,
    total_s: f64,
    bin_s: f64,
    drift: DriftModel,
    seed: u64,
) -> Result<StabilityTrace> {
    if !(bin_s > 0.0 && total_s >= bin_s && total_s.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "stability trace needs total >= bin > 0, got total {total_s} s, bin {bin_s} s"
        )));
    }
    let bins = (total_s / bin_s + 1e-9).floor() as usize;
    let offsets = drift.offsets(bins, bin_s, seed)?;
    let deltas: Vec<f64> = offsets.iter().map(|o| cfg.path_delta_um + o).collect();
    let tallies = deltas
        .par_iter()
        .enumerate()
        .map(|(i, &d)| fixed_session(&cfg.with_delta(d), setting, bin_s, seed, child_id(STABILITY_STREAM, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let counts = |d: usize| tallies.iter().map(|t| t.setting(setting).clicks[d]).collect();
    Ok(StabilityTrace {
        setting,
        bin_s,
        drift,
        bin_start_s: (0..bins).map(|i| i as f64 * bin_s).collect(),
        delta_um: deltas,
        counts_d0: counts(0),
        counts_d1: counts(1),
        counts_d2: counts(2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> ApparatusConfig {
        let mut cfg = ApparatusConfig::ideal();
        cfg.herald_rate_hz = 200.0;
        cfg.mode_overlap.h = 0.9;
        cfg
    }

    #[test]
    fn scan_points_inclusive() {
        let spec = ScanSpec {
            setting: Setting::new(false, false),
            start_um: -1.0,
            stop_um: 1.0,
            step_um: 0.5,
            dwell_s: 1.0,
        };
        assert_eq!(spec.points().unwrap(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        let bad = ScanSpec { step_um: 0.0, ..spec };
        assert!(bad.points().is_err());
    }

    #[test]
    fn stability_rejects_bad_durations() {
        let cfg = small_cfg();
        let s = Setting::new(false, false);
        assert!(stability_trace(&cfg, s, 10.0, 0.0, DriftModel::None, 1).is_err());
        assert!(stability_trace(&cfg, s, 10.0, 20.0, DriftModel::None, 1).is_err());
    }

    #[test]
    fn zero_rate_gives_zero_trace() {
        let mut cfg = small_cfg();
        cfg.herald_rate_hz = 0.0;
        let t = stability_trace(&cfg, Setting::new(false, false), 100.0, 20.0, DriftModel::None, 1).unwrap();
        assert_eq!(t.counts_d0.len(), 5);
        assert!(t.counts_d0.iter().chain(&t.counts_d1).chain(&t.counts_d2).all(|&c| c == 0));
    }

    #[test]
    fn linear_drift_offsets() {
        let o = DriftModel::Linear { um_per_s: 0.01 }.offsets(3, 10.0, 0).unwrap();
        assert_eq!(o, vec![0.05, 0.15, 0.25]);
    }

    #[test]
    fn scan_is_deterministic() {
        let cfg = small_cfg();
        let spec = ScanSpec {
            setting: Setting::new(false, false),
            start_um: -1.0,
            stop_um: 1.0,
            step_um: 0.1,
            dwell_s: 1.0,
        };
        let a = simulate_scan(&cfg, &spec, 5).unwrap();
        let b = simulate_scan(&cfg, &spec, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.displacements_um.len(), 21);
    }
}
