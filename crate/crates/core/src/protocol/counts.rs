use serde::{Deserialize, Serialize};

use super::session::SessionTally;
use crate::error::{Error, Result};
use crate::optics::{round_distribution, ApparatusConfig, OutcomeDistribution, Setting};

/// Coincidence counts per setting, in [`Setting::TABLE_ORDER`], together
/// with the number of gates each was accumulated over. Either observed
/// (from a tally) or expected (from the closed-form model).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountTable {
    pub rounds: [f64; 4],
    /// `clicks[setting][detector]`.
    pub clicks: [[f64; 3]; 4],
}

impl CountTable {
    pub fn from_tally(tally: &SessionTally) -> Self {
        CountTable {
            rounds: tally.settings.map(|s| s.rounds as f64),
            clicks: tally.settings.map(|s| s.clicks.map(|c| c as f64)),
        }
    }

    /// Expected counts for photon click probabilities `dists` with
    /// independent per-gate dark counts from `cfg`.
    pub fn from_distributions(dists: &[OutcomeDistribution; 4], cfg: &ApparatusConfig, rounds: [f64; 4]) -> Self {
        let dark = cfg.dark_prob.as_array();
        let mut clicks = [[0.0; 3]; 4];
        for i in 0..4 {
            let p = dists[i].clicks();
            for d in 0..3 {
                clicks[i][d] = rounds[i] * (1.0 - (1.0 - p[d]) * (1.0 - dark[d]));
            }
        }
        CountTable { rounds, clicks }
    }

    /// Expected counts of the untouched apparatus.
    pub fn expected(cfg: &ApparatusConfig, rounds: [f64; 4]) -> Result<Self> {
        let mut dists = Vec::with_capacity(4);
        for s in Setting::TABLE_ORDER {
            dists.push(round_distribution(s.a, s.b, cfg)?);
        }
        let dists: [OutcomeDistribution; 4] = dists.try_into().expect("four settings");
        Ok(Self::from_distributions(&dists, cfg, rounds))
    }

    /// Per-gate click rate of one detector in one setting.
    pub fn rate(&self, setting: usize, det: usize) -> Result<f64> {
        if self.rounds[setting] <= 0.0 {
            return Err(Error::EmptyTally("a setting has no rounds".into()));
        }
        Ok(self.clicks[setting][det] / self.rounds[setting])
    }

    pub fn total_rounds(&self) -> f64 {
        self.rounds.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds.iter().any(|&r| r <= 0.0) {
            return Err(Error::EmptyTally("a setting has no rounds".into()));
        }
        let ok = self.rounds.iter().all(|r| r.is_finite())
            && self.clicks.iter().flatten().all(|c| c.is_finite() && *c >= 0.0);
        if !ok {
            return Err(Error::InvalidArgument("counts must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ideal_expected_counts() {
        let t = CountTable::expected(&ApparatusConfig::ideal(), [100.0; 4]).unwrap();
        assert_eq!(t.clicks[0], [100.0, 0.0, 0.0]);
        assert_eq!(t.clicks[1], [25.0, 25.0, 50.0]);
    }

    #[test]
    fn darks_add_to_empty_detectors() {
        let mut cfg = ApparatusConfig::ideal();
        cfg.dark_prob.d1 = 0.01;
        let t = CountTable::expected(&cfg, [100.0; 4]).unwrap();
        assert!((t.clicks[0][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_rounds_rejected() {
        let t = CountTable {
            rounds: [0.0, 1.0, 1.0, 1.0],
            clicks: [[0.0; 3]; 4],
        };
        assert!(t.validate().is_err());
        assert!(t.rate(0, 0).is_err());
    }
}
