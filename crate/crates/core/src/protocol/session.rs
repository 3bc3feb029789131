use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::round::{simulate_round_with, ClickCause, RoundRecord, SettingPolicy, SiftClass};
use crate::error::{Error, Result};
use crate::optics::{ApparatusConfig, ChannelTap, Detector, NoTap, Setting};
use crate::rng::{child_id, stream, BLOCK_ROUNDS};

/// Bit string serialized as a compact `"0110..."` text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BitString(pub Vec<bool>);

impl BitString {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit)
    }

    pub fn mismatches(&self, other: &BitString) -> usize {
        self.0.iter().zip(other.0.iter()).filter(|(x, y)| x != y).count()
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let text: String = self.0.iter().map(|&b| if b { '1' } else { '0' }).collect();
        s.serialize_str(&text)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(serde::de::Error::custom(format!("invalid bit {other:?}"))),
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(BitString)
    }
}

/// Coincidence counters for one rotation setting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettingCounts {
    /// Heralded gates run with this setting.
    pub rounds: u64,
    /// Gates in which at least one detector fired.
    pub detected_rounds: u64,
    /// Coincidence counts C_D0, C_D1, C_D2 (each detector counted
    /// independently, as a time tagger does).
    pub clicks: [u64; 3],
    /// Clicks caused by a dark count with no photon at that detector.
    pub dark_only_clicks: [u64; 3],
    pub multi_click_rounds: u64,
}

impl SettingCounts {
    fn merge(&mut self, o: &SettingCounts) {
        self.rounds += o.rounds;
        self.detected_rounds += o.detected_rounds;
        self.multi_click_rounds += o.multi_click_rounds;
        for i in 0..3 {
            self.clicks[i] += o.clicks[i];
            self.dark_only_clicks[i] += o.dark_only_clicks[i];
        }
    }

    pub fn count(&self, det: Detector) -> u64 {
        self.clicks[det.index()]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiftCounts {
    pub key_bit: u64,
    pub eve_check_d0: u64,
    pub eve_check_d2: u64,
    pub error_announced: u64,
    pub discard: u64,
}

/// Bookkeeping for the counterfactual property of key rounds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CarrierCounts {
    pub key_rounds: u64,
    /// Key rounds whose D1 click came from a photon that occupied arm B.
    pub key_rounds_carrier_in_b: u64,
    /// Key rounds where D1 fired on a dark count only.
    pub key_rounds_dark_only: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EveCounts {
    /// Channel measurements performed.
    pub measurements: u64,
    /// Measurements that found the photon in the channel.
    pub photons_found: u64,
    /// Key rounds in which Eve learned the prepared polarization.
    pub key_bits_known: u64,
}

/// Accumulated result of one or more sessions. Merging is associative;
/// counters also commute, key strings concatenate in merge order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionTally {
    pub duration_s: f64,
    pub heralds: u64,
    /// Indexed by [`Setting::table_index`].
    pub settings: [SettingCounts; 4],
    pub key_alice: BitString,
    pub key_bob: BitString,
    pub error_count: u64,
    pub sift: SiftCounts,
    pub carrier: CarrierCounts,
    pub eve: EveCounts,
    /// Photons sent into the channel outside any gate (unshuttered source).
    pub unheralded_leaks: u64,
}

impl SessionTally {
    pub fn setting(&self, s: Setting) -> &SettingCounts {
        &self.settings[s.table_index()]
    }

    pub fn is_empty(&self) -> bool {
        self.heralds == 0
    }

    pub fn detected_rounds(&self) -> u64 {
        self.settings.iter().map(|s| s.detected_rounds).sum()
    }

    pub fn record(&mut self, r: &RoundRecord) {
        self.heralds += 1;
        let setting = r.setting();
        let counts = &mut self.settings[setting.table_index()];
        counts.rounds += 1;
        let mut fired = 0;
        for det in Detector::ALL {
            if let Some(cause) = r.click(det) {
                fired += 1;
                counts.clicks[det.index()] += 1;
                if cause == ClickCause::Dark {
                    counts.dark_only_clicks[det.index()] += 1;
                }
            }
        }
        if fired > 0 {
            counts.detected_rounds += 1;
        }
        if fired > 1 {
            counts.multi_click_rounds += 1;
        }
        for obs in r.eve_observations() {
            self.eve.measurements += 1;
            if obs.found.is_some() {
                self.eve.photons_found += 1;
            }
        }
        match r.sift {
            SiftClass::KeyBit => {
                self.sift.key_bit += 1;
                let (alice, bob) = r.key_bits().expect("key round");
                self.key_alice.push(alice);
                self.key_bob.push(bob);
                self.carrier.key_rounds += 1;
                if r.click(Detector::D1) == Some(ClickCause::Dark) {
                    self.carrier.key_rounds_dark_only += 1;
                }
                if !r.d1_confined_to_alice() {
                    self.carrier.key_rounds_carrier_in_b += 1;
                }
                if r.eve_observations().any(|o| o.found.is_some()) {
                    self.eve.key_bits_known += 1;
                }
            }
            SiftClass::EveCheckD0 => self.sift.eve_check_d0 += 1,
            SiftClass::EveCheckD2 => self.sift.eve_check_d2 += 1,
            SiftClass::ErrorAnnounced => {
                self.sift.error_announced += 1;
                self.error_count += 1;
            }
            SiftClass::Discard => self.sift.discard += 1,
        }
    }

    /// Adds the counts of `other`; durations add as well.
    pub fn merge(&mut self, other: &SessionTally) {
        self.duration_s += other.duration_s;
        self.merge_counts(other);
    }

    /// Adds counts without touching the duration (for blocks of one session).
    fn merge_counts(&mut self, o: &SessionTally) {
        self.heralds += o.heralds;
        for (s, t) in self.settings.iter_mut().zip(o.settings.iter()) {
            s.merge(t);
        }
        self.key_alice.0.extend_from_slice(&o.key_alice.0);
        self.key_bob.0.extend_from_slice(&o.key_bob.0);
        self.error_count += o.error_count;
        self.sift.key_bit += o.sift.key_bit;
        self.sift.eve_check_d0 += o.sift.eve_check_d0;
        self.sift.eve_check_d2 += o.sift.eve_check_d2;
        self.sift.error_announced += o.sift.error_announced;
        self.sift.discard += o.sift.discard;
        self.carrier.key_rounds += o.carrier.key_rounds;
        self.carrier.key_rounds_carrier_in_b += o.carrier.key_rounds_carrier_in_b;
        self.carrier.key_rounds_dark_only += o.carrier.key_rounds_dark_only;
        self.eve.measurements += o.eve.measurements;
        self.eve.photons_found += o.eve.photons_found;
        self.eve.key_bits_known += o.eve.key_bits_known;
        self.unheralded_leaks += o.unheralded_leaks;
    }
}

/// Draws from Poisson(mean), returning 0 for a zero mean.
pub(crate) fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0)
}

/// A timed acquisition: heralded gates arrive as a Poisson process.
#[derive(Debug, Clone)]
pub struct Session<'a, T = NoTap> {
    pub cfg: &'a ApparatusConfig,
    pub duration_s: f64,
    pub policy: SettingPolicy,
    pub tap: &'a T,
    pub seed: u64,
    /// Distinguishes independent sessions sharing one seed.
    pub stream: u64,
}

impl<'a> Session<'a, NoTap> {
    pub fn new(cfg: &'a ApparatusConfig, duration_s: f64, seed: u64) -> Self {
        Session {
            cfg,
            duration_s,
            policy: SettingPolicy::Random,
            tap: &NoTap,
            seed,
            stream: 0,
        }
    }
}

impl<'a, T: ChannelTap + Sync> Session<'a, T> {
    pub fn with_tap<U: ChannelTap + Sync>(self, tap: &'a U) -> Session<'a, U> {
        Session {
            cfg: self.cfg,
            duration_s: self.duration_s,
            policy: self.policy,
            tap,
            seed: self.seed,
            stream: self.stream,
        }
    }

    pub fn policy(mut self, policy: SettingPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn run(&self) -> Result<SessionTally> {
        self.execute(false).map(|(t, _)| t)
    }

    /// Runs the session and also returns every round record, in order.
    pub fn run_with_records(&self) -> Result<(SessionTally, Vec<RoundRecord>)> {
        self.execute(true)
    }

    fn execute(&self, keep: bool) -> Result<(SessionTally, Vec<RoundRecord>)> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "session duration must be positive, got {}",
                self.duration_s
            )));
        }
        self.cfg.validate()?;
        let mut rng = stream(self.seed, self.stream);
        let heralds = poisson(self.cfg.herald_rate_hz * self.duration_s, &mut rng);
        let leaks = poisson(self.cfg.effective_unheralded_rate() * self.duration_s, &mut rng);

        let n_blocks = heralds.div_ceil(BLOCK_ROUNDS);
        let blocks: Vec<(SessionTally, Vec<RoundRecord>)> = (0..n_blocks)
            .into_par_iter()
            .map(|block| {
                let mut rng = stream(self.seed, child_id(self.stream, block));
                let start = block * BLOCK_ROUNDS;
                let end = (start + BLOCK_ROUNDS).min(heralds);
                let mut tally = SessionTally::default();
                let mut records = Vec::new();
                for id in start..end {
                    let r = simulate_round_with(self.cfg, self.policy, self.tap, id, &mut rng);
                    tally.record(&r);
                    if keep {
                        records.push(r);
                    }
                }
                (tally, records)
            })
            .collect();

        let mut tally = SessionTally {
            duration_s: self.duration_s,
            unheralded_leaks: leaks,
            ..Default::default()
        };
        let mut records = Vec::new();
        for (t, r) in blocks {
            tally.merge_counts(&t);
            records.extend(r);
        }
        Ok((tally, records))
    }
}

/// Random-setting session with an untouched channel.
pub fn run_session(cfg: &ApparatusConfig, duration_s: f64, seed: u64) -> Result<SessionTally> {
    Session::new(cfg, duration_s, seed).run()
}
