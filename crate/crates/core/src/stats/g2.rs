use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::estimate::Estimate;
use crate::adversary::bisect_sign_change;
use crate::error::{Error, Result};
use crate::rng::stream;

/// Second-order correlation at zero delay of the heralded source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Estimate {
    pub g2: Estimate,
    /// No triple coincidence was seen; `g2` is the one-triple bound.
    pub upper_bound: bool,
}

/// Heralded Hanbury Brown-Twiss estimator
/// `g2(0) = triples * heralds / (coinc_a * coinc_b)`.
pub fn g2_zero(heralds: u64, coinc_a: u64, coinc_b: u64, triples: u64) -> Result<G2Estimate> {
    if heralds == 0 {
        return Err(Error::EmptyTally("no heralds".into()));
    }
    if coinc_a == 0 || coinc_b == 0 {
        return Err(Error::InvalidArgument("g2 needs coincidences on both HBT arms".into()));
    }
    let upper_bound = triples == 0;
    let t = triples.max(1) as f64;
    let (h, a, b) = (heralds as f64, coinc_a as f64, coinc_b as f64);
    let value = t * h / (a * b);
    let rel = (1.0 / t + 1.0 / h + 1.0 / a + 1.0 / b).sqrt();
    Ok(G2Estimate {
        g2: Estimate::new(value, value * rel),
        upper_bound,
    })
}

/// Heralded HBT measurement of the source: the heralded arm is split 50:50
/// onto two detectors with overall transmissions `transmission_a/b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HbtSetup {
    pub heralds: u64,
    pub transmission_a: f64,
    pub transmission_b: f64,
    /// Probability that a heralded gate carries two photons.
    pub multi_photon_leak: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HbtCounts {
    pub heralds: u64,
    pub coinc_a: u64,
    pub coinc_b: u64,
    pub triples: u64,
}

impl HbtSetup {
    fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("transmission_a", self.transmission_a),
            ("transmission_b", self.transmission_b),
            ("multi_photon_leak", self.multi_photon_leak),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }

    /// Per-photon probabilities of reaching detector A, detector B, or
    /// neither.
    fn photon_probs(&self) -> (f64, f64, f64) {
        let pa = 0.5 * self.transmission_a;
        let pb = 0.5 * self.transmission_b;
        (pa, pb, 1.0 - pa - pb)
    }
}

/// Expected `g2(0)` for threshold detectors at the given two-photon
/// probability.
pub fn expected_g2(multi_photon_leak: f64, transmission_a: f64, transmission_b: f64) -> f64 {
    let l = multi_photon_leak;
    let (pa, pb) = (0.5 * transmission_a, 0.5 * transmission_b);
    let pn = 1.0 - pa - pb;
    let p_a = (1.0 - l) * pa + l * (pa * pa + 2.0 * pa * (pn + pb));
    let p_b = (1.0 - l) * pb + l * (pb * pb + 2.0 * pb * (pn + pa));
    let p_ab = l * 2.0 * pa * pb;
    p_ab / (p_a * p_b)
}

/// Two-photon probability that produces the requested `g2(0)`.
pub fn leak_for_g2(g2: f64, transmission_a: f64, transmission_b: f64) -> Result<f64> {
    if !(g2 >= 0.0) {
        return Err(Error::InvalidArgument(format!("g2 must be non-negative, got {g2}")));
    }
    if g2 == 0.0 {
        return Ok(0.0);
    }
    bisect_sign_change(
        |l| Ok(expected_g2(l, transmission_a, transmission_b) - g2),
        0.0,
        1.0,
        1e-18,
    )?
    .ok_or_else(|| Error::InvalidArgument(format!("g2 {g2} is not reachable")))
}

fn binomial<R: rand::Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("valid binomial").sample(rng)
}

/// Samples n draws from a categorical distribution by sequential binomials.
fn multinomial<R: rand::Rng + ?Sized, const K: usize>(n: u64, probs: [f64; K], rng: &mut R) -> [u64; K] {
    let mut out = [0u64; K];
    let mut left = n;
    let mut mass = 1.0;
    for i in 0..K - 1 {
        let p = if mass > 0.0 { (probs[i] / mass).clamp(0.0, 1.0) } else { 0.0 };
        out[i] = binomial(left, p, rng);
        left -= out[i];
        mass -= probs[i];
    }
    out[K - 1] = left;
    out
}

/// Simulates the HBT run gate by gate, aggregated: gate outcomes are
/// independent, so the outcome counts are multinomial.
pub fn simulate_hbt(setup: &HbtSetup, seed: u64, stream_id: u64) -> Result<HbtCounts> {
    setup.validate()?;
    let mut rng = stream(seed, stream_id);
    let doubles = binomial(setup.heralds, setup.multi_photon_leak, &mut rng);
    let singles = setup.heralds - doubles;
    let (pa, pb, pn) = setup.photon_probs();

    let [a1, b1, _] = multinomial(singles, [pa, pb, pn], &mut rng);
    // Two photons: both arms, only A, only B, neither.
    let [ab, a2, b2, _] = multinomial(
        doubles,
        [
            2.0 * pa * pb,
            pa * pa + 2.0 * pa * pn,
            pb * pb + 2.0 * pb * pn,
            pn * pn,
        ],
        &mut rng,
    );
    Ok(HbtCounts {
        heralds: setup.heralds,
        coinc_a: a1 + a2 + ab,
        coinc_b: b1 + b2 + ab,
        triples: ab,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn zero_triples_gives_bound() {
        let e = g2_zero(1_000_000, 180, 200, 0).unwrap();
        assert!(e.upper_bound);
        assert_relative_eq!(e.g2.value, 1e6 / (180.0 * 200.0));
    }

    #[test]
    fn formula_round_trip() {
        let (h, a, b) = (1_000_000u64, 180u64, 180u64);
        let target = 7e-9f64;
        // triples that would give the target g2 for these singles
        let triples_exact = target * (a * b) as f64 / h as f64;
        let back = triples_exact * h as f64 / (a * b) as f64;
        assert_relative_eq!(back, target, max_relative = 1e-12);
        let e = g2_zero(4_000_000_000, 2_000_000_000, 1_000_000_000, 7).unwrap();
        assert_relative_eq!(e.g2.value, 7.0 * 4e9 / 2e18, max_relative = 1e-12);
        assert!(!e.upper_bound);
    }

    #[test]
    fn invalid_inputs() {
        assert!(g2_zero(0, 1, 1, 0).is_err());
        assert!(g2_zero(10, 0, 1, 0).is_err());
    }

    #[test]
    fn leak_calibration_inverts_expectation() {
        let l = leak_for_g2(7e-9, 0.5, 0.4).unwrap();
        assert_relative_eq!(expected_g2(l, 0.5, 0.4), 7e-9, max_relative = 1e-6);
        assert_relative_eq!(l, 3.5e-9, max_relative = 1e-3);
        assert_eq!(leak_for_g2(0.0, 0.5, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn no_leak_no_triples() {
        let setup = HbtSetup {
            heralds: 1_000_000_000,
            transmission_a: 0.5,
            transmission_b: 0.5,
            multi_photon_leak: 0.0,
        };
        let c = simulate_hbt(&setup, 1, 0).unwrap();
        assert_eq!(c.triples, 0);
        let sigma = (1e9f64 * 0.25 * 0.75).sqrt();
        assert!((c.coinc_a as f64 - 2.5e8).abs() < 5.0 * sigma);
    }

    #[test]
    fn large_leak_recovered() {
        let setup = HbtSetup {
            heralds: 10_000_000,
            transmission_a: 0.6,
            transmission_b: 0.6,
            multi_photon_leak: 0.01,
        };
        let c = simulate_hbt(&setup, 3, 0).unwrap();
        let e = g2_zero(c.heralds, c.coinc_a, c.coinc_b, c.triples).unwrap();
        let want = expected_g2(0.01, 0.6, 0.6);
        assert!(e.g2.agrees_with(want, 3.0), "{e:?} vs {want}");
    }

    proptest! {
        #[test]
        fn scale_invariant(h in 1u64..1_000_000, a in 1u64..10_000, b in 1u64..10_000, t in 1u64..100, k in 2u64..50) {
            let x = g2_zero(h, a, b, t).unwrap();
            let y = g2_zero(h * k, a * k, b * k, t * k).unwrap();
            prop_assert!((x.g2.value - y.g2.value).abs() <= 1e-12 * x.g2.value);
            prop_assert!((y.g2.sigma * (k as f64).sqrt() - x.g2.sigma).abs() <= 1e-9 * x.g2.sigma);
        }
    }
}
