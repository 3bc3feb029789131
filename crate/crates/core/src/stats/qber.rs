use serde::{Deserialize, Serialize};

use super::estimate::Estimate;
use crate::error::{Error, Result};

/// Exposures over which the interfering and non-interfering D1 counts were
/// collected, in any common unit (gates or seconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exposure {
    pub interfering: f64,
    pub non_interfering: f64,
}

impl Exposure {
    pub fn equal(x: f64) -> Self {
        Exposure {
            interfering: x,
            non_interfering: x,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.interfering > 0.0 && self.non_interfering > 0.0) {
            return Err(Error::InvalidArgument(format!("exposure must be positive, got {self:?}")));
        }
        Ok(())
    }
}

/// Background clicks on D1 per unit exposure, subtracted before the ratio.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Background {
    pub dark_rate: f64,
    pub accidental_rate: f64,
}

impl Background {
    pub fn total(&self) -> f64 {
        self.dark_rate + self.accidental_rate
    }
}

/// Accidental coincidence rate of two uncorrelated click streams within a
/// coincidence window.
pub fn accidental_rate(herald_rate_hz: f64, detector_rate_hz: f64, window_ns: f64) -> f64 {
    herald_rate_hz * detector_rate_hz * window_ns * 1e-9
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QberEstimate {
    /// D1 click rate in interfering settings, per unit exposure.
    pub p_d1_int: Estimate,
    pub p_d1_nint: Estimate,
    pub qber: Estimate,
    pub qber_corrected: Estimate,
    /// Background subtraction drove a rate below zero and was clamped.
    pub clamped: bool,
}

/// Ratio `x / (x + y)` with first-order uncertainty from independent
/// uncertainties of `x` and `y`.
fn ratio(x: Estimate, y: Estimate) -> Estimate {
    let s = x.value + y.value;
    if s <= 0.0 {
        return Estimate::exact(0.0);
    }
    let dx = y.value / (s * s);
    let dy = -x.value / (s * s);
    Estimate::new(x.value / s, ((dx * x.sigma).powi(2) + (dy * y.sigma).powi(2)).sqrt())
}

/// Error rate of the key: the share of D1 clicks that occur in interfering
/// settings, computed on exposure-normalized rates.
pub fn qber(c_int: f64, c_nint: f64, exposure: Exposure) -> Result<QberEstimate> {
    qber_corrected(c_int, c_nint, Background::default(), exposure)
}

/// As [`qber`], after subtracting the expected background from both rates.
/// Rates pushed below zero are clamped and flagged.
pub fn qber_corrected(c_int: f64, c_nint: f64, background: Background, exposure: Exposure) -> Result<QberEstimate> {
    exposure.validate()?;
    if !(c_int >= 0.0 && c_nint >= 0.0) {
        return Err(Error::InvalidArgument("counts must be non-negative".into()));
    }
    if c_int + c_nint <= 0.0 {
        return Err(Error::EmptyTally("no D1 clicks".into()));
    }
    if !(background.dark_rate >= 0.0 && background.accidental_rate >= 0.0) {
        return Err(Error::InvalidArgument("background rates must be non-negative".into()));
    }
    let rate = |c: f64, t: f64| Estimate::new(c / t, c.sqrt() / t);
    let p_int = rate(c_int, exposure.interfering);
    let p_nint = rate(c_nint, exposure.non_interfering);
    let raw = ratio(p_int, p_nint);

    let bg = background.total();
    let sub = |e: Estimate| Estimate::new(e.value - bg, e.sigma);
    let (ci, cn) = (sub(p_int), sub(p_nint));
    let clamped = ci.value < 0.0 || cn.value < 0.0;
    let clamp = |e: Estimate| Estimate::new(e.value.max(0.0), e.sigma);
    let corrected = ratio(clamp(ci), clamp(cn));
    Ok(QberEstimate {
        p_d1_int: p_int,
        p_d1_nint: p_nint,
        qber: raw,
        qber_corrected: corrected,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn reference_count_averages() {
        let q = qber(7.55, 56.0, Exposure::equal(1.0)).unwrap();
        assert_abs_diff_eq!(q.qber.value, 7.55 / 63.55, epsilon = 1e-15);
        assert_abs_diff_eq!(q.qber.value, 0.119, epsilon = 5e-4);
        assert_eq!(q.qber_corrected, q.qber);
        assert!(!q.clamped);
    }

    #[test]
    fn trivial_limits() {
        assert_eq!(qber(0.0, 10.0, Exposure::equal(1.0)).unwrap().qber.value, 0.0);
        assert_eq!(qber(10.0, 10.0, Exposure::equal(2.0)).unwrap().qber.value, 0.5);
        assert!(qber(0.0, 0.0, Exposure::equal(1.0)).is_err());
        assert!(qber(1.0, 1.0, Exposure::equal(-1.0)).is_err());
    }

    #[test]
    fn exposure_normalization() {
        // Twice the exposure on the interfering side halves its rate.
        let q = qber(20.0, 10.0, Exposure { interfering: 2.0, non_interfering: 1.0 }).unwrap();
        assert_eq!(q.qber.value, 0.5);
    }

    #[test]
    fn background_subtraction() {
        let bg = Background {
            dark_rate: 3.3 / 20.0,
            accidental_rate: 0.0,
        };
        let q = qber_corrected(7.55, 56.0, bg, Exposure::equal(20.0)).unwrap();
        let want = (7.55 - 3.3) / ((7.55 - 3.3) + (56.0 - 3.3));
        assert_abs_diff_eq!(q.qber_corrected.value, want, epsilon = 1e-12);
        assert_abs_diff_eq!(q.qber_corrected.value, 0.07, epsilon = 0.01);
    }

    #[test]
    fn background_exceeding_signal_clamps() {
        let bg = Background {
            dark_rate: 5.0,
            accidental_rate: 0.0,
        };
        let q = qber_corrected(3.0, 40.0, bg, Exposure::equal(1.0)).unwrap();
        assert!(q.clamped);
        assert_eq!(q.qber_corrected.value, 0.0);
    }

    #[test]
    fn accidental_rate_formula() {
        assert_abs_diff_eq!(accidental_rate(1e4, 1e3, 1.0), 0.01, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn uncertainty_shrinks_with_exposure(ci in 1.0f64..1e3, cn in 1.0f64..1e3, k in 2.0f64..100.0) {
            let a = qber(ci, cn, Exposure::equal(1.0)).unwrap();
            let b = qber(ci * k, cn * k, Exposure::equal(k)).unwrap();
            prop_assert!((a.qber.value - b.qber.value).abs() < 1e-12);
            prop_assert!((b.qber.sigma * k.sqrt() - a.qber.sigma).abs() < 1e-9);
            prop_assert!(a.qber.sigma >= 0.0);
        }
    }
}
