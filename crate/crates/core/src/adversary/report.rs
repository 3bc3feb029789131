use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::margins::{delta_i_ae, m_intercept_resend, m_time_shift};
use crate::error::{Error, Result};
use crate::optics::ApparatusConfig;
use crate::protocol::{CountTable, SessionTally};
use crate::stats::{propagate_poisson, Estimate};

const INTERFERING: [usize; 2] = [0, 2];
const KEY: [usize; 2] = [1, 3];

/// Event class the margin probabilities are normalized to. Rates are first
/// taken per gate within each setting, then averaged uniformly over the four
/// settings, so random-setting and fixed-setting acquisitions agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Per heralded gate.
    Heralded,
    /// Per gate with a click on any detector.
    Conclusive,
    /// P_D1 per gate of a key setting that ended at D0 or D1; P_e1 is P_D1
    /// times the QBER; the D2 terms per conclusive gate. This mixed reading
    /// is chosen because it reproduces the reference margins, not because
    /// it is derived from the margin formulas.
    #[default]
    ConclusiveKey,
}

impl Normalization {
    pub const ALL: [Normalization; 3] = [
        Normalization::Heralded,
        Normalization::Conclusive,
        Normalization::ConclusiveKey,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Normalization::Heralded => "heralded",
            Normalization::Conclusive => "conclusive",
            Normalization::ConclusiveKey => "conclusive-key",
        }
    }

    /// Whether the normalization was fitted to reported values rather than
    /// derived.
    pub fn is_reverse_engineered(self) -> bool {
        self == Normalization::ConclusiveKey
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Normalization::ALL
            .into_iter()
            .find(|n| n.tag() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown normalization {s:?}; use heralded, conclusive or conclusive-key"
                ))
            })
    }
}

/// Inputs of the security margins that do not come from counts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecurityOptions {
    pub normalization: Normalization,
    /// Overrides the dark-count estimate of gamma.
    pub gamma: Option<f64>,
    /// Overrides the detector efficiency taken from the configuration.
    pub eta: Option<f64>,
}

impl SecurityOptions {
    pub fn new(normalization: Normalization) -> Self {
        SecurityOptions {
            normalization,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaSource {
    DarkCounts,
    User,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecurityReport {
    pub normalization: Normalization,
    pub reverse_engineered: bool,
    pub p_d1: f64,
    pub p_e1: f64,
    pub p_d2: f64,
    pub p_e2: f64,
    pub qber: Estimate,
    pub gamma: f64,
    pub gamma_source: GammaSource,
    pub eta: f64,
    pub m_ir: Estimate,
    pub delta_i_ae: f64,
    pub m_ts: Estimate,
}

#[derive(Debug, Clone, Copy)]
struct Terms {
    p_d1: f64,
    p_e1: f64,
    p_d2: f64,
    p_e2: f64,
    gamma: f64,
    qber: f64,
}

fn sum_over(idx: &[usize], f: impl Fn(usize) -> f64) -> f64 {
    idx.iter().map(|&i| f(i)).sum()
}

/// Probability terms from flattened counts `clicks[4 * 3]` and gate numbers.
fn terms(clicks: &[f64], rounds: &[f64; 4], dark_d1: f64, norm: Normalization) -> Result<Terms> {
    let r = |s: usize, d: usize| clicks[3 * s + d] / rounds[s];
    let all = [0, 1, 2, 3];
    let d1_all = sum_over(&all, |s| r(s, 1));
    let d1_int = sum_over(&INTERFERING, |s| r(s, 1));
    let d2_all = sum_over(&all, |s| r(s, 2));
    let d2_int = sum_over(&INTERFERING, |s| r(s, 2));
    let conclusive = sum_over(&all, |s| r(s, 0) + r(s, 1) + r(s, 2));
    if d1_all <= 0.0 {
        return Err(Error::EmptyTally("no D1 clicks recorded".into()));
    }
    let qber = d1_int / d1_all;
    let dark_key = KEY.len() as f64 * dark_d1;
    let t = match norm {
        Normalization::Heralded => Terms {
            p_d1: d1_all / 4.0,
            p_e1: d1_int / 4.0,
            p_d2: d2_all / 4.0,
            p_e2: d2_int / 4.0,
            gamma: dark_key / 4.0,
            qber,
        },
        Normalization::Conclusive => Terms {
            p_d1: d1_all / conclusive,
            p_e1: d1_int / conclusive,
            p_d2: d2_all / conclusive,
            p_e2: d2_int / conclusive,
            gamma: dark_key / conclusive,
            qber,
        },
        Normalization::ConclusiveKey => {
            let alice_key = sum_over(&KEY, |s| r(s, 0) + r(s, 1));
            let p_d1 = sum_over(&KEY, |s| r(s, 1)) / alice_key;
            Terms {
                p_d1,
                p_e1: p_d1 * qber,
                p_d2: d2_all / conclusive,
                p_e2: d2_int / conclusive,
                gamma: dark_key / alice_key,
                qber,
            }
        }
    };
    if t.p_e1 > t.p_d1 {
        return Err(Error::InvalidArgument(format!(
            "normalization {norm} gives P_e1 {} above P_D1 {}",
            t.p_e1, t.p_d1
        )));
    }
    Ok(t)
}

/// Detector efficiency entering the time-shift correction: the weakest
/// output detector.
pub fn time_shift_efficiency(cfg: &ApparatusConfig) -> f64 {
    cfg.efficiency.d0.min(cfg.efficiency.d1).min(cfg.efficiency.d2)
}

/// Security margins from observed or expected counts.
pub fn security_report_from_counts(
    table: &CountTable,
    cfg: &ApparatusConfig,
    opts: &SecurityOptions,
) -> Result<SecurityReport> {
    table.validate()?;
    cfg.validate()?;
    let eta = opts.eta.unwrap_or_else(|| time_shift_efficiency(cfg));
    let norm = opts.normalization;
    let clicks: Vec<f64> = table.clicks.iter().flatten().copied().collect();
    let rounds = table.rounds;
    let dark_d1 = cfg.dark_prob.d1;

    let eval = |c: &[f64]| -> Result<(Terms, f64, f64, f64)> {
        let mut t = terms(c, &rounds, dark_d1, norm)?;
        if let Some(g) = opts.gamma {
            t.gamma = g;
        }
        let m_ir = m_intercept_resend(t.p_d1, t.p_e1)?;
        let di = delta_i_ae(eta, t.p_d2, t.p_e2)?;
        let m_ts = m_time_shift(m_ir, t.gamma, eta, t.p_d2, t.p_e2)?;
        Ok((t, m_ir, di, m_ts))
    };
    let (t, m_ir, di, m_ts) = eval(&clicks)?;
    let pick = |k: usize| {
        move |c: &[f64]| match eval(c) {
            Ok((t, m_ir, _, m_ts)) => [t.qber, m_ir, m_ts][k],
            Err(_) => f64::NAN,
        }
    };
    Ok(SecurityReport {
        normalization: norm,
        reverse_engineered: norm.is_reverse_engineered(),
        p_d1: t.p_d1,
        p_e1: t.p_e1,
        p_d2: t.p_d2,
        p_e2: t.p_e2,
        qber: Estimate::new(t.qber, propagate_poisson(&clicks, pick(0))),
        gamma: t.gamma,
        gamma_source: if opts.gamma.is_some() {
            GammaSource::User
        } else {
            GammaSource::DarkCounts
        },
        eta,
        m_ir: Estimate::new(m_ir, propagate_poisson(&clicks, pick(1))),
        delta_i_ae: di,
        m_ts: Estimate::new(m_ts, propagate_poisson(&clicks, pick(2))),
    })
}

/// Security margins of a session under the given normalization.
pub fn security_report(tally: &SessionTally, cfg: &ApparatusConfig, normalization: Normalization) -> Result<SecurityReport> {
    security_report_with(tally, cfg, &SecurityOptions::new(normalization))
}

pub fn security_report_with(tally: &SessionTally, cfg: &ApparatusConfig, opts: &SecurityOptions) -> Result<SecurityReport> {
    if tally.is_empty() {
        return Err(Error::EmptyTally("session recorded no heralded rounds".into()));
    }
    security_report_from_counts(&CountTable::from_tally(tally), cfg, opts)
}

/// Locates a sign change of `f` on `[lo, hi]` by bisection to within `tol`.
/// Returns `None` when `f` has the same sign at both ends.
pub fn bisect_sign_change<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<Option<f64>>
where
    F: Fn(f64) -> Result<f64>,
{
    let (mut lo, mut hi) = (lo, hi);
    let mut f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(Some(lo));
    }
    if f_hi == 0.0 {
        return Ok(Some(hi));
    }
    if f_lo.signum() == f_hi.signum() {
        return Ok(None);
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(Some(mid));
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn table(clicks: [[f64; 3]; 4], rounds: f64) -> CountTable {
        CountTable {
            rounds: [rounds; 4],
            clicks,
        }
    }

    #[test]
    fn normalization_tags_roundtrip() {
        for n in Normalization::ALL {
            assert_eq!(n.tag().parse::<Normalization>().unwrap(), n);
            assert_eq!(serde_json::to_value(n).unwrap(), n.tag());
        }
        assert!("per-photon".parse::<Normalization>().is_err());
    }

    #[test]
    fn ideal_noiseless_counts() {
        let cfg = ApparatusConfig::ideal();
        let t = CountTable::expected(&cfg, [1000.0; 4]).unwrap();
        for n in Normalization::ALL {
            let r = security_report_from_counts(&t, &cfg, &SecurityOptions::new(n)).unwrap();
            assert_eq!(r.p_e1, 0.0);
            assert!(r.p_d1 > 0.0);
            assert_eq!(r.m_ir.value, r.p_d1);
            assert_eq!(r.eta, 1.0);
            assert_eq!(r.m_ts.value, r.m_ir.value);
        }
        let r = security_report_from_counts(&t, &cfg, &SecurityOptions::new(Normalization::Heralded)).unwrap();
        assert_abs_diff_eq!(r.p_d1, 0.125, epsilon = 1e-15);
        let r = security_report_from_counts(&t, &cfg, &SecurityOptions::new(Normalization::ConclusiveKey)).unwrap();
        assert_abs_diff_eq!(r.p_d1, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn hand_computed_terms() {
        // Counts with equal exposure; D0, D1, D2 per setting in table order.
        let clicks = [
            [180.0, 8.0, 6.0],
            [55.0, 56.0, 84.0],
            [156.0, 8.0, 6.0],
            [55.0, 56.0, 84.0],
        ];
        let mut cfg = ApparatusConfig::ideal();
        cfg.efficiency = crate::optics::Efficiencies {
            d0: 0.6,
            d1: 0.6,
            d2: 0.6,
            herald: 0.6,
        };
        cfg.dark_prob.d1 = 0.001;
        let n = 7000.0;
        let opts = SecurityOptions::new(Normalization::ConclusiveKey);
        let r = security_report_from_counts(&table(clicks, n), &cfg, &opts).unwrap();
        let qber = 16.0 / 128.0;
        let p_d1 = 112.0 / 222.0;
        assert_abs_diff_eq!(r.qber.value, qber, epsilon = 1e-14);
        assert_abs_diff_eq!(r.p_d1, p_d1, epsilon = 1e-14);
        assert_abs_diff_eq!(r.p_e1, p_d1 * qber, epsilon = 1e-14);
        let conclusive = 194.0 + 195.0 + 170.0 + 195.0;
        assert_abs_diff_eq!(r.p_d2, 180.0 / conclusive, epsilon = 1e-14);
        assert_abs_diff_eq!(r.p_e2, 12.0 / conclusive, epsilon = 1e-14);
        assert_abs_diff_eq!(r.gamma, 2.0 * 0.001 * n / 222.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.m_ts.value, r.m_ir.value - r.gamma - r.delta_i_ae, epsilon = 1e-12);
        assert!(r.m_ir.sigma > 0.0 && r.m_ts.sigma > 0.0);

        let r = security_report_from_counts(&table(clicks, n), &cfg, &SecurityOptions::new(Normalization::Heralded)).unwrap();
        assert_abs_diff_eq!(r.p_d1, 128.0 / n / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.p_e1, 16.0 / n / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.gamma, 0.0005, epsilon = 1e-15);
    }

    #[test]
    fn user_gamma_and_eta_override() {
        let cfg = ApparatusConfig::ideal();
        let t = CountTable::expected(&cfg, [1000.0; 4]).unwrap();
        let opts = SecurityOptions {
            normalization: Normalization::ConclusiveKey,
            gamma: Some(0.02),
            eta: Some(0.5),
        };
        let r = security_report_from_counts(&t, &cfg, &opts).unwrap();
        assert_eq!(r.gamma, 0.02);
        assert_eq!(r.gamma_source, GammaSource::User);
        assert_abs_diff_eq!(r.delta_i_ae, 0.5 * (r.p_d2 - r.p_e2), epsilon = 1e-15);
    }

    #[test]
    fn empty_inputs_rejected() {
        let cfg = ApparatusConfig::ideal();
        assert!(matches!(
            security_report(&SessionTally::default(), &cfg, Normalization::Heralded),
            Err(Error::EmptyTally(_))
        ));
        let t = table([[5.0, 0.0, 0.0]; 4], 10.0);
        assert!(security_report_from_counts(&t, &cfg, &SecurityOptions::default()).is_err());
    }

    #[test]
    fn bisection_finds_root() {
        let root = bisect_sign_change(|x| Ok(x * x - 0.25), 0.0, 1.0, 1e-10).unwrap().unwrap();
        assert_abs_diff_eq!(root, 0.5, epsilon = 1e-9);
        assert_eq!(bisect_sign_change(|x| Ok(x + 1.0), 0.0, 1.0, 1e-6).unwrap(), None);
    }
}
