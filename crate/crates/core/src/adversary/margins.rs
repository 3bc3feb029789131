use crate::error::{Error, Result};

/// Tolerance for probability comparisons of estimated quantities.
const PROB_EPS: f64 = 1e-12;

fn check_probability(name: &str, x: f64) -> Result<()> {
    if !(-PROB_EPS..=1.0 + PROB_EPS).contains(&x) {
        return Err(Error::InvalidArgument(format!("{name} must lie in [0, 1], got {x}")));
    }
    Ok(())
}

/// Binary Shannon entropy in bits, `h(0) = h(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    check_probability("entropy argument", x)?;
    let x = x.clamp(0.0, 1.0);
    let term = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.log2() };
    Ok(term(x) + term(1.0 - x))
}

/// Security margin against intercept-resend attacks,
/// `m = P_D1 [1 - h(P_e1 / P_D1)]`; zero when there are no D1 clicks.
pub fn m_intercept_resend(p_d1: f64, p_e1: f64) -> Result<f64> {
    check_probability("P_D1", p_d1)?;
    check_probability("P_e1", p_e1)?;
    if p_e1 > p_d1 + PROB_EPS {
        return Err(Error::InvalidArgument(format!(
            "error probability {p_e1} exceeds click probability {p_d1}"
        )));
    }
    if p_d1 <= 0.0 {
        return Ok(0.0);
    }
    Ok(p_d1 * (1.0 - binary_entropy((p_e1 / p_d1).min(1.0))?))
}

/// Information a time-shift attacker gains from detector inefficiency,
/// `(1 - eta) / (2 eta) (P_D2 - P_e2)`.
pub fn delta_i_ae(eta: f64, p_d2: f64, p_e2: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidArgument(format!("efficiency must lie in (0, 1], got {eta}")));
    }
    check_probability("P_D2", p_d2)?;
    check_probability("P_e2", p_e2)?;
    if p_e2 > p_d2 + PROB_EPS {
        return Err(Error::InvalidArgument(format!(
            "D2 error probability {p_e2} exceeds click probability {p_d2}"
        )));
    }
    Ok((1.0 - eta) / (2.0 * eta) * (p_d2 - p_e2))
}

/// Security margin including the time-shift correction,
/// `m_TS = m_IR - gamma - delta_I_AE(eta)`.
pub fn m_time_shift(m_ir: f64, gamma: f64, eta: f64, p_d2: f64, p_e2: f64) -> Result<f64> {
    check_probability("gamma", gamma)?;
    Ok(m_ir - gamma - delta_i_ae(eta, p_d2, p_e2)?)
}
