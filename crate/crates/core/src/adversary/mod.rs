//! Eavesdroppers and security margins.
//!
//! Intercept-resend is simulated on the channel; the time-shift attack
//! enters only through its analytic information correction.

mod attack;
mod margins;
mod report;

pub use attack::{apply_intercept_resend, attacked_distribution, AttackModel, InterceptResend};
pub use margins::{binary_entropy, delta_i_ae, m_intercept_resend, m_time_shift};
pub use report::{
    bisect_sign_change, security_report, security_report_from_counts, security_report_with, time_shift_efficiency,
    GammaSource, Normalization, SecurityOptions, SecurityReport,
};
