//! Estimators for the reported quantities: QBER, fringe visibility, g2(0)
//! and stability traces, all with Poisson uncertainties.

mod estimate;
mod g2;
mod qber;
mod scan;
mod visibility;

pub use estimate::{poisson_sigma, propagate_poisson, Estimate};
pub use g2::{expected_g2, g2_zero, leak_for_g2, simulate_hbt, G2Estimate, HbtCounts, HbtSetup};
pub use qber::{accidental_rate, qber, qber_corrected, Background, Exposure, QberEstimate};
pub use scan::{simulate_scan, stability_trace, DriftModel, ScanSpec, StabilityTrace};
pub use visibility::{fit_fringe, visibility, FringeScan, VisibilityFit};
