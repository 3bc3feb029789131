use crate::optics::{ApparatusConfig, DarkProbs, Efficiencies, PolPair};

/// Acquisition time of one reference count, seconds.
pub const ACQUISITION_S: f64 = 20.0;

const HERALD_RATE_HZ: f64 = 347.0;
const HERALD_FILTER_TRANSMITTANCE: f64 = 0.26;

/// Apparatus fitted to the reference per-setting coincidence counts.
///
/// One mode overlap serves both polarizations; the lower interfering
/// counts and visibilities for Alice's V photons come from a lower
/// return-leg transmittance of Bob's arm for V. Per-gate background
/// probabilities reproduce the D0/D1/D2 floors of the interfering
/// settings (about 3, 3.4 and 6 counts per 20 s).
pub fn calibrate_from_table1() -> ApparatusConfig {
    let heralds = HERALD_RATE_HZ * ACQUISITION_S;
    let efficiency = 0.60;
    let coupling = 0.05;
    // Twins of undetected heralds still reach the interferometer.
    let herald_efficiency = efficiency * HERALD_FILTER_TRANSMITTANCE;
    let unheralded = HERALD_RATE_HZ * (1.0 / herald_efficiency - 1.0) * coupling;
    ApparatusConfig {
        mode_overlap: PolPair::both(0.98),
        coherence_length_um: 660.0,
        wavelength_nm: 812.0,
        path_delta_um: 0.0,
        arm_transmittance_a: 1.0,
        arm_transmittance_b: 0.744,
        return_transmittance: PolPair { h: 1.0, v: 0.70 },
        pbs_leakage: 0.0,
        efficiency: Efficiencies {
            d0: efficiency,
            d1: efficiency,
            d2: efficiency,
            herald: efficiency,
        },
        dark_prob: DarkProbs {
            d0: 3.05 / heralds,
            d1: 3.39 / heralds,
            d2: 6.04 / heralds,
        },
        gate_width_ns: 1.0,
        herald_rate_hz: HERALD_RATE_HZ,
        coupling,
        multi_photon_leak: 3.5e-9,
        unheralded_leak_rate_hz: unheralded,
        shuttered: false,
    }
}
