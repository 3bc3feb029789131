use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::estimate::Estimate;
use crate::error::{Error, Result};
use crate::optics::{envelope, Detector, Setting};

/// Coincidence counts recorded while stepping the path difference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeScan {
    pub setting: Setting,
    /// Acquisition time per point, seconds.
    pub dwell_s: f64,
    /// Nominal wavelength; the fitted period is searched around it.
    pub wavelength_nm: f64,
    pub coherence_length_um: f64,
    pub displacements_um: Vec<f64>,
    pub counts_d0: Vec<u64>,
    pub counts_d1: Vec<u64>,
    pub counts_d2: Vec<u64>,
}

impl FringeScan {
    pub fn counts(&self, det: Detector) -> &[u64] {
        match det {
            Detector::D0 => &self.counts_d0,
            Detector::D1 => &self.counts_d1,
            Detector::D2 => &self.counts_d2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.displacements_um.len();
        if self.counts_d0.len() != n || self.counts_d1.len() != n || self.counts_d2.len() != n {
            return Err(Error::InvalidArgument("scan arrays differ in length".into()));
        }
        if !(self.wavelength_nm > 0.0 && self.coherence_length_um > 0.0) {
            return Err(Error::InvalidArgument("scan wavelength and coherence length must be positive".into()));
        }
        Ok(())
    }
}

/// Fringe model `offset + envelope(x) (c cos kx + s sin kx)` fitted to one
/// detector's counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityFit {
    /// Amplitude over offset at the envelope peak.
    pub visibility: Estimate,
    /// Definitional `(max - min) / (max + min)` of the raw counts.
    pub visibility_extremes: f64,
    pub period_um: f64,
    pub offset: f64,
    pub cos_amplitude: f64,
    pub sin_amplitude: f64,
    pub coherence_length_um: f64,
    pub reduced_chi2: f64,
}

impl VisibilityFit {
    pub fn predict(&self, x_um: f64) -> f64 {
        let k = 2.0 * PI / self.period_um;
        let env = envelope(x_um, self.coherence_length_um).unwrap_or(0.0);
        self.offset + env * (self.cos_amplitude * (k * x_um).cos() + self.sin_amplitude * (k * x_um).sin())
    }
}

/// Weighted linear least squares for the three fringe coefficients at fixed
/// wavenumber. Returns coefficients, the inverse normal matrix and the
/// weighted residual sum of squares.
fn linear_fit(x: &[f64], y: &[f64], env: &[f64], w: &[f64], k: f64) -> Option<([f64; 3], [[f64; 3]; 3], f64)> {
    let mut a = [[0.0; 3]; 3];
    let mut b = [0.0; 3];
    let row = |i: usize| [1.0, env[i] * (k * x[i]).cos(), env[i] * (k * x[i]).sin()];
    for i in 0..x.len() {
        let r = row(i);
        for p in 0..3 {
            b[p] += w[i] * r[p] * y[i];
            for q in 0..3 {
                a[p][q] += w[i] * r[p] * r[q];
            }
        }
    }
    let inv = invert3(&a)?;
    let mut beta = [0.0; 3];
    for p in 0..3 {
        beta[p] = (0..3).map(|q| inv[p][q] * b[q]).sum();
    }
    let rss = (0..x.len())
        .map(|i| {
            let r = row(i);
            let pred: f64 = (0..3).map(|p| beta[p] * r[p]).sum();
            w[i] * (y[i] - pred).powi(2)
        })
        .sum();
    Some((beta, inv, rss))
}

fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let c = |i: usize, j: usize| {
        let (r0, r1) = ((i + 1) % 3, (i + 2) % 3);
        let (c0, c1) = ((j + 1) % 3, (j + 2) % 3);
        m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
    };
    let det = m[0][0] * c(0, 0) + m[0][1] * c(0, 1) + m[0][2] * c(0, 2);
    let scale = m.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if !(det.abs() > 1e-12 * scale.powi(3)) {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            inv[j][i] = c(i, j) / det;
        }
    }
    Some(inv)
}

/// Fits the fringe model to `counts` taken at `displacements_um`.
///
/// The period is located by a grid search over half to twice the nominal
/// wavelength followed by golden-section refinement; the coefficients are
/// then refitted with Poisson weights from the model prediction.
pub fn fit_fringe(
    displacements_um: &[f64],
    counts: &[u64],
    wavelength_um: f64,
    coherence_length_um: f64,
) -> Result<VisibilityFit> {
    let n = displacements_um.len();
    if n != counts.len() {
        return Err(Error::InvalidArgument("displacements and counts differ in length".into()));
    }
    if n < 5 {
        return Err(Error::Fit(format!("{n} scan points are too few for a fringe fit")));
    }
    let lo = displacements_um.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = displacements_um.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !(span >= wavelength_um) {
        return Err(Error::Fit(format!(
            "scan spans {span} um, less than one fringe period ({wavelength_um} um)"
        )));
    }
    let x = displacements_um;
    let y: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let env = x
        .iter()
        .map(|&d| envelope(d, coherence_length_um))
        .collect::<Result<Vec<_>>>()?;
    let mut w: Vec<f64> = y.iter().map(|&c| 1.0 / c.max(1.0)).collect();

    let cost = |k: f64, w: &[f64]| linear_fit(x, &y, &env, w, k).map_or(f64::INFINITY, |f| f.2);
    let k_min = PI / wavelength_um;
    let k_max = 4.0 * PI / wavelength_um;
    let dk = PI / (8.0 * span);
    let steps = ((k_max - k_min) / dk).ceil() as usize;
    let mut best = (f64::INFINITY, k_min);
    for j in 0..=steps {
        let k = k_min + j as f64 * dk;
        let c = cost(k, &w);
        if c < best.0 {
            best = (c, k);
        }
    }
    if !best.0.is_finite() {
        return Err(Error::Fit("degenerate fringe fit".into()));
    }
    let golden = |w: &[f64], center: f64| {
        let (mut a, mut b) = (center - dk, center + dk);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if cost(c, w) < cost(d, w) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    };
    let mut k = golden(&w, best.1);

    let mut fit = linear_fit(x, &y, &env, &w, k).ok_or_else(|| Error::Fit("degenerate fringe fit".into()))?;
    for _ in 0..3 {
        let beta = fit.0;
        w = (0..n)
            .map(|i| {
                let pred = beta[0] + env[i] * (beta[1] * (k * x[i]).cos() + beta[2] * (k * x[i]).sin());
                1.0 / pred.max(0.5)
            })
            .collect();
        k = golden(&w, k);
        fit = linear_fit(x, &y, &env, &w, k).ok_or_else(|| Error::Fit("degenerate fringe fit".into()))?;
    }
    let ([o, c, s], cov, rss) = fit;
    if !(o > 0.0) {
        return Err(Error::Fit(format!("non-positive fitted offset {o}")));
    }
    let amp = c.hypot(s);
    let v = amp / o;
    let grad = if amp > 0.0 {
        [-v / o, c / (amp * o), s / (amp * o)]
    } else {
        [0.0, 1.0 / o, 1.0 / o]
    };
    let mut var = 0.0;
    for p in 0..3 {
        for q in 0..3 {
            var += grad[p] * cov[p][q] * grad[q];
        }
    }
    let ymax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
    let extremes = if ymax + ymin > 0.0 {
        (ymax - ymin) / (ymax + ymin)
    } else {
        0.0
    };
    Ok(VisibilityFit {
        visibility: Estimate::new(v, var.max(0.0).sqrt()),
        visibility_extremes: extremes,
        period_um: 2.0 * PI / k,
        offset: o,
        cos_amplitude: c,
        sin_amplitude: s,
        coherence_length_um,
        reduced_chi2: rss / (n as f64 - 4.0).max(1.0),
    })
}

/// Fitted visibility of one detector's fringe in a scan.
pub fn visibility(scan: &FringeScan, det: Detector) -> Result<VisibilityFit> {
    scan.validate()?;
    fit_fringe(
        &scan.displacements_um,
        scan.counts(det),
        scan.wavelength_nm * 1e-3,
        scan.coherence_length_um,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step).round() as usize;
        (0..=n).map(|i| lo + i as f64 * step).collect()
    }

    #[test]
    fn exact_sinusoid_recovers_extreme_ratio() {
        let lambda = 0.812;
        let x = grid(-2.0, 2.0, 0.01);
        // max 180, min 7.5, envelope negligible over the span
        let y: Vec<u64> = x.iter().map(|&d| (93.75 + 86.25 * (2.0 * PI * d / lambda).cos()).round() as u64).collect();
        let f = fit_fringe(&x, &y, lambda, 1e9).unwrap();
        assert_abs_diff_eq!(f.visibility.value, (180.0 - 7.5) / (180.0 + 7.5), epsilon = 5e-3);
        assert_abs_diff_eq!(f.period_um, lambda, epsilon = 1e-3);
    }

    #[test]
    fn flat_scan_has_zero_visibility() {
        let x = grid(-2.0, 2.0, 0.02);
        let y = vec![50u64; x.len()];
        let f = fit_fringe(&x, &y, 0.812, 660.0).unwrap();
        assert_abs_diff_eq!(f.visibility.value, 0.0, epsilon = 1e-9);
        assert_eq!(f.visibility_extremes, 0.0);
    }

    #[test]
    fn envelope_is_divided_out() {
        // Fringes under a narrow envelope still give the peak visibility.
        let lambda = 0.8;
        let lc = 3.0;
        let x = grid(-4.0, 4.0, 0.005);
        let y: Vec<u64> = x
            .iter()
            .map(|&d| {
                let e = envelope(d, lc).unwrap();
                (1000.0 * (1.0 + 0.9 * e * (2.0 * PI * d / lambda + 0.3).cos())).round() as u64
            })
            .collect();
        let f = fit_fringe(&x, &y, 0.812, lc).unwrap();
        assert_abs_diff_eq!(f.visibility.value, 0.9, epsilon = 2e-3);
        assert_abs_diff_eq!(f.period_um, lambda, epsilon = 1e-3);
    }

    #[test]
    fn short_or_degenerate_scans_fail() {
        let x = grid(0.0, 0.5, 0.01);
        let y = vec![10u64; x.len()];
        assert!(matches!(fit_fringe(&x, &y, 0.812, 660.0), Err(Error::Fit(_))));
        assert!(fit_fringe(&[0.0, 1.0], &[1, 2], 0.812, 660.0).is_err());
        let zeros = vec![0u64; 201];
        assert!(fit_fringe(&grid(-2.0, 2.0, 0.02), &zeros, 0.812, 660.0).is_err());
    }

    #[test]
    fn mismatched_scan_arrays_rejected() {
        let scan = FringeScan {
            setting: Setting::new(false, false),
            dwell_s: 20.0,
            wavelength_nm: 812.0,
            coherence_length_um: 660.0,
            displacements_um: vec![0.0, 1.0],
            counts_d0: vec![1],
            counts_d1: vec![1, 2],
            counts_d2: vec![1, 2],
        };
        assert!(visibility(&scan, Detector::D0).is_err());
    }
}
