use serde::{Deserialize, Serialize};

/// A value with its one-standard-deviation uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

impl Estimate {
    pub fn new(value: f64, sigma: f64) -> Self {
        Estimate { value, sigma }
    }

    pub fn exact(value: f64) -> Self {
        Estimate { value, sigma: 0.0 }
    }

    /// True when `x` lies within `k` standard deviations.
    pub fn agrees_with(&self, x: f64, k: f64) -> bool {
        (self.value - x).abs() <= k * self.sigma
    }
}

/// Poisson standard error of a count, or of the mean of `acquisitions`
/// repeated counts whose mean is `mean`.
pub fn poisson_sigma(mean: f64, acquisitions: u32) -> f64 {
    if mean <= 0.0 || acquisitions == 0 {
        return 0.0;
    }
    (mean / f64::from(acquisitions)).sqrt()
}

/// First-order propagation of independent Poisson fluctuations of `counts`
/// through `f`, using central differences (one-sided at zero counts).
pub fn propagate_poisson<F>(counts: &[f64], f: F) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let mut x = counts.to_vec();
    let mut var = 0.0;
    for i in 0..counts.len() {
        let c = counts[i];
        if c <= 0.0 {
            continue;
        }
        let h = 1e-4 * c.max(1.0);
        let deriv = if c > h {
            x[i] = c + h;
            let up = f(&x);
            x[i] = c - h;
            let down = f(&x);
            (up - down) / (2.0 * h)
        } else {
            x[i] = c + h;
            let up = f(&x);
            x[i] = c;
            (up - f(&x)) / h
        };
        x[i] = c;
        if deriv.is_finite() {
            var += deriv * deriv * c;
        }
    }
    var.sqrt()
}
