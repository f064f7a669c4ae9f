use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default minimum sample count for a decay fit.
pub const MIN_FIT_SAMPLES: usize = 8;

/// Least-squares line `y ≈ slope·x + intercept`, usually in log₂–log₂ form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub slope: f64,
    pub intercept: f64,
    /// Largest |y − (slope·x + intercept)| over the samples.
    pub max_residual: f64,
    pub samples: usize,
}

impl FitReport {
    pub fn least_squares(x: &[f64], y: &[f64]) -> Result<Self> {
        Self::least_squares_min(x, y, MIN_FIT_SAMPLES)
    }

    pub fn least_squares_min(x: &[f64], y: &[f64], min_samples: usize) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::invalid("fit: x and y lengths differ"));
        }
        let n = x.len();
        if n < min_samples.max(2) {
            return Err(Error::invalid(format!(
                "fit needs at least {} samples, got {n}",
                min_samples.max(2)
            )));
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::invalid("fit: non-finite sample"));
        }
        let nf = n as f64;
        let mx = x.iter().sum::<f64>() / nf;
        let my = y.iter().sum::<f64>() / nf;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for (xi, yi) in x.iter().zip(y) {
            sxx += (xi - mx) * (xi - mx);
            sxy += (xi - mx) * (yi - my);
        }
        if sxx <= 0.0 {
            return Err(Error::invalid("fit: degenerate abscissae"));
        }
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let max_residual = x
            .iter()
            .zip(y)
            .map(|(xi, yi)| (yi - slope * xi - intercept).abs())
            .fold(0.0, f64::max);
        Ok(Self {
            slope,
            intercept,
            max_residual,
            samples: n,
        })
    }

    /// Fit of log₂ y against log₂ x.
    pub fn log2_log2(x: &[f64], y: &[f64]) -> Result<Self> {
        Self::least_squares(&log2_all(x)?, &log2_all(y)?)
    }

    /// Fit of log₂ y against x.
    pub fn log2_linear(x: &[f64], y: &[f64], min_samples: usize) -> Result<Self> {
        Self::least_squares_min(x, &log2_all(y)?, min_samples)
    }

    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

fn log2_all(v: &[f64]) -> Result<Vec<f64>> {
    v.iter()
        .map(|&t| {
            if t > 0.0 && t.is_finite() {
                Ok(t.log2())
            } else {
                Err(Error::invalid(format!("log fit needs positive samples, got {t}")))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_is_recovered() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| -2.5 * v + 3.0).collect();
        let f = FitReport::least_squares(&x, &y).unwrap();
        assert!((f.slope + 2.5).abs() < 1e-14);
        assert!((f.intercept - 3.0).abs() < 1e-13);
        assert!(f.max_residual < 1e-13);
        assert_eq!(f.samples, 10);
    }

    #[test]
    fn too_few_samples_rejected() {
        let x = [1.0, 2.0, 3.0];
        assert!(FitReport::least_squares(&x, &x).is_err());
        assert!(FitReport::least_squares_min(&x, &x, 3).is_ok());
    }

    #[test]
    fn log_fit_rejects_nonpositive() {
        let x: Vec<f64> = (1..=8).map(f64::from).collect();
        let mut y = x.clone();
        y[3] = 0.0;
        assert!(FitReport::log2_log2(&x, &y).is_err());
    }
}
