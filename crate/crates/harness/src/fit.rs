//! Least-squares rates on log-log data.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors at or below this value are replaced by it before taking logs.
pub const ERROR_FLOOR: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS deviation of `log error` from the fitted line.
    pub residual: f64,
    /// Some error was floored.
    pub floored: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least 3 (eps, error) pairs, got {0}")]
    TooFewPairs(usize),
    #[error("eps values must be positive and finite")]
    BadEpsilon,
    #[error("eps and error lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// Fits `log error = slope * log eps + intercept`.
pub fn fit_rate(eps: &[f64], errors: &[f64]) -> Result<RateFit, FitError> {
    if eps.len() != errors.len() {
        return Err(FitError::LengthMismatch(eps.len(), errors.len()));
    }
    if eps.len() < 3 {
        return Err(FitError::TooFewPairs(eps.len()));
    }
    if eps.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(FitError::BadEpsilon);
    }
    let mut floored = false;
    let x: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = errors
        .iter()
        .map(|&e| {
            if e > ERROR_FLOOR && e.is_finite() {
                e.ln()
            } else {
                floored = true;
                ERROR_FLOOR.ln()
            }
        })
        .collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(RateFit {
        slope,
        intercept,
        residual,
        floored,
    })
}
