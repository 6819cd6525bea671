use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub epsilon: f64,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub alpha: f64,
    pub alpha_stderr: f64,
    pub log_prefactor: f64,
    pub points: usize,
}

/// Weighted least squares of `ln value` against `ln epsilon` over the points
/// with `window.0 <= epsilon <= window.1`. Weights are `(value/stderr)^2`;
/// if any stderr is zero all points get unit weight. The slope error is the
/// covariance estimate inflated by the reduced chi-square when that exceeds one.
pub fn fit_exponent(points: &[Measurement], window: (f64, f64)) -> Result<ExponentFit> {
    let used: Vec<&Measurement> = points
        .iter()
        .filter(|m| m.epsilon >= window.0 && m.epsilon <= window.1)
        .filter(|m| m.epsilon > 0.0 && m.value > 0.0 && m.value.is_finite() && m.stderr.is_finite())
        .collect();
    if used.len() < 4 {
        return Err(Error::DegenerateWindow { usable: used.len(), needed: 4 });
    }
    let unit = used.iter().any(|m| !(m.stderr > 0.0));
    let data: Vec<(f64, f64, f64)> = used
        .iter()
        .map(|m| {
            let w = if unit { 1.0 } else { (m.value / m.stderr).powi(2) };
            (m.epsilon.ln(), m.value.ln(), w)
        })
        .collect();
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, w) in &data {
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = sw * sxx - sx * sx;
    if !(det > 0.0) {
        return Err(Error::DegenerateWindow { usable: 1, needed: 4 });
    }
    let slope = (sw * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    let chi2: f64 = data.iter().map(|&(x, y, w)| w * (y - intercept - slope * x).powi(2)).sum();
    let reduced = chi2 / (data.len() - 2) as f64;
    let inflation = if unit { reduced } else { reduced.max(1.0) };
    Ok(ExponentFit {
        alpha: slope,
        alpha_stderr: (inflation * sw / det).sqrt(),
        log_prefactor: intercept,
        points: data.len(),
    })
}
