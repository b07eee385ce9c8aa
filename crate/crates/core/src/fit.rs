//! Log-log slope fits.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ThermionError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Two standard errors of the slope.
    pub band: f64,
    pub points: usize,
}

/// Least-squares line through `(ln x, ln y)`. Needs at least `min_points`
/// positive samples.
pub fn loglog_slope(x: &[f64], y: &[f64], min_points: usize) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < min_points.max(2) {
        return Err(ThermionError::InsufficientRange(format!(
            "{} usable samples, need {}",
            pts.len(),
            min_points.max(2)
        )));
    }
    line_fit(&pts)
}

pub fn line_fit(pts: &[(f64, f64)]) -> Result<SlopeFit> {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(ThermionError::InsufficientRange("abscissae coincide".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let band = if pts.len() > 2 {
        let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        2.0 * (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(SlopeFit { slope, intercept, band, points: pts.len() })
}

/// `n` log-spaced values from `a` to `b` inclusive.
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n).map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_power_law() {
        let x = logspace(1.0, 100.0, 9);
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(-1.5)).collect();
        let f = loglog_slope(&x, &y, 5).unwrap();
        assert!((f.slope + 1.5).abs() < 1e-12);
        assert!(f.band < 1e-10);
    }

    #[test]
    fn too_few_points() {
        assert!(loglog_slope(&[1.0, 2.0], &[1.0, 2.0], 5).is_err());
    }
}
