//! Log-log least-squares fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Points that entered the fit.
    pub used: usize,
}

/// Ordinary least squares `y = slope * x + intercept`; returns `(slope, intercept, r^2)`.
///
/// `None` for fewer than two points or degenerate abscissae.
pub fn least_squares(pts: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some((slope, intercept, r2))
}

/// Fits `log(value) = slope * log(L) + intercept`.
///
/// Non-positive values are dropped with a warning; at least three must remain.
pub fn scaling_fit(points: &[(f64, f64)]) -> Result<ScalingFit> {
    let mut logs = Vec::with_capacity(points.len());
    for &(l, v) in points {
        if v > 0.0 && l > 0.0 {
            logs.push((l.ln(), v.ln()));
        } else {
            log::warn!("scaling fit: dropping non-positive point ({l}, {v})");
        }
    }
    if logs.len() < 3 {
        return Err(Error::Input(format!(
            "scaling fit needs at least 3 positive points, got {}",
            logs.len()
        )));
    }
    let (slope, intercept, r_squared) = least_squares(&logs)
        .ok_or_else(|| Error::Input("scaling fit: all L values coincide".into()))?;
    Ok(ScalingFit {
        slope,
        intercept,
        r_squared,
        used: logs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = [2.0, 4.0, 8.0, 16.0].iter().map(|&l| (l, 7.0 / l)).collect();
        let f = scaling_fit(&pts).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12);
        assert!((f.intercept - 7f64.ln()).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_positive_points_are_dropped() {
        let pts = [(2.0, 1.0), (4.0, 0.0), (8.0, 0.25), (16.0, 0.125), (32.0, -1.0)];
        let f = scaling_fit(&pts).unwrap();
        assert_eq!(f.used, 3);
        assert!(scaling_fit(&pts[..3]).is_err());
    }
}
