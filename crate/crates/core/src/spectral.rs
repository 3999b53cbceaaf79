//! Dense spectra and Gaussian-broadened densities of states.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::assembly::periodic_stiffness_1d;
use crate::error::{Error, Result};
use crate::sparse::SparseOperator;

/// Largest operator handed to the dense eigensolver.
pub const DENSE_MAX_DIM: usize = 4096;

/// Default number of sample points of a DOS curve.
pub const DEFAULT_POINTS: usize = 1024;

/// All eigenvalues of a symmetric operator, ascending.
pub fn dense_eigenvalues(a: &SparseOperator) -> Result<Vec<f64>> {
    if a.dim() > DENSE_MAX_DIM {
        return Err(Error::param(format!(
            "dense eigensolver limited to dimension {DENSE_MAX_DIM}, got {}",
            a.dim()
        )));
    }
    let mut ev: Vec<f64> = a.to_dense().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// `a11 (T (x) I) + a22 (I (x) T)`: the periodic operator of a constant diagonal coefficient.
pub fn constant_coefficient_operator(n: usize, a11: f64, a22: f64) -> SparseOperator {
    let t = periodic_stiffness_1d(n);
    let mut trip = Vec::with_capacity(6 * n * n);
    for &(r, c, v) in &t {
        for k in 0..n {
            trip.push((r * n + k, c * n + k, a11 * v));
            trip.push((k * n + r, k * n + c, a22 * v));
        }
    }
    SparseOperator::from_triplets(n * n, trip)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DosCurve {
    pub t: Vec<f64>,
    pub values: Vec<f64>,
    pub eta: f64,
    /// Number of eigenvalues.
    pub m: usize,
}

impl DosCurve {
    /// Trapezoidal integral over the sample grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.t, &self.values)
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2)
        .zip(y.windows(2))
        .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
        .sum()
}

/// 2% of the spectral width (or `1e-3` for a single point spectrum).
pub fn default_eta(eigs: &[f64]) -> f64 {
    let (lo, hi) = bounds(eigs);
    let w = hi - lo;
    if w > 0.0 {
        0.02 * w
    } else {
        1e-3
    }
}

fn bounds(eigs: &[f64]) -> (f64, f64) {
    eigs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// `points` uniform samples of `[lo - 6 eta, hi + 6 eta]`.
pub fn extended_grid(lo: f64, hi: f64, eta: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo - 6.0 * eta, hi + 6.0 * eta);
    let step = (b - a) / (points - 1) as f64;
    (0..points).map(|k| a + k as f64 * step).collect()
}

/// `phi(t) = (1/m) sum_j g(t - lambda_j)` with the unit-mass Gaussian `g` of width `eta`.
pub fn dos_curve(eigs: &[f64], eta: f64, t_points: &[f64]) -> Result<DosCurve> {
    if !(eta > 0.0) {
        return Err(Error::param(format!("eta must be positive, got {eta}")));
    }
    if eigs.is_empty() {
        return Err(Error::Input("no eigenvalues".into()));
    }
    let m = eigs.len();
    let norm = 1.0 / ((2.0 * PI).sqrt() * eta * m as f64);
    let values = t_points
        .iter()
        .map(|&t| {
            norm * eigs
                .iter()
                .map(|&l| (-0.5 * ((t - l) / eta).powi(2)).exp())
                .sum::<f64>()
        })
        .collect();
    Ok(DosCurve {
        t: t_points.to_vec(),
        values,
        eta,
        m,
    })
}

/// DOS on the default extended grid.
pub fn dos_default(eigs: &[f64], eta: Option<f64>) -> Result<DosCurve> {
    let eta = eta.unwrap_or_else(|| default_eta(eigs));
    let (lo, hi) = bounds(eigs);
    dos_curve(eigs, eta, &extended_grid(lo, hi, eta, DEFAULT_POINTS))
}

/// Curves of several spectra on one shared grid, plus their pointwise average.
pub fn dos_ensemble(
    spectra: &[Vec<f64>],
    eta: Option<f64>,
    points: usize,
) -> Result<(Vec<DosCurve>, DosCurve)> {
    let all: Vec<f64> = spectra.iter().flatten().copied().collect();
    if all.is_empty() {
        return Err(Error::Input("no spectra".into()));
    }
    let eta = eta.unwrap_or_else(|| default_eta(&all));
    let (lo, hi) = bounds(&all);
    let grid = extended_grid(lo, hi, eta, points);
    let curves = spectra
        .iter()
        .map(|s| dos_curve(s, eta, &grid))
        .collect::<Result<Vec<_>>>()?;
    let avg = average_curve(&curves)?;
    Ok((curves, avg))
}

/// Pointwise mean of curves sharing a grid.
pub fn average_curve(curves: &[DosCurve]) -> Result<DosCurve> {
    let first = curves.first().ok_or_else(|| Error::Input("no curves".into()))?;
    if curves.iter().any(|c| c.t != first.t) {
        return Err(Error::Input("curves do not share a grid".into()));
    }
    let k = curves.len() as f64;
    let values = (0..first.t.len())
        .map(|i| curves.iter().map(|c| c.values[i]).sum::<f64>() / k)
        .collect();
    Ok(DosCurve {
        t: first.t.clone(),
        values,
        eta: first.eta,
        m: first.m,
    })
}

/// Root-mean-square difference of two curves on a common grid.
pub fn l2_distance(a: &DosCurve, b: &DosCurve) -> f64 {
    let d: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).powi(2)).collect();
    let width = a.t[a.t.len() - 1] - a.t[0];
    (trapezoid(&a.t, &d) / width).sqrt()
}

pub fn sup_distance(a: &DosCurve, b: &DosCurve) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Spread of DOS curves around their average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringReport {
    pub curves: usize,
    /// Pointwise sample standard deviation across curves.
    pub pointwise_std: Vec<f64>,
    /// RMS over the grid of `pointwise_std`.
    pub scatter: f64,
    /// `(batch size, RMS spread of batch means)`.
    pub batch_spread: Vec<(usize, f64)>,
}

fn rms_std(rows: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let k = rows.len() as f64;
    let len = rows[0].len();
    let std: Vec<f64> = (0..len)
        .map(|i| {
            let mean = rows.iter().map(|r| r[i]).sum::<f64>() / k;
            (rows.iter().map(|r| (r[i] - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        })
        .collect();
    let rms = (std.iter().map(|s| s * s).sum::<f64>() / len as f64).sqrt();
    (std, rms)
}

/// Pointwise scatter and the spread of batch means for every batch size that
/// leaves at least two full batches.
pub fn clustering_report(curves: &[DosCurve]) -> Result<ClusteringReport> {
    if curves.len() < 2 {
        return Err(Error::Input("clustering needs at least two curves".into()));
    }
    average_curve(curves)?;
    let rows: Vec<Vec<f64>> = curves.iter().map(|c| c.values.clone()).collect();
    let (pointwise_std, scatter) = rms_std(&rows);
    let mut batch_spread = Vec::new();
    for b in 1..=curves.len() / 2 {
        let means: Vec<Vec<f64>> = rows
            .chunks_exact(b)
            .map(|chunk| {
                (0..rows[0].len())
                    .map(|i| chunk.iter().map(|r| r[i]).sum::<f64>() / b as f64)
                    .collect()
            })
            .collect();
        batch_spread.push((b, rms_std(&means).1));
    }
    Ok(ClusteringReport {
        curves: curves.len(),
        pointwise_std,
        scatter,
        batch_spread,
    })
}
