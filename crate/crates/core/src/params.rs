//! RVE configuration: torus size, grid resolution, inclusion size and contrast.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative residual tolerance for the corrector solves.
pub const DEFAULT_TOL: f64 = 1e-8;

/// One RVE configuration.
///
/// The unit torus is split into `n = m0 * L` grid intervals per side. Inclusions are
/// axis-parallel squares of side `2 * alpha / L`, i.e. `2 * alpha * m0` grid cells, so
/// `alpha * m0` must be an integer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    /// Number of unit cells per side (the RVE size).
    #[serde(rename = "L")]
    pub l: usize,
    pub m0: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub tol: f64,
}

impl EnsembleParams {
    pub fn new(l: usize, m0: usize, alpha: f64, lambda: f64, tol: f64) -> Result<Self> {
        let p = Self {
            l,
            m0,
            alpha,
            lambda,
            tol,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 1 {
            return Err(Error::param(format!("L must be >= 1, got {}", self.l)));
        }
        if self.m0 < 2 || !self.m0.is_power_of_two() {
            return Err(Error::param(format!(
                "m0 must be a power of two >= 2, got {}",
                self.m0
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return Err(Error::param(format!(
                "alpha must lie in (0, 1/2], got {}",
                self.alpha
            )));
        }
        let am = self.alpha * self.m0 as f64;
        if (am - am.round()).abs() > 1e-9 || am.round() < 1.0 {
            return Err(Error::param(format!(
                "alpha * m0 must be a positive integer, got {am}"
            )));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::param(format!(
                "lambda must lie in (0, 1], got {}",
                self.lambda
            )));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::param(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }

    /// Grid intervals (and periodic DOFs) per dimension.
    pub fn n(&self) -> usize {
        self.m0 * self.l
    }

    /// Total number of periodic degrees of freedom, `n^2`.
    pub fn dofs(&self) -> usize {
        self.n() * self.n()
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n() as f64
    }

    /// Inclusion side length in grid cells, `2 * alpha * m0`.
    pub fn inclusion_cells(&self) -> usize {
        2 * (self.alpha * self.m0 as f64).round() as usize
    }

    /// Same configuration on a grid refined `2^levels` times.
    pub fn refined(&self, levels: u32) -> Self {
        Self {
            m0: self.m0 << levels,
            ..*self
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.l, self.m0, self.alpha, lambda, self.tol)
    }

    pub fn with_l(&self, l: usize) -> Result<Self> {
        Self::new(l, self.m0, self.alpha, self.lambda, self.tol)
    }

    pub fn with_tol(&self, tol: f64) -> Result<Self> {
        Self::new(self.l, self.m0, self.alpha, self.lambda, tol)
    }
}

/// Parses `"1/4"` or `"0.25"`.
pub fn parse_fraction(s: &str) -> Option<f64> {
    let s = s.trim();
    match s.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().ok()?;
            let den: f64 = den.trim().parse().ok()?;
            (den != 0.0).then_some(num / den)
        }
        None => s.parse().ok(),
    }
}
