//! Preconditioned conjugate gradients on the mean-zero subspace.
//!
//! The preconditioner is `B = (1 + lambda)/2 * A_lap + delta * I`. On the periodic grid
//! `A_lap` is diagonalized by the 2D DFT with eigenvalues
//! `n * (2 - 2 cos(2 pi k1 / n) + 2 - 2 cos(2 pi k2 / n))`, so `B^{-1}` costs two FFTs.
//! With `delta = 0` the constant mode is projected out instead of inverted.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::sparse::SparseOperator;

/// Default iteration cap for corrector solves.
pub const DEFAULT_MAX_ITER: usize = 200;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Subtracts the mean in place.
pub fn project_mean_zero(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// Eigenvalues of the periodic 1D stiffness `(1/h) tridiag(-1, 2, -1)`.
pub fn periodic_symbol_1d(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| n as f64 * (2.0 - 2.0 * (2.0 * PI * k as f64 / n as f64).cos()))
        .collect()
}

/// Spectral solver for `B = (1 + lambda)/2 * A_lap + delta * I`.
#[derive(Clone)]
pub struct Preconditioner {
    n: usize,
    lambda: f64,
    delta: f64,
    /// Eigenvalues of `B` in DFT order (`k1 * n + k2`).
    eigs: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Preconditioner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Preconditioner")
            .field("n", &self.n)
            .field("lambda", &self.lambda)
            .field("delta", &self.delta)
            .finish()
    }
}

impl Preconditioner {
    pub fn new(n: usize, lambda: f64, delta: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::param(format!("grid size must be >= 2, got {n}")));
        }
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::param(format!("lambda must lie in (0, 1], got {lambda}")));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::param(format!("delta must be >= 0, got {delta}")));
        }
        let scale = 0.5 * (1.0 + lambda);
        let sym = periodic_symbol_1d(n);
        let mut eigs = Vec::with_capacity(n * n);
        for &s1 in &sym {
            for &s2 in &sym {
                eigs.push(scale * (s1 + s2) + delta);
            }
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            lambda,
            delta,
            eigs,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Eigenvalues of `B`, DFT-indexed.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigs
    }

    /// `z = B^{-1} r` (pseudo-inverse on mean-zero vectors when `delta = 0`).
    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        self.apply_power(r, -1.0)
    }

    /// `z = B^{-1/2} r`, same null-space convention as [`Preconditioner::apply`].
    pub fn apply_inverse_sqrt(&self, r: &[f64]) -> Vec<f64> {
        self.apply_power(r, -0.5)
    }

    /// `B^p r` through the DFT diagonalization, zero eigenvalues mapped to zero.
    fn apply_power(&self, r: &[f64], power: f64) -> Vec<f64> {
        let n = self.n;
        assert_eq!(r.len(), n * n, "vector length does not match grid");
        let mut buf: Vec<Complex64> = r.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let mut scratch = vec![Complex64::default(); self.fwd.get_inplace_scratch_len()];
        self.fwd.process_with_scratch(&mut buf, &mut scratch);
        transpose(&mut buf, n);
        self.fwd.process_with_scratch(&mut buf, &mut scratch);
        // the symbol is symmetric in (k1, k2), so the transposed layout needs no remap
        for (c, &e) in buf.iter_mut().zip(&self.eigs) {
            *c *= if e > 0.0 { e.powf(power) } else { 0.0 };
        }
        let mut scratch = vec![Complex64::default(); self.inv.get_inplace_scratch_len()];
        self.inv.process_with_scratch(&mut buf, &mut scratch);
        transpose(&mut buf, n);
        self.inv.process_with_scratch(&mut buf, &mut scratch);
        let norm = 1.0 / (n * n) as f64;
        buf.iter().map(|c| c.re * norm).collect()
    }
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// Alias kept for call sites that read better as a free function.
pub fn build_preconditioner(n: usize, lambda: f64, delta: f64) -> Result<Preconditioner> {
    Preconditioner::new(n, lambda, delta)
}

pub fn apply_preconditioner(p: &Preconditioner, r: &[f64]) -> Vec<f64> {
    p.apply(r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `||r_k||_{B^-1} / ||r_0||_{B^-1}` at exit.
    pub final_relative_residual: f64,
    pub converged: bool,
    /// Relative preconditioned residual after each iteration.
    pub residual_history: Vec<f64>,
}

struct PcgOutcome {
    x: Vec<f64>,
    report: SolveReport,
    /// CG step lengths and direction updates, for Lanczos estimates.
    alphas: Vec<f64>,
    betas: Vec<f64>,
}

/// Solves `A u = f` for mean-zero `u`.
///
/// Stops when the relative `B^{-1}`-norm of the residual drops to `tol`; hitting
/// `max_iter` is reported through `converged = false`, not as an error.
pub fn pcg_solve(
    a: &SparseOperator,
    p: &Preconditioner,
    f: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    let out = pcg_core(a, p, f, tol, max_iter, &mut |_, _| {})?;
    Ok((out.x, out.report))
}

/// Like [`pcg_solve`], calling `observe(k, x_k)` after every iteration.
pub fn pcg_solve_observed(
    a: &SparseOperator,
    p: &Preconditioner,
    f: &[f64],
    tol: f64,
    max_iter: usize,
    observe: &mut dyn FnMut(usize, &[f64]),
) -> Result<(Vec<f64>, SolveReport)> {
    let out = pcg_core(a, p, f, tol, max_iter, observe)?;
    Ok((out.x, out.report))
}

fn pcg_core(
    a: &SparseOperator,
    p: &Preconditioner,
    f: &[f64],
    tol: f64,
    max_iter: usize,
    observe: &mut dyn FnMut(usize, &[f64]),
) -> Result<PcgOutcome> {
    let m = a.dim();
    if f.len() != m || p.n() * p.n() != m {
        return Err(Error::Input(format!(
            "dimension mismatch: operator {m}, rhs {}, preconditioner {}",
            f.len(),
            p.n() * p.n()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::param(format!("tol must be positive, got {tol}")));
    }
    let fnorm = norm(f);
    let mean_f: f64 = f.iter().sum();
    if mean_f.abs() > 1e-10 * fnorm {
        return Err(Error::Input(format!(
            "right-hand side is not compatible: <f, 1> = {mean_f:e}, ||f|| = {fnorm:e}"
        )));
    }
    let mut x = vec![0.0; m];
    let outcome = |x: Vec<f64>, iterations, rel, converged, history, alphas, betas| PcgOutcome {
        x,
        report: SolveReport {
            iterations,
            final_relative_residual: rel,
            converged,
            residual_history: history,
        },
        alphas,
        betas,
    };
    if fnorm == 0.0 {
        return Ok(outcome(x, 0, 0.0, true, vec![], vec![], vec![]));
    }

    let mut r = f.to_vec();
    project_mean_zero(&mut r);
    let mut z = p.apply(&r);
    project_mean_zero(&mut z);
    let mut rz = dot(&r, &z);
    let rz0 = rz;
    if !(rz0 > 0.0) {
        return Ok(outcome(x, 0, 0.0, true, vec![], vec![], vec![]));
    }
    let mut dir = z.clone();
    let mut ad = vec![0.0; m];
    let mut history = Vec::new();
    let (mut alphas, mut betas) = (Vec::new(), Vec::new());
    let mut rel = 1.0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iter {
        a.apply_into(&dir, &mut ad);
        let curvature = dot(&dir, &ad);
        if !(curvature > 0.0) || !curvature.is_finite() {
            return Err(Error::Numerical(format!(
                "PCG breakdown at iteration {iterations}: p^T A p = {curvature:e}"
            )));
        }
        let alpha = rz / curvature;
        for ((xi, ri), (di, adi)) in x.iter_mut().zip(r.iter_mut()).zip(dir.iter().zip(&ad)) {
            *xi += alpha * di;
            *ri -= alpha * adi;
        }
        iterations += 1;
        observe(iterations, &x);
        z = p.apply(&r);
        project_mean_zero(&mut z);
        let rz_new = dot(&r, &z).max(0.0);
        rel = (rz_new / rz0).sqrt();
        history.push(rel);
        alphas.push(alpha);
        if rel <= tol {
            converged = true;
            break;
        }
        let beta = rz_new / rz;
        betas.push(beta);
        for (di, zi) in dir.iter_mut().zip(&z) {
            *di = zi + beta * *di;
        }
        rz = rz_new;
    }
    project_mean_zero(&mut x);
    Ok(outcome(x, iterations, rel, converged, history, alphas, betas))
}

/// Extreme eigenvalues of `B^{-1} A` restricted to mean-zero vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumBounds {
    pub mu_min: f64,
    pub mu_max: f64,
}

impl SpectrumBounds {
    pub fn condition(&self) -> f64 {
        self.mu_max / self.mu_min
    }
}

/// Largest system for which [`extreme_generalized_eigs`] forms the dense pencil.
pub const DENSE_EIG_MAX_DIM: usize = 1024;

/// Dense evaluation for `dim <= 1024`, Lanczos (from PCG coefficients) above.
pub fn extreme_generalized_eigs(a: &SparseOperator, p: &Preconditioner) -> Result<SpectrumBounds> {
    if a.dim() <= DENSE_EIG_MAX_DIM {
        dense_generalized_eigs(a, p)
    } else {
        lanczos_generalized_eigs(a, p, 150)
    }
}

fn dense_generalized_eigs(a: &SparseOperator, p: &Preconditioner) -> Result<SpectrumBounds> {
    let m = a.dim();
    let mut half = DMatrix::zeros(m, m);
    let mut e = vec![0.0; m];
    for k in 0..m {
        e[k] = 1.0;
        let y = p.apply_inverse_sqrt(&e);
        half.column_mut(k).copy_from_slice(&y);
        e[k] = 0.0;
    }
    let dense_a = a.to_dense();
    let c = &half * dense_a * &half;
    let c = 0.5 * (&c + c.transpose());
    let mut ev: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    // the constant vector is in the kernel of both A and B^{-1/2}
    Ok(SpectrumBounds {
        mu_min: ev[1],
        mu_max: ev[m - 1],
    })
}

/// Lanczos estimate from the CG recurrence coefficients on a random mean-zero RHS.
pub fn lanczos_generalized_eigs(
    a: &SparseOperator,
    p: &Preconditioner,
    steps: usize,
) -> Result<SpectrumBounds> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut f: Vec<f64> = (0..a.dim()).map(|_| rng.random::<f64>() - 0.5).collect();
    project_mean_zero(&mut f);
    let out = pcg_core(a, p, &f, 1e-13, steps, &mut |_, _| {})?;
    let k = out.alphas.len();
    if k == 0 {
        return Err(Error::Numerical("no Lanczos steps performed".into()));
    }
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        let mut d = 1.0 / out.alphas[i];
        if i > 0 {
            d += out.betas[i - 1] / out.alphas[i - 1];
        }
        t[(i, i)] = d;
        if i + 1 < k {
            let off = out.betas[i].sqrt() / out.alphas[i];
            t[(i, i + 1)] = off;
            t[(i + 1, i)] = off;
        }
    }
    let ev = SymmetricEigen::new(t).eigenvalues;
    Ok(SpectrumBounds {
        mu_min: ev.min(),
        mu_max: ev.max(),
    })
}
