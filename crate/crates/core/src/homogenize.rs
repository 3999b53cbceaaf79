//! Corrector problems, the per-realization homogenized matrix and the grid
//! refinement study.

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_rhs, assemble_total, Direction};
use crate::error::{Error, Result};
use crate::field::{sample_field, CoefficientField};
use crate::params::EnsembleParams;
use crate::solver::{dot, pcg_solve, project_mean_zero, Preconditioner, SolveReport, DEFAULT_MAX_ITER};
use crate::sparse::SparseOperator;

/// Solver settings shared by both corrector solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Shift of the preconditioner; `0` selects mean-zero projection.
    pub delta: f64,
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: crate::params::DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            delta: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorPair {
    pub phi: [Vec<f64>; 2],
    pub reports: [SolveReport; 2],
}

impl CorrectorPair {
    pub fn phi1(&self) -> &[f64] {
        &self.phi[0]
    }

    pub fn phi2(&self) -> &[f64] {
        &self.phi[1]
    }

    pub fn converged(&self) -> bool {
        self.reports.iter().all(|r| r.converged)
    }

    pub fn iterations(&self) -> [usize; 2] {
        [self.reports[0].iterations, self.reports[1].iterations]
    }
}

pub fn solve_correctors(field: &CoefficientField, lambda: f64, tol: f64) -> Result<CorrectorPair> {
    solve_correctors_with(field, lambda, &SolveOptions::with_tol(tol))
}

pub fn solve_correctors_with(
    field: &CoefficientField,
    lambda: f64,
    opts: &SolveOptions,
) -> Result<CorrectorPair> {
    let a = assemble_total(field, lambda)?;
    let p = Preconditioner::new(field.n(), lambda, opts.delta)?;
    solve_correctors_assembled(field, &a, &p, lambda, opts)
}

/// Corrector solves against a pre-assembled operator and preconditioner.
pub fn solve_correctors_assembled(
    field: &CoefficientField,
    a: &SparseOperator,
    p: &Preconditioner,
    lambda: f64,
    opts: &SolveOptions,
) -> Result<CorrectorPair> {
    let solve = |dir| -> Result<(Vec<f64>, SolveReport)> {
        let f = assemble_rhs(field, lambda, dir)?;
        pcg_solve(a, p, &f, opts.tol, opts.max_iter)
    };
    let (phi1, r1) = solve(Direction::X1)?;
    let (phi2, r2) = solve(Direction::X2)?;
    Ok(CorrectorPair {
        phi: [phi1, phi2],
        reports: [r1, r2],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogenizedMatrix {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
    pub realization_index: u64,
    pub iterations_total: usize,
    pub converged: bool,
}

impl HomogenizedMatrix {
    /// Matrix with no solver diagnostics attached.
    pub fn from_entries(a: [[f64; 2]; 2], realization_index: u64) -> Self {
        Self {
            a11: a[0][0],
            a12: a[0][1],
            a21: a[1][0],
            a22: a[1][1],
            realization_index,
            iterations_total: 0,
            converged: true,
        }
    }

    pub fn entries(&self) -> [[f64; 2]; 2] {
        [[self.a11, self.a12], [self.a21, self.a22]]
    }

    /// Row-major `(a11, a12, a21, a22)`.
    pub fn flat(&self) -> [f64; 4] {
        [self.a11, self.a12, self.a21, self.a22]
    }

    pub fn asymmetry(&self) -> f64 {
        (self.a12 - self.a21).abs()
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn sym_eigenvalues(&self) -> [f64; 2] {
        let s = 0.5 * (self.a12 + self.a21);
        let mid = 0.5 * (self.a11 + self.a22);
        let rad = (0.25 * (self.a11 - self.a22).powi(2) + s * s).sqrt();
        [mid - rad, mid + rad]
    }

    /// `R A R^T` for a 2x2 orthogonal `R`.
    pub fn conjugated(&self, r: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
        let a = self.entries();
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                for k in 0..2 {
                    for l in 0..2 {
                        *v += r[i][k] * a[k][l] * r[j][l];
                    }
                }
            }
        }
        out
    }
}

fn mean_coefficient(field: &CoefficientField, lambda: f64) -> f64 {
    let covered = field.covered_cells() as f64;
    let total = field.cells().len() as f64;
    (covered + lambda * (total - covered)) / total
}

/// `int_cell d(phi)/dx_dir` for every cell, corner quadrature (exact for bilinears).
fn cell_derivative_integral(phi: &[f64], n: usize, i: usize, j: usize, dir: usize) -> f64 {
    let (i1, j1) = ((i + 1) % n, (j + 1) % n);
    let v00 = phi[i * n + j];
    let v10 = phi[i1 * n + j];
    let v01 = phi[i * n + j1];
    let v11 = phi[i1 * n + j1];
    let h = 1.0 / n as f64;
    if dir == 0 {
        0.5 * h * ((v10 - v00) + (v11 - v01))
    } else {
        0.5 * h * ((v01 - v00) + (v11 - v10))
    }
}

/// `F[i][j] = int a d(phi_i)/dx_j` over the torus.
fn flux_terms(field: &CoefficientField, phi: &[Vec<f64>; 2], lambda: f64) -> [[f64; 2]; 2] {
    let n = field.n();
    let mut out = [[0.0; 2]; 2];
    for i in 0..n {
        for j in 0..n {
            let a = if field.is_covered(i, j) { 1.0 } else { lambda };
            for (c, row) in out.iter_mut().enumerate() {
                for (d, v) in row.iter_mut().enumerate() {
                    *v += a * cell_derivative_integral(&phi[c], n, i, j, d);
                }
            }
        }
    }
    out
}

/// `a_ij = int a (e_i + grad phi_i) . e_j`, using the corner quadrature of the assembly.
pub fn homogenized_matrix(
    field: &CoefficientField,
    correctors: &CorrectorPair,
    lambda: f64,
) -> HomogenizedMatrix {
    let mean = mean_coefficient(field, lambda);
    let flux = flux_terms(field, &correctors.phi, lambda);
    HomogenizedMatrix {
        a11: mean + flux[0][0],
        a12: flux[0][1],
        a21: flux[1][0],
        a22: mean + flux[1][1],
        realization_index: field.index(),
        iterations_total: correctors.reports.iter().map(|r| r.iterations).sum(),
        converged: correctors.converged(),
    }
}

/// Symmetric energy form `int (e_j + grad phi_j) . a (e_i + grad phi_i)`.
pub fn energy_form(
    field: &CoefficientField,
    correctors: &CorrectorPair,
    lambda: f64,
) -> Result<[[f64; 2]; 2]> {
    let a = assemble_total(field, lambda)?;
    let h = 1.0 / field.n() as f64;
    let mean = mean_coefficient(field, lambda);
    let flux = flux_terms(field, &correctors.phi, lambda);
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        let ai = a.apply(&correctors.phi[i]);
        for j in 0..2 {
            let diag = if i == j { mean } else { 0.0 };
            // the operator carries a 1/h factor relative to the bilinear form
            out[i][j] = diag + flux[i][j] + flux[j][i] + h * dot(&correctors.phi[j], &ai);
        }
    }
    Ok(out)
}

/// Correctors plus homogenized matrix for one realization.
pub fn homogenize(
    field: &CoefficientField,
    lambda: f64,
    opts: &SolveOptions,
) -> Result<(HomogenizedMatrix, CorrectorPair)> {
    let c = solve_correctors_with(field, lambda, opts)?;
    Ok((homogenized_matrix(field, &c, lambda), c))
}

/// One row of a refinement table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    /// Fine grid size of the pair.
    pub n: usize,
    /// `||u_fine - I u_coarse|| / ||I u_coarse||` on the fine grid.
    pub rel_diff: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementTable {
    pub coarse_n: usize,
    pub rows: Vec<RefinementRow>,
}

impl RefinementTable {
    /// Ratios of successive differences.
    pub fn decay_factors(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| w[0].rel_diff / w[1].rel_diff)
            .collect()
    }

    /// Least-squares `beta` in `diff ~ h^beta`.
    pub fn convergence_order(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.rel_diff > 0.0)
            .map(|r| ((1.0 / r.n as f64).ln(), r.rel_diff.ln()))
            .collect();
        crate::ensemble::least_squares(&pts).map(|f| f.0)
    }
}

/// Bilinear interpolation from an `n x n` periodic grid to `2n x 2n`.
pub fn prolongate(u: &[f64], n: usize) -> Vec<f64> {
    assert_eq!(u.len(), n * n);
    let nf = 2 * n;
    let mut out = vec![0.0; nf * nf];
    let at = |i: usize, j: usize| u[(i % n) * n + (j % n)];
    for i in 0..n {
        for j in 0..n {
            let (a, b, c, d) = (at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1));
            out[2 * i * nf + 2 * j] = a;
            out[(2 * i + 1) * nf + 2 * j] = 0.5 * (a + b);
            out[2 * i * nf + 2 * j + 1] = 0.5 * (a + c);
            out[(2 * i + 1) * nf + 2 * j + 1] = 0.25 * (a + b + c + d);
        }
    }
    out
}

/// `h * rhs(x_v)` at the vertices (lumped load, scaled like the operator), projected
/// to mean zero.
pub fn vertex_load(n: usize, rhs: &dyn Fn(f64, f64) -> f64) -> Vec<f64> {
    let h = 1.0 / n as f64;
    let mut f: Vec<f64> = (0..n * n)
        .map(|d| h * rhs((d / n) as f64 * h, (d % n) as f64 * h))
        .collect();
    project_mean_zero(&mut f);
    f
}

/// Default load of the refinement study.
pub fn default_refinement_rhs(x: f64, y: f64) -> f64 {
    use std::f64::consts::PI;
    (2.0 * PI * x).sin() * (6.0 * PI * y).cos()
}

/// Solves `-div(a grad u) = rhs` for one geometry on each grid of `grid_list` and
/// reports successive differences.
///
/// The geometry is that of `field` (on its own grid); each listed grid must be a
/// dyadic refinement of it.
pub fn refinement_study_for_field(
    field: &CoefficientField,
    lambda: f64,
    grid_list: &[usize],
    rhs: &dyn Fn(f64, f64) -> f64,
    opts: &SolveOptions,
) -> Result<RefinementTable> {
    if grid_list.len() < 2 {
        return Err(Error::param("refinement study needs at least two grids"));
    }
    let base = field.n();
    let mut levels = Vec::with_capacity(grid_list.len());
    for (k, &g) in grid_list.iter().enumerate() {
        if g % base != 0 || !(g / base).is_power_of_two() {
            return Err(Error::param(format!("grid {g} is not a dyadic refinement of {base}")));
        }
        if k > 0 && g != 2 * grid_list[k - 1] {
            return Err(Error::param(format!(
                "grids must double: {} -> {g}",
                grid_list[k - 1]
            )));
        }
        levels.push((g / base).trailing_zeros());
    }
    let mut rows = Vec::new();
    let mut prev: Option<Vec<f64>> = None;
    for (&g, &lev) in grid_list.iter().zip(&levels) {
        let fine = field.refined(lev);
        let a = assemble_total(&fine, lambda)?;
        let p = Preconditioner::new(g, lambda, opts.delta)?;
        let f = vertex_load(g, rhs);
        let (u, rep) = pcg_solve(&a, &p, &f, opts.tol, opts.max_iter)?;
        if !rep.converged {
            log::warn!("refinement solve on n={g} stopped at residual {:e}", rep.final_relative_residual);
        }
        if let Some(coarse) = prev.take() {
            let interp = prolongate(&coarse, g / 2);
            let num: f64 = u.iter().zip(&interp).map(|(x, y)| (x - y).powi(2)).sum();
            let den: f64 = interp.iter().map(|y| y * y).sum();
            rows.push(RefinementRow {
                n: g,
                rel_diff: (num / den).sqrt(),
                iterations: rep.iterations,
            });
        }
        prev = Some(u);
    }
    Ok(RefinementTable {
        coarse_n: grid_list[0],
        rows,
    })
}

/// Refinement study for a freshly sampled geometry with `m0 = grid_list[0] / L`.
pub fn refinement_study(
    l: usize,
    lambda: f64,
    alpha: f64,
    seed: u64,
    grid_list: &[usize],
    rhs: &dyn Fn(f64, f64) -> f64,
    opts: &SolveOptions,
) -> Result<RefinementTable> {
    let first = *grid_list
        .first()
        .ok_or_else(|| Error::param("empty grid list"))?;
    if l == 0 || first % l != 0 {
        return Err(Error::param(format!("first grid {first} is not a multiple of L={l}")));
    }
    let params = EnsembleParams::new(l, first / l, alpha, lambda, opts.tol)?;
    let field = sample_field(&params, seed, 1)?;
    refinement_study_for_field(&field, lambda, grid_list, rhs, opts)
}
