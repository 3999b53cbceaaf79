//! Random two-phase coefficient fields built from overlapping square inclusions.
//!
//! Grid conventions used throughout the crate:
//!
//! * the unit torus carries `n` vertices per side, vertex `(i, j)` sits at `(i h, j h)`;
//! * cell `(i, j)` is the square `[i h, (i+1) h] x [j h, (j+1) h]`;
//! * vertices and cells are flattened as `i * n + j` (first coordinate major);
//! * all index arithmetic is modulo `n` (periodic wrap replaces the duplicated
//!   boundary row/column of an `n + 1` point grid).

use rand::Rng;

use crate::error::{Error, Result};
use crate::params::EnsembleParams;
use crate::rng;

/// A lattice-preserving isometry of the discrete torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryOp {
    Identity,
    /// Shift by whole grid intervals.
    Translate(isize, isize),
    /// Counter-clockwise quarter turn, `x -> (-x2, x1)`.
    Rotate90,
    /// `x -> (-x1, x2)`.
    ReflectX1,
    /// `x -> (x1, -x2)`.
    ReflectX2,
    /// `x -> (x2, x1)`.
    SwapAxes,
}

fn wrap(v: isize, n: usize) -> usize {
    v.rem_euclid(n as isize) as usize
}

impl SymmetryOp {
    /// Image of vertex `(i, j)`.
    pub fn map_vertex(&self, i: usize, j: usize, n: usize) -> (usize, usize) {
        let (i, j) = (i as isize, j as isize);
        let (a, b) = match *self {
            SymmetryOp::Identity => (i, j),
            SymmetryOp::Translate(d1, d2) => (i + d1, j + d2),
            SymmetryOp::Rotate90 => (-j, i),
            SymmetryOp::ReflectX1 => (-i, j),
            SymmetryOp::ReflectX2 => (i, -j),
            SymmetryOp::SwapAxes => (j, i),
        };
        (wrap(a, n), wrap(b, n))
    }

    /// Image of cell `(i, j)` (identified by its lower-left vertex).
    pub fn map_cell(&self, i: usize, j: usize, n: usize) -> (usize, usize) {
        let (i, j) = (i as isize, j as isize);
        let (a, b) = match *self {
            SymmetryOp::Identity => (i, j),
            SymmetryOp::Translate(d1, d2) => (i + d1, j + d2),
            SymmetryOp::Rotate90 => (-j - 1, i),
            SymmetryOp::ReflectX1 => (-i - 1, j),
            SymmetryOp::ReflectX2 => (i, -j - 1),
            SymmetryOp::SwapAxes => (j, i),
        };
        (wrap(a, n), wrap(b, n))
    }

    /// Orthogonal matrix acting on directions (identity for translations).
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        match *self {
            SymmetryOp::Identity | SymmetryOp::Translate(..) => [[1.0, 0.0], [0.0, 1.0]],
            SymmetryOp::Rotate90 => [[0.0, -1.0], [1.0, 0.0]],
            SymmetryOp::ReflectX1 => [[-1.0, 0.0], [0.0, 1.0]],
            SymmetryOp::ReflectX2 => [[1.0, 0.0], [0.0, -1.0]],
            SymmetryOp::SwapAxes => [[0.0, 1.0], [1.0, 0.0]],
        }
    }

    /// `perm[old_dof] = new_dof` for the vertex map on an `n x n` torus.
    pub fn vertex_permutation(&self, n: usize) -> Vec<usize> {
        let mut perm = vec![0; n * n];
        for i in 0..n {
            for j in 0..n {
                let (a, b) = self.map_vertex(i, j, n);
                perm[i * n + j] = a * n + b;
            }
        }
        perm
    }
}

/// One realization of the coefficient `a = lambda + (1 - lambda) * a_hat`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    params: EnsembleParams,
    centers: Vec<(usize, usize)>,
    cells: Vec<bool>,
    vertex_value: Vec<f64>,
    index: u64,
    seed: u64,
}

impl CoefficientField {
    /// Builds the field covered by inclusions centred at the given lattice points.
    pub fn from_centers(
        params: EnsembleParams,
        centers: Vec<(usize, usize)>,
        seed: u64,
        index: u64,
    ) -> Result<Self> {
        params.validate()?;
        let n = params.n();
        if let Some(c) = centers.iter().find(|c| c.0 >= n || c.1 >= n) {
            return Err(Error::param(format!("center {c:?} outside the {n}x{n} lattice")));
        }
        let k = params.inclusion_cells();
        let half = (k / 2) as isize;
        let mut cells = vec![false; n * n];
        for &(c1, c2) in &centers {
            for di in 0..k as isize {
                let ci = wrap(c1 as isize - half + di, n);
                for dj in 0..k as isize {
                    let cj = wrap(c2 as isize - half + dj, n);
                    cells[ci * n + cj] = true;
                }
            }
        }
        Ok(Self::assemble(params, centers, cells, seed, index))
    }

    /// Builds a field from an explicit per-cell indicator (`i * n + j` order).
    ///
    /// `centers` may be empty for hand-constructed geometries.
    pub fn from_cells(
        params: EnsembleParams,
        cells: Vec<bool>,
        centers: Vec<(usize, usize)>,
        seed: u64,
        index: u64,
    ) -> Result<Self> {
        params.validate()?;
        let n = params.n();
        if cells.len() != n * n {
            return Err(Error::param(format!(
                "cell indicator has {} entries, expected {}",
                cells.len(),
                n * n
            )));
        }
        Ok(Self::assemble(params, centers, cells, seed, index))
    }

    /// Field whose indicator is constant (`covered` everywhere or nowhere).
    pub fn uniform(params: EnsembleParams, covered: bool) -> Result<Self> {
        let n = params.n();
        Self::from_cells(params, vec![covered; n * n], Vec::new(), 0, 0)
    }

    fn assemble(
        params: EnsembleParams,
        centers: Vec<(usize, usize)>,
        cells: Vec<bool>,
        seed: u64,
        index: u64,
    ) -> Self {
        let vertex_value = vertex_fractions(&cells, params.n());
        Self {
            params,
            centers,
            cells,
            vertex_value,
            index,
            seed,
        }
    }

    pub fn params(&self) -> &EnsembleParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.params.n()
    }

    pub fn centers(&self) -> &[(usize, usize)] {
        &self.centers
    }

    /// Per-cell indicator, `i * n + j` order.
    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn is_covered(&self, i: usize, j: usize) -> bool {
        let n = self.n();
        self.cells[(i % n) * n + (j % n)]
    }

    /// Fraction of the four cells around each vertex that are covered.
    pub fn vertex_value(&self) -> &[f64] {
        &self.vertex_value
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stream id the centers were drawn from.
    pub fn stream_id(&self) -> u64 {
        rng::stream_id(self.params.l, self.index)
    }

    pub fn covered_cells(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn covered_fraction(&self) -> f64 {
        self.covered_cells() as f64 / self.cells.len() as f64
    }

    /// Coefficient value of cell `(i, j)`.
    pub fn cell_coefficient(&self, i: usize, j: usize) -> f64 {
        let lambda = self.params.lambda;
        if self.is_covered(i, j) {
            1.0
        } else {
            lambda
        }
    }

    /// Same field with a different contrast.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Ok(Self {
            params: self.params.with_lambda(lambda)?,
            ..self.clone()
        })
    }

    /// Same geometry on a grid refined `2^levels` times per direction.
    pub fn refined(&self, levels: u32) -> Self {
        let f = 1usize << levels;
        let n = self.n();
        let nf = n * f;
        let mut cells = vec![false; nf * nf];
        for i in 0..nf {
            for j in 0..nf {
                cells[i * nf + j] = self.cells[(i / f) * n + j / f];
            }
        }
        let centers = self.centers.iter().map(|&(a, b)| (a * f, b * f)).collect();
        Self::assemble(self.params.refined(levels), centers, cells, self.seed, self.index)
    }
}

/// Draws one realization: `L^2` i.i.d. uniform lattice centers.
pub fn sample_field(params: &EnsembleParams, seed: u64, index: u64) -> Result<CoefficientField> {
    params.validate()?;
    if index < 1 {
        return Err(Error::param("realization index must be >= 1"));
    }
    let n = params.n();
    let mut rng = rng::realization_rng(seed, params.l, index);
    let centers = (0..params.l * params.l)
        .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
        .collect();
    CoefficientField::from_centers(*params, centers, seed, index)
}

/// `lambda + (1 - lambda) * vertex_value` at every vertex.
pub fn coefficient_on_grid(field: &CoefficientField) -> Vec<f64> {
    let lambda = field.params.lambda;
    field
        .vertex_value
        .iter()
        .map(|&v| lambda + (1.0 - lambda) * v)
        .collect()
}

/// Image of `field` under `op` (push-forward: the picture is moved by the isometry).
pub fn transform_field(field: &CoefficientField, op: SymmetryOp) -> CoefficientField {
    let n = field.n();
    let mut cells = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            let (a, b) = op.map_cell(i, j, n);
            cells[a * n + b] = field.cells[i * n + j];
        }
    }
    let centers = field
        .centers
        .iter()
        .map(|&(a, b)| op.map_vertex(a, b, n))
        .collect();
    CoefficientField::assemble(field.params, centers, cells, field.seed, field.index)
}

fn vertex_fractions(cells: &[bool], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        let im = (i + n - 1) % n;
        for j in 0..n {
            let jm = (j + n - 1) % n;
            let count = [(im, jm), (im, j), (i, jm), (i, j)]
                .iter()
                .filter(|&&(a, b)| cells[a * n + b])
                .count();
            out[i * n + j] = count as f64 / 4.0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(l: usize, m0: usize, alpha: f64) -> EnsembleParams {
        EnsembleParams::new(l, m0, alpha, 0.4, 1e-8).unwrap()
    }

    #[test]
    fn full_period_inclusion_tiles_torus() {
        for seed in [0, 1, 99] {
            let f = sample_field(&params(1, 4, 0.5), seed, 1).unwrap();
            assert!(f.cells().iter().all(|&c| c));
            assert!(f.vertex_value().iter().all(|&v| v == 1.0));
        }
    }

    #[test]
    fn center_count_is_l_squared() {
        let f = sample_field(&params(8, 4, 0.25), 3, 5).unwrap();
        assert_eq!(f.centers().len(), 64);
    }

    #[test]
    fn index_zero_is_rejected() {
        assert!(sample_field(&params(2, 4, 0.25), 3, 0).is_err());
    }

    #[test]
    fn coefficient_values() {
        let p = params(2, 4, 0.25);
        let full = CoefficientField::uniform(p, true).unwrap();
        assert!(coefficient_on_grid(&full).iter().all(|&a| a == 1.0));
        let empty = CoefficientField::uniform(p, false).unwrap();
        assert!(coefficient_on_grid(&empty).iter().all(|&a| a == 0.4));
    }

    #[test]
    fn interface_vertex_takes_half_weight() {
        // left half covered: vertices on the two vertical interfaces see 2 of 4 cells
        let p = params(2, 4, 0.25);
        let n = p.n();
        let cells = (0..n * n).map(|k| k / n < n / 2).collect();
        let f = CoefficientField::from_cells(p, cells, vec![], 0, 0).unwrap();
        let a = coefficient_on_grid(&f);
        assert!((a[0 * n + 3] - 0.7).abs() < 1e-15);
        assert!((a[(n / 2) * n + 5] - 0.7).abs() < 1e-15);
        assert_eq!(a[2 * n + 1], 1.0);
        assert_eq!(a[(n / 2 + 2) * n + 1], 0.4);
    }

    #[test]
    fn single_inclusion_corner_weights() {
        let p = params(1, 8, 0.25); // one 4x4 inclusion on an 8x8 torus
        let f = CoefficientField::from_centers(p, vec![(4, 4)], 0, 1).unwrap();
        let v = |i: usize, j: usize| f.vertex_value()[i * 8 + j];
        assert_eq!(v(2, 2), 0.25); // exterior corner
        assert_eq!(v(2, 4), 0.5); // edge
        assert_eq!(v(4, 4), 1.0); // interior
        assert_eq!(v(0, 0), 0.0);
        // two overlapping blocks form an L-shape with a 3/4 re-entrant corner
        let g = CoefficientField::from_centers(p, vec![(4, 4), (6, 2)], 0, 1).unwrap();
        assert_eq!(g.vertex_value()[6 * 8 + 2], 1.0);
        assert_eq!(g.vertex_value()[4 * 8 + 2], 0.75);
    }

    #[test]
    fn identity_translation_and_rotation_group() {
        let f = sample_field(&params(4, 4, 0.25), 11, 2).unwrap();
        let n = f.n() as isize;
        assert_eq!(transform_field(&f, SymmetryOp::Identity), f);
        assert_eq!(transform_field(&f, SymmetryOp::Translate(n, 0)), f);
        assert_eq!(transform_field(&f, SymmetryOp::Translate(-n, 2 * n)), f);
        let mut g = f.clone();
        for _ in 0..4 {
            g = transform_field(&g, SymmetryOp::Rotate90);
        }
        assert_eq!(g, f);
        let r = transform_field(&transform_field(&f, SymmetryOp::ReflectX1), SymmetryOp::ReflectX1);
        assert_eq!(r, f);
    }

    #[test]
    fn transformed_field_is_resampled_consistently() {
        // transforming the centers and rebuilding gives the same cells as moving cells
        let f = sample_field(&params(4, 4, 0.25), 5, 9).unwrap();
        for op in [
            SymmetryOp::Rotate90,
            SymmetryOp::ReflectX1,
            SymmetryOp::ReflectX2,
            SymmetryOp::SwapAxes,
            SymmetryOp::Translate(3, -5),
        ] {
            let g = transform_field(&f, op);
            let rebuilt =
                CoefficientField::from_centers(*f.params(), g.centers().to_vec(), 5, 9).unwrap();
            assert_eq!(g.cells(), rebuilt.cells(), "{op:?}");
        }
    }

    #[test]
    fn refinement_preserves_geometry() {
        let f = sample_field(&params(2, 4, 0.25), 1, 1).unwrap();
        let r = f.refined(2);
        assert_eq!(r.n(), 32);
        assert_eq!(r.covered_fraction(), f.covered_fraction());
        let rebuilt =
            CoefficientField::from_centers(*r.params(), r.centers().to_vec(), 1, 1).unwrap();
        assert_eq!(rebuilt.cells(), r.cells());
    }
}
