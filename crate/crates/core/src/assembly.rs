//! Periodic bilinear-FEM stiffness matrices as sums of Kronecker products.
//!
//! Scaling: every operator and load vector is `1/h` times the true Galerkin quantity.
//! The 1D stiffness factor is `(1/h) [[1, -1], [-1, 1]]` per interval and the lumped
//! 1D mass factor is `diag(1/2, 1/2)` per interval, so a cell with unit coefficient
//! contributes `(1/h) (Q (x) I + I (x) Q)`. With `h = 1/n` every stored value is an
//! integer multiple of `n/2`, which keeps all sums exact and makes assembly
//! independent of summation order.
//!
//! The total stiffness matrix is `A = lambda * A_lap + (1 - lambda) * A_s` where
//! `A_lap` is the periodic 5-point Laplacian (`T (x) I + I (x) T`) and `A_s`
//! collects one Kronecker pair per covered cell.

use crate::error::{Error, Result};
use crate::field::CoefficientField;
use crate::sparse::SparseOperator;

type Triplet = (usize, usize, f64);

/// Coordinate direction of a corrector / load vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    X1,
    X2,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::X1, Direction::X2];

    pub fn index(self) -> usize {
        match self {
            Direction::X1 => 0,
            Direction::X2 => 1,
        }
    }
}

/// A 2x2 block placed at rows/columns `{idx[0], idx[1]}` of an `n x n` zero matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFactor {
    pub idx: [usize; 2],
    pub block: [[f64; 2]; 2],
}

impl LocalFactor {
    /// `(1/h) [[1, -1], [-1, 1]]` on interval `[k, k+1]` (Neumann stiffness, SPD sign).
    pub fn stiffness(k: usize, n: usize) -> Self {
        let s = n as f64;
        Self {
            idx: [k, (k + 1) % n],
            block: [[s, -s], [-s, s]],
        }
    }

    /// Lumped mass `diag(1/2, 1/2)` on interval `[k, k+1]`.
    pub fn lumped_mass(k: usize, n: usize) -> Self {
        Self {
            idx: [k, (k + 1) % n],
            block: [[0.5, 0.0], [0.0, 0.5]],
        }
    }
}

/// Appends the nonzero entries of `scale * (a (x) b)`, with `b` of dimension `n`.
fn push_kron(a: &LocalFactor, b: &LocalFactor, n: usize, scale: f64, out: &mut Vec<Triplet>) {
    for p in 0..2 {
        for q in 0..2 {
            let apq = a.block[p][q];
            if apq == 0.0 {
                continue;
            }
            for r in 0..2 {
                for s in 0..2 {
                    let brs = b.block[r][s];
                    if brs == 0.0 {
                        continue;
                    }
                    let row = a.idx[p] * n + b.idx[r];
                    let col = a.idx[q] * n + b.idx[s];
                    out.push((row, col, scale * apq * brs));
                }
            }
        }
    }
}

/// Kronecker product of two sparse `n x n` matrices given as triplets.
fn kron_triplets(a: &[Triplet], b: &[Triplet], n: usize, out: &mut Vec<Triplet>) {
    for &(ra, ca, va) in a {
        for &(rb, cb, vb) in b {
            out.push((ra * n + rb, ca * n + cb, va * vb));
        }
    }
}

/// Periodic 1D stiffness `(1/h) tridiag(-1, 2, -1)` with wrap-around corners.
pub fn periodic_stiffness_1d(n: usize) -> Vec<Triplet> {
    let s = n as f64;
    let mut t = Vec::with_capacity(3 * n);
    for k in 0..n {
        t.push((k, k, 2.0 * s));
        t.push((k, (k + 1) % n, -s));
        t.push((k, (k + n - 1) % n, -s));
    }
    t
}

fn identity_1d(n: usize) -> Vec<Triplet> {
    (0..n).map(|k| (k, k, 1.0)).collect()
}

/// Periodic 5-point Laplacian (SPD sign) as the Kronecker sum `T (x) I + I (x) T`.
pub fn assemble_laplacian(n: usize) -> Result<SparseOperator> {
    if n < 2 {
        return Err(Error::param(format!("grid size must be >= 2, got {n}")));
    }
    let t = periodic_stiffness_1d(n);
    let id = identity_1d(n);
    let mut trip = Vec::with_capacity(6 * n * n);
    kron_triplets(&t, &id, n, &mut trip);
    kron_triplets(&id, &t, n, &mut trip);
    Ok(SparseOperator::from_triplets(n * n, trip))
}

/// Factored form of the inclusion part: one `(Q_k (x) I_k + I_k (x) Q_k)` pair per
/// covered cell.
#[derive(Debug, Clone)]
pub struct KroneckerSum {
    n: usize,
    terms: Vec<(LocalFactor, LocalFactor)>,
}

impl KroneckerSum {
    /// Decomposes the covered set into elementary cells (one per covered grid cell).
    pub fn from_field(field: &CoefficientField) -> Self {
        let n = field.n();
        let mut terms = Vec::with_capacity(2 * field.covered_cells());
        for i in 0..n {
            for j in 0..n {
                if field.is_covered(i, j) {
                    let (q1, m1) = (LocalFactor::stiffness(i, n), LocalFactor::lumped_mass(i, n));
                    let (q2, m2) = (LocalFactor::stiffness(j, n), LocalFactor::lumped_mass(j, n));
                    terms.push((q1, m2));
                    terms.push((m1, q2));
                }
            }
        }
        Self { n, terms }
    }

    /// Number of elementary cells `K`.
    pub fn cells(&self) -> usize {
        self.terms.len() / 2
    }

    /// Scalars stored by the factored representation (indices plus block values).
    pub fn storage(&self) -> usize {
        self.terms.len() * 2 * (2 + 4)
    }

    pub fn to_operator(&self) -> SparseOperator {
        let n = self.n;
        let mut trip = Vec::with_capacity(self.terms.len() * 4);
        for (a, b) in &self.terms {
            push_kron(a, b, n, 1.0, &mut trip);
        }
        SparseOperator::from_triplets(n * n, trip)
    }
}

/// Inclusion part `A_s` of the stiffness matrix.
pub fn assemble_stochastic(field: &CoefficientField) -> SparseOperator {
    KroneckerSum::from_field(field).to_operator()
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda <= 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("lambda must lie in (0, 1], got {lambda}")))
    }
}

/// `lambda * A_lap + (1 - lambda) * A_s`.
pub fn assemble_total(field: &CoefficientField, lambda: f64) -> Result<SparseOperator> {
    check_lambda(lambda)?;
    let lap = assemble_laplacian(field.n())?;
    let stoch = assemble_stochastic(field);
    Ok(lap.linear_combination(lambda, &stoch, 1.0 - lambda))
}

/// Corrector load `f_mu = -(1 - lambda) * sum_cells a_hat * int_cell d(psi_mu)/dx_i`.
///
/// Per covered cell this is the Kronecker product of the integrated 1D derivative
/// `[-1, 1]` in direction `i` with the lumped mass `[1/2, 1/2]` in the other one.
pub fn assemble_rhs(field: &CoefficientField, lambda: f64, dir: Direction) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    let n = field.n();
    let c = -(1.0 - lambda);
    let mut f = vec![0.0; n * n];
    if c == 0.0 {
        return Ok(f);
    }
    let grad = [-1.0, 1.0];
    let mass = [0.5, 0.5];
    let (w1, w2) = match dir {
        Direction::X1 => (grad, mass),
        Direction::X2 => (mass, grad),
    };
    for i in 0..n {
        for j in 0..n {
            if !field.is_covered(i, j) {
                continue;
            }
            for p in 0..2 {
                let vi = (i + p) % n;
                for q in 0..2 {
                    let vj = (j + q) % n;
                    f[vi * n + vj] += c * w1[p] * w2[q];
                }
            }
        }
    }
    Ok(f)
}

/// Largest grid handled by [`reference_assemble`].
pub const REFERENCE_MAX_N: usize = 64;

/// Element-by-element assembly used as an independent oracle.
///
/// For every cell the local 4x4 block of `a_cell * int grad(psi_a) . grad(psi_b)` is
/// evaluated from the bilinear basis gradients with the corner (trapezoidal) rule,
/// which is the quadrature equivalent of lumping the 1D mass factors.
pub fn reference_assemble(field: &CoefficientField, lambda: f64) -> Result<SparseOperator> {
    check_lambda(lambda)?;
    let n = field.n();
    if n > REFERENCE_MAX_N {
        return Err(Error::param(format!(
            "reference assembly is limited to n <= {REFERENCE_MAX_N}, got {n}"
        )));
    }
    let h = 1.0 / n as f64;
    let local = reference_local_block(h);
    let mut trip = Vec::with_capacity(16 * n * n);
    for i in 0..n {
        for j in 0..n {
            let a = if field.is_covered(i, j) { 1.0 } else { lambda };
            let dofs: [usize; 4] = LOCAL_VERTICES.map(|(p, q)| ((i + p) % n) * n + (j + q) % n);
            for (al, &ra) in dofs.iter().enumerate() {
                for (be, &cb) in dofs.iter().enumerate() {
                    let v = a * local[al][be];
                    if v != 0.0 {
                        trip.push((ra, cb, v));
                    }
                }
            }
        }
    }
    Ok(SparseOperator::from_triplets(n * n, trip))
}

const LOCAL_VERTICES: [(usize, usize); 4] = [(0, 0), (1, 0), (0, 1), (1, 1)];

/// `(1/h) * int_cell grad(psi_a) . grad(psi_b)` with corner quadrature.
fn reference_local_block(h: f64) -> [[f64; 4]; 4] {
    // shape function l_p(t) = 1 - t or t on the reference interval
    let shape = |p: usize, t: f64| if p == 0 { 1.0 - t } else { t };
    let dshape = |p: usize| if p == 0 { -1.0 } else { 1.0 };
    let grad = |(p, q): (usize, usize), t: f64, s: f64| {
        [dshape(p) * shape(q, s) / h, shape(p, t) * dshape(q) / h]
    };
    let mut k = [[0.0; 4]; 4];
    for (a, &va) in LOCAL_VERTICES.iter().enumerate() {
        for (b, &vb) in LOCAL_VERTICES.iter().enumerate() {
            let mut acc = 0.0;
            for &(t, s) in &[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
                let ga = grad(va, t, s);
                let gb = grad(vb, t, s);
                acc += 0.25 * h * h * (ga[0] * gb[0] + ga[1] * gb[1]);
            }
            k[a][b] = acc / h;
        }
    }
    k
}
