//! Compressed-row symmetric operators over the periodic grid.

use nalgebra::DMatrix;

/// Square sparse matrix in compressed-row form with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOperator {
    /// Compresses `(row, col, value)` triplets, summing duplicates.
    ///
    /// Duplicates are summed in insertion order, so the result depends only on the
    /// triplet sequence.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        // stable: keeps insertion order among duplicates
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside {dim}x{dim}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                values.push(v);
                last = Some((r, c));
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            dim,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: vec![0; dim + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Stored entries, including explicit zeros.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.row_ptr[r + 1] - self.row_ptr[r]
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yr = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.apply_into(x, &mut y);
        y
    }

    /// `a * self + b * other`, evaluated entrywise over the union of patterns.
    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut row_ptr = vec![0usize; self.dim + 1];
        let mut col_idx = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut values = Vec::with_capacity(col_idx.capacity());
        for r in 0..self.dim {
            let mut p = self.row(r).peekable();
            let mut q = other.row(r).peekable();
            loop {
                let (c, v) = match (p.peek().copied(), q.peek().copied()) {
                    (None, None) => break,
                    (Some((cp, vp)), Some((cq, vq))) if cp == cq => {
                        p.next();
                        q.next();
                        (cp, a * vp + b * vq)
                    }
                    (Some((cp, vp)), Some((cq, _))) if cp < cq => {
                        p.next();
                        (cp, a * vp + b * 0.0)
                    }
                    (Some((cp, vp)), None) => {
                        p.next();
                        (cp, a * vp + b * 0.0)
                    }
                    (_, Some((cq, vq))) => {
                        q.next();
                        (cq, a * 0.0 + b * vq)
                    }
                };
                col_idx.push(c);
                values.push(v);
            }
            row_ptr[r + 1] = col_idx.len();
        }
        Self {
            dim: self.dim,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| s * v).collect(),
            ..self.clone()
        }
    }

    /// `P A P^T` where `perm[old] = new`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.dim);
        let t = self
            .triplets()
            .map(|(r, c, v)| (perm[r], perm[c], v))
            .collect();
        Self::from_triplets(self.dim, t)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }

    /// Exact (bitwise) symmetry of values.
    pub fn is_symmetric(&self) -> bool {
        self.triplets().all(|(r, c, v)| self.get(c, r) == v)
    }

    /// Largest entrywise difference over the union of both patterns.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.linear_combination(1.0, other, -1.0)
            .values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            d[(r, c)] += v;
        }
        d
    }
}
