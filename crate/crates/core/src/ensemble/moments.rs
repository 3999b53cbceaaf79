//! Streaming first and second moments of the flattened homogenized matrix.

use serde::{Deserialize, Serialize};

/// Running mean and co-moment matrix of `x = (a11, a12, a21, a22)`.
///
/// Updates use Welford's recurrence and partial results combine with Chan's
/// pairwise formula, so splitting a sample and merging agrees with a single
/// pass up to rounding.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Moments {
    pub count: u64,
    pub mean: [f64; 4],
    /// `sum_n (x_n - mean)(x_n - mean)^T`.
    pub comoment: [[f64; 4]; 4],
}

fn outer_add(m: &mut [[f64; 4]; 4], d: &[f64; 4], scale: f64) {
    for a in 0..4 {
        for b in 0..4 {
            m[a][b] += scale * d[a] * d[b];
        }
    }
}

fn sub(x: &[f64; 4], y: &[f64; 4]) -> [f64; 4] {
    [x[0] - y[0], x[1] - y[1], x[2] - y[2], x[3] - y[3]]
}

/// Maps `(a11, a12, a21, a22)` to `(a11, s, s, a22)` with `s = (a12 + a21) / 2`.
const SYMMETRIZE: [[f64; 4]; 4] = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 0.5, 0.5, 0.0],
    [0.0, 0.5, 0.5, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

impl Moments {
    pub fn from_samples<I: IntoIterator<Item = [f64; 4]>>(xs: I) -> Self {
        let mut m = Self::default();
        for x in xs {
            m.push(x);
        }
        m
    }

    pub fn push(&mut self, x: [f64; 4]) {
        self.count += 1;
        let k = self.count as f64;
        let d = sub(&x, &self.mean);
        for a in 0..4 {
            self.mean[a] += d[a] / k;
        }
        outer_add(&mut self.comoment, &d, (k - 1.0) / k);
    }

    pub fn merge(&self, other: &Self) -> Self {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let d = sub(&other.mean, &self.mean);
        let mut out = Self {
            count: self.count + other.count,
            mean: [0.0; 4],
            comoment: [[0.0; 4]; 4],
        };
        for a in 0..4 {
            out.mean[a] = self.mean[a] + d[a] * nb / n;
            for b in 0..4 {
                out.comoment[a][b] = self.comoment[a][b] + other.comoment[a][b];
            }
        }
        outer_add(&mut out.comoment, &d, na * nb / n);
        out
    }

    /// Moments of the sample with `x` (a member of it) removed.
    pub fn without(&self, x: [f64; 4]) -> Self {
        assert!(self.count >= 2, "cannot remove from fewer than two samples");
        let n = self.count as f64;
        let d = sub(&x, &self.mean);
        let mut out = *self;
        out.count -= 1;
        for a in 0..4 {
            out.mean[a] = (n * self.mean[a] - x[a]) / (n - 1.0);
        }
        outer_add(&mut out.comoment, &d, -n / (n - 1.0));
        out
    }

    /// Unbiased covariance, `(N - 1)` normalization.
    pub fn covariance(&self) -> [[f64; 4]; 4] {
        let denom = (self.count as f64 - 1.0).max(1.0);
        self.comoment.map(|row| row.map(|v| v / denom))
    }

    /// `(1/N) sum_n (w . x_n)^2`.
    pub fn raw_second_moment(&self, w: [f64; 4]) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        let n = self.count as f64;
        let mut q = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                q += w[a] * self.comoment[a][b] * w[b];
            }
        }
        let m: f64 = (0..4).map(|a| w[a] * self.mean[a]).sum();
        (q / n + m * m).max(0.0)
    }

    /// Covariance of the symmetrized vector `(a11, s, s, a22)`; exactly symmetric.
    pub fn symmetrized_covariance(&self) -> [[f64; 4]; 4] {
        let c = self.covariance();
        let p = SYMMETRIZE;
        let mut out = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in i..4 {
                let mut acc = 0.0;
                for k in 0..4 {
                    for l in 0..4 {
                        acc += p[i][k] * c[k][l] * p[j][l];
                    }
                }
                out[i][j] = acc;
                out[j][i] = acc;
            }
        }
        out
    }
}
