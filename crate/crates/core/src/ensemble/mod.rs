//! Monte-Carlo ensembles of homogenized matrices and their statistics.

mod fit;
mod moments;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::sample_field;
use crate::homogenize::{homogenize, HomogenizedMatrix, SolveOptions};
use crate::params::EnsembleParams;

pub use fit::{least_squares, scaling_fit, ScalingFit};
pub use moments::Moments;

/// Execution settings for an ensemble run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub solve: SolveOptions,
    /// Index of the first realization (indices are `first_index..first_index + N`).
    pub first_index: u64,
    /// Evaluate realizations on the calling thread only.
    pub serial: bool,
}

impl RunOptions {
    pub fn for_params(params: &EnsembleParams) -> Self {
        Self {
            solve: SolveOptions::with_tol(params.tol),
            first_index: 1,
            serial: false,
        }
    }
}

/// Homogenized matrix of realization `index`.
pub fn realization(
    params: &EnsembleParams,
    master_seed: u64,
    index: u64,
    solve: &SolveOptions,
) -> Result<HomogenizedMatrix> {
    let field = sample_field(params, master_seed, index)?;
    Ok(homogenize(&field, params.lambda, solve)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    #[serde(rename = "N")]
    pub n: usize,
    pub mean: [[f64; 2]; 2],
    /// `sqrt((1/N) sum a12^2)`.
    pub std_a12: f64,
    /// `sqrt((1/N) sum (a11 - a22)^2)`.
    pub std_diag_diff: f64,
    /// `L^2`-scaled covariance in Kronecker layout: `quartic[2a+c][2b+d] = Q_{abcd}`.
    pub quartic: [[f64; 4]; 4],
    pub master_seed: u64,
    pub params: EnsembleParams,
    pub moments: Moments,
    /// Realizations whose corrector solves hit the iteration cap.
    pub non_converged: usize,
}

const A12: [f64; 4] = [0.0, 1.0, 0.0, 0.0];
const DIAG_DIFF: [f64; 4] = [1.0, 0.0, 0.0, -1.0];

/// `Q(e_a, e_b, e_c, e_d)` from moments, using the symmetrized matrix.
fn quartic_entry(m: &Moments, l: usize, [a, b, c, d]: [usize; 4]) -> f64 {
    let cs = m.symmetrized_covariance();
    (l * l) as f64 * cs[2 * a + b][2 * c + d]
}

fn std_a12_of(m: &Moments) -> f64 {
    m.raw_second_moment(A12).sqrt()
}

fn std_diag_diff_of(m: &Moments) -> f64 {
    m.raw_second_moment(DIAG_DIFF).sqrt()
}

impl EnsembleStats {
    pub fn from_moments(
        params: EnsembleParams,
        master_seed: u64,
        moments: Moments,
        non_converged: usize,
    ) -> Self {
        let mu = moments.mean;
        let mut quartic = [[0.0; 4]; 4];
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    for d in 0..2 {
                        quartic[2 * a + c][2 * b + d] = quartic_entry(&moments, params.l, [a, b, c, d]);
                    }
                }
            }
        }
        Self {
            n: moments.count as usize,
            mean: [[mu[0], mu[1]], [mu[2], mu[3]]],
            std_a12: std_a12_of(&moments),
            std_diag_diff: std_diag_diff_of(&moments),
            quartic,
            master_seed,
            params,
            moments,
            non_converged,
        }
    }

    /// Combined statistics of two disjoint samples of the same configuration.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.params != other.params {
            return Err(Error::Input("cannot merge ensembles with different parameters".into()));
        }
        Ok(Self::from_moments(
            self.params,
            self.master_seed,
            self.moments.merge(&other.moments),
            self.non_converged + other.non_converged,
        ))
    }

    /// `Q(e_a, e_b, e_c, e_d)`, zero-based indices.
    pub fn q(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.quartic[2 * a + c][2 * b + d]
    }
}

/// Realizations together with their statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub samples: Vec<HomogenizedMatrix>,
    pub stats: EnsembleStats,
}

impl Ensemble {
    pub fn from_samples(
        params: EnsembleParams,
        master_seed: u64,
        samples: Vec<HomogenizedMatrix>,
    ) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::param(format!(
                "an ensemble needs at least 2 realizations, got {}",
                samples.len()
            )));
        }
        let moments = Moments::from_samples(samples.iter().map(|s| s.flat()));
        let non_converged = samples.iter().filter(|s| !s.converged).count();
        let stats = EnsembleStats::from_moments(params, master_seed, moments, non_converged);
        Ok(Self { samples, stats })
    }

    /// Delete-one jackknife standard error of a moment-based statistic.
    pub fn jackknife_se(&self, stat: impl Fn(&Moments) -> f64) -> f64 {
        let m = &self.stats.moments;
        let loo: Vec<f64> = self.samples.iter().map(|s| stat(&m.without(s.flat()))).collect();
        let n = loo.len() as f64;
        let mean = loo.iter().sum::<f64>() / n;
        ((n - 1.0) / n * loo.iter().map(|v| (v - mean).powi(2)).sum::<f64>()).sqrt()
    }

    /// Standard error of the mean of entry `k` of `(a11, a12, a21, a22)`.
    pub fn mean_se(&self, k: usize) -> f64 {
        let c = self.stats.moments.covariance();
        (c[k][k] / self.stats.n as f64).sqrt()
    }

    pub fn std_a12_se(&self) -> f64 {
        self.jackknife_se(std_a12_of)
    }

    pub fn std_diag_diff_se(&self) -> f64 {
        self.jackknife_se(std_diag_diff_of)
    }

    /// Jackknife standard error of `Q(e_a, e_b, e_c, e_d)`.
    pub fn quartic_se(&self, idx: [usize; 4]) -> f64 {
        let l = self.stats.params.l;
        self.jackknife_se(|m| quartic_entry(m, l, idx))
    }
}

/// Runs `n` realizations with indices `1..=n` using the default solver settings.
pub fn run_ensemble(params: &EnsembleParams, n: usize, master_seed: u64) -> Result<Ensemble> {
    run_ensemble_with(params, n, master_seed, &RunOptions::for_params(params))
}

/// Realizations are evaluated in parallel (unless `serial`) and reduced in index
/// order, so the result does not depend on the number of worker threads.
pub fn run_ensemble_with(
    params: &EnsembleParams,
    n: usize,
    master_seed: u64,
    opts: &RunOptions,
) -> Result<Ensemble> {
    params.validate()?;
    if n < 2 {
        return Err(Error::param(format!("N must be >= 2, got {n}")));
    }
    let indices = opts.first_index..opts.first_index + n as u64;
    let run = |i| realization(params, master_seed, i, &opts.solve);
    let samples: Vec<HomogenizedMatrix> = if opts.serial {
        indices.map(run).collect::<Result<_>>()?
    } else {
        indices.into_par_iter().map(run).collect::<Result<_>>()?
    };
    Ensemble::from_samples(*params, master_seed, samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatKind {
    SystematicError,
    StdDev,
    QuarticDiff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub values: Vec<f64>,
    pub std_errs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub kind: StatKind,
    pub columns: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Input(format!("no column {name:?} in sweep table")))
    }

    /// `(L, value)` pairs of a column.
    pub fn column(&self, name: &str) -> Result<Vec<(f64, f64)>> {
        let k = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| (r.l as f64, r.values[k])).collect())
    }

    pub fn std_errs(&self, name: &str) -> Result<Vec<f64>> {
        let k = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r.std_errs[k]).collect())
    }

    /// Log-log fit of a column against `L`.
    pub fn fit(&self, name: &str) -> Result<ScalingFit> {
        scaling_fit(&self.column(name)?)
    }
}

/// Ensembles keyed by `L`.
pub type EnsembleSet = BTreeMap<usize, Ensemble>;

/// Checks that `l_list` is a strictly increasing list of powers of two.
pub fn validate_l_list(l_list: &[usize]) -> Result<()> {
    if l_list.is_empty() {
        return Err(Error::param("empty L list"));
    }
    for w in l_list.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::param("L list must be strictly increasing"));
        }
    }
    if let Some(l) = l_list.iter().find(|l| !l.is_power_of_two()) {
        return Err(Error::param(format!("L = {l} is not a power of two")));
    }
    Ok(())
}

/// One ensemble per listed `L`, with `N = n_of(L)`; stream ids carry `L`.
pub fn run_ensembles(
    base: &EnsembleParams,
    l_list: &[usize],
    n_of: impl Fn(usize) -> usize,
    master_seed: u64,
    opts: &RunOptions,
) -> Result<EnsembleSet> {
    let mut out = EnsembleSet::new();
    for &l in l_list {
        let params = base.with_l(l)?;
        let solve = SolveOptions {
            tol: params.tol,
            ..opts.solve
        };
        let ens = run_ensemble_with(&params, n_of(l), master_seed, &RunOptions { solve, ..*opts })?;
        log::info!(
            "L={l}: N={} mean a11={:.6} std a12={:.3e}",
            ens.stats.n,
            ens.stats.mean[0][0],
            ens.stats.std_a12
        );
        out.insert(l, ens);
    }
    Ok(out)
}

fn with_doubles(l_list: &[usize]) -> Vec<usize> {
    let mut all: Vec<usize> = l_list.iter().flat_map(|&l| [l, 2 * l]).collect();
    all.sort_unstable();
    all.dedup();
    all
}

fn pair(set: &EnsembleSet, l: usize) -> Result<(&Ensemble, &Ensemble)> {
    match (set.get(&l), set.get(&(2 * l))) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(Error::Input(format!("ensembles for L={l} and L={} are required", 2 * l))),
    }
}

/// `<a11>_L - <a11>_2L` for each `L` of the list.
pub fn systematic_error_table(set: &EnsembleSet, l_list: &[usize]) -> Result<SweepTable> {
    let mut rows = Vec::new();
    for &l in l_list {
        let (a, b) = pair(set, l)?;
        let (ma, mb) = (a.stats.mean[0][0], b.stats.mean[0][0]);
        let (sa, sb) = (a.mean_se(0), b.mean_se(0));
        rows.push(SweepRow {
            l,
            n: a.stats.n,
            values: vec![ma, mb, ma - mb],
            std_errs: vec![sa, sb, sa.hypot(sb)],
        });
    }
    Ok(SweepTable {
        kind: StatKind::SystematicError,
        columns: vec!["mean_a11_L".into(), "mean_a11_2L".into(), "diff".into()],
        rows,
    })
}

/// Standard deviations of `a12` and `a11 - a22` per `L`.
pub fn std_dev_table(set: &EnsembleSet, l_list: &[usize]) -> Result<SweepTable> {
    let mut rows = Vec::new();
    for &l in l_list {
        let e = set
            .get(&l)
            .ok_or_else(|| Error::Input(format!("no ensemble for L={l}")))?;
        rows.push(SweepRow {
            l,
            n: e.stats.n,
            values: vec![e.stats.std_a12, e.stats.std_diag_diff],
            std_errs: vec![e.std_a12_se(), e.std_diag_diff_se()],
        });
    }
    Ok(SweepTable {
        kind: StatKind::StdDev,
        columns: vec!["std_a12".into(), "std_diag_diff".into()],
        rows,
    })
}

/// `q11` and `q14` per `L` and their differences to `2L`.
pub fn quartic_diff_table(set: &EnsembleSet, l_list: &[usize]) -> Result<SweepTable> {
    const Q11: [usize; 4] = [0, 0, 0, 0];
    const Q14: [usize; 4] = [0, 1, 0, 1];
    let mut rows = Vec::new();
    for &l in l_list {
        let (a, b) = pair(set, l)?;
        let (a11, b11) = (a.stats.quartic[0][0], b.stats.quartic[0][0]);
        let (a14, b14) = (a.stats.quartic[0][3], b.stats.quartic[0][3]);
        let (sa11, sb11) = (a.quartic_se(Q11), b.quartic_se(Q11));
        let (sa14, sb14) = (a.quartic_se(Q14), b.quartic_se(Q14));
        rows.push(SweepRow {
            l,
            n: a.stats.n,
            values: vec![a11, a14, a11 - b11, a14 - b14],
            std_errs: vec![sa11, sa14, sa11.hypot(sb11), sa14.hypot(sb14)],
        });
    }
    Ok(SweepTable {
        kind: StatKind::QuarticDiff,
        columns: vec!["q11".into(), "q14".into(), "q11_diff".into(), "q14_diff".into()],
        rows,
    })
}

/// Runs ensembles at every `L` and `2L` and tabulates the systematic error.
pub fn systematic_error_sweep(
    base: &EnsembleParams,
    l_list: &[usize],
    n: usize,
    master_seed: u64,
    opts: &RunOptions,
) -> Result<SweepTable> {
    validate_l_list(l_list)?;
    let set = run_ensembles(base, &with_doubles(l_list), |_| n, master_seed, opts)?;
    systematic_error_table(&set, l_list)
}

pub fn std_dev_sweep(
    base: &EnsembleParams,
    l_list: &[usize],
    n: usize,
    master_seed: u64,
    opts: &RunOptions,
) -> Result<SweepTable> {
    validate_l_list(l_list)?;
    let set = run_ensembles(base, l_list, |_| n, master_seed, opts)?;
    std_dev_table(&set, l_list)
}

/// Quartic differences with `N = n` per `L`, or `N = L^2` (at least 2) when `n` is `None`.
pub fn quartic_diff_sweep(
    base: &EnsembleParams,
    l_list: &[usize],
    n: Option<usize>,
    master_seed: u64,
    opts: &RunOptions,
) -> Result<SweepTable> {
    validate_l_list(l_list)?;
    let n_of = |l: usize| n.unwrap_or((l * l).max(2));
    let set = run_ensembles(base, &with_doubles(l_list), n_of, master_seed, opts)?;
    quartic_diff_table(&set, l_list)
}

/// An entry expected to vanish, with its jackknife standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroEntry {
    /// One-based index tuple, e.g. `"1112"`.
    pub label: String,
    pub value: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarticDiagnostics {
    pub q1111: f64,
    pub q1122: f64,
    pub q1212: f64,
    /// Largest spread among the four `Q(e_i, e_j, e_k, e_l)` with mixed off-diagonal pairs.
    pub mixed_spread: f64,
    /// `|Q1122 - Q2211|`.
    pub transpose_defect: f64,
    pub zero_entries: Vec<ZeroEntry>,
    /// `Q1111 - Q2222`.
    pub diag_diff: f64,
    pub diag_diff_se: f64,
}

impl QuarticDiagnostics {
    /// Whether every vanishing entry and `Q1111 - Q2222` lie within `k` standard errors.
    pub fn consistent_within(&self, k: f64) -> bool {
        self.zero_entries.iter().all(|z| z.value.abs() <= k * z.std_err)
            && self.diag_diff.abs() <= k * self.diag_diff_se
    }
}

/// Index tuples with an odd number of 2s; reflection symmetry forces their entries to vanish.
const ODD_INDICES: [[usize; 4]; 8] = [
    [0, 0, 0, 1],
    [0, 0, 1, 0],
    [0, 1, 0, 0],
    [1, 0, 0, 0],
    [0, 1, 1, 1],
    [1, 0, 1, 1],
    [1, 1, 0, 1],
    [1, 1, 1, 0],
];

pub fn quartic_diagnostics(ens: &Ensemble) -> QuarticDiagnostics {
    let s = &ens.stats;
    let l = s.params.l;
    let mixed = [s.q(0, 1, 0, 1), s.q(0, 1, 1, 0), s.q(1, 0, 0, 1), s.q(1, 0, 1, 0)];
    let hi = mixed.iter().copied().fold(f64::MIN, f64::max);
    let lo = mixed.iter().copied().fold(f64::MAX, f64::min);
    let zero_entries = ODD_INDICES
        .iter()
        .map(|&idx| ZeroEntry {
            label: idx.iter().map(|i| char::from(b'1' + *i as u8)).collect(),
            value: s.q(idx[0], idx[1], idx[2], idx[3]),
            std_err: ens.quartic_se(idx),
        })
        .collect();
    let diff = |m: &Moments| quartic_entry(m, l, [0, 0, 0, 0]) - quartic_entry(m, l, [1, 1, 1, 1]);
    QuarticDiagnostics {
        q1111: s.q(0, 0, 0, 0),
        q1122: s.q(0, 0, 1, 1),
        q1212: s.q(0, 1, 0, 1),
        mixed_spread: hi - lo,
        transpose_defect: (s.q(0, 0, 1, 1) - s.q(1, 1, 0, 0)).abs(),
        zero_entries,
        diag_diff: diff(&s.moments),
        diag_diff_se: ens.jackknife_se(diff),
    }
}
