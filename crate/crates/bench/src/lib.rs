//! Shared fixtures for the benchmarks.

use rvehom_core::{
    assemble_rhs, assemble_total, build_preconditioner, sample_field, CoefficientField, Direction, EnsembleParams,
    Preconditioner, SparseOperator,
};

/// A sampled field with its operator, preconditioner and first corrector RHS.
pub struct Fixture {
    pub field: CoefficientField,
    pub lambda: f64,
    pub a: SparseOperator,
    pub p: Preconditioner,
    pub rhs: Vec<f64>,
}

impl Fixture {
    /// `m0 = 4`, `alpha = 1/4`, `lambda = 0.4`, realization 1 of seed 0.
    pub fn new(l: usize) -> Self {
        let lambda = 0.4;
        let params = EnsembleParams::new(l, 4, 0.25, lambda, 1e-8).expect("valid benchmark parameters");
        let field = sample_field(&params, 0, 1).expect("sampling succeeds");
        let a = assemble_total(&field, lambda).expect("assembly succeeds");
        let p = build_preconditioner(field.n(), lambda, 0.0).expect("valid preconditioner");
        let rhs = assemble_rhs(&field, lambda, Direction::X1).expect("rhs assembly succeeds");
        Self {
            field,
            lambda,
            a,
            p,
            rhs,
        }
    }

    pub fn params(&self) -> &EnsembleParams {
        self.field.params()
    }
}

/// RVE sizes used by the benchmarks.
pub const SIZES: [usize; 3] = [8, 16, 32];
