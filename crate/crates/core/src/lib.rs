//! Periodic RVE homogenization for random two-phase media made of overlapping
//! square inclusions.
//!
//! The pipeline: [`sample_field`] draws a realization, [`assemble_total`] builds the
//! periodic stiffness matrix from Kronecker products of 1D factors, [`pcg_solve`]
//! solves the corrector problems with an FFT-diagonalized preconditioner, and
//! [`homogenized_matrix`] integrates the fluxes. [`run_ensemble`] repeats this over
//! independent realizations and collects the statistics.

pub mod assembly;
pub mod ensemble;
pub mod error;
pub mod field;
pub mod homogenize;
pub mod io;
pub mod params;
pub mod rng;
pub mod solver;
pub mod sparse;
pub mod spectral;

pub use assembly::{
    assemble_laplacian, assemble_rhs, assemble_stochastic, assemble_total, reference_assemble,
    Direction,
};
pub use ensemble::{
    quartic_diagnostics, run_ensemble, run_ensemble_with, scaling_fit, systematic_error_sweep,
    Ensemble, EnsembleStats, RunOptions, ScalingFit, SweepTable,
};
pub use error::{Error, Result};
pub use field::{coefficient_on_grid, sample_field, transform_field, CoefficientField, SymmetryOp};
pub use homogenize::{
    homogenize, homogenized_matrix, refinement_study, solve_correctors, CorrectorPair,
    HomogenizedMatrix, RefinementTable, SolveOptions,
};
pub use params::{EnsembleParams, DEFAULT_TOL};
pub use solver::{
    apply_preconditioner, build_preconditioner, extreme_generalized_eigs, pcg_solve,
    Preconditioner, SolveReport, SpectrumBounds,
};
pub use sparse::SparseOperator;
pub use spectral::{dense_eigenvalues, dos_curve, DosCurve};
