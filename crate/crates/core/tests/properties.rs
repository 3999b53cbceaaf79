use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rvehom_core::ensemble::Moments;
use rvehom_core::solver::pcg_solve_observed;
use rvehom_core::*;

fn small_params() -> impl Strategy<Value = EnsembleParams> {
    (
        prop::sample::select(vec![1usize, 2, 4]),
        prop::sample::select(vec![4usize, 8]),
        prop::sample::select(vec![0.25f64, 0.5]),
        0.05f64..=1.0,
    )
        .prop_map(|(l, m0, alpha, lambda)| EnsembleParams::new(l, m0, alpha, lambda, 1e-8).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sampling_is_deterministic(p in small_params(), seed in any::<u64>(), index in 1u64..1000) {
        prop_assert_eq!(sample_field(&p, seed, index).unwrap(), sample_field(&p, seed, index).unwrap());
    }

    #[test]
    fn larger_inclusions_cover_more(seed in any::<u64>()) {
        let small = EnsembleParams::new(4, 8, 0.25, 0.4, 1e-8).unwrap();
        let big = EnsembleParams::new(4, 8, 0.5, 0.4, 1e-8).unwrap();
        let f = sample_field(&small, seed, 1).unwrap();
        let g = CoefficientField::from_centers(big, f.centers().to_vec(), seed, 1).unwrap();
        prop_assert!(f.cells().iter().zip(g.cells()).all(|(&a, &b)| !a || b));
    }

    #[test]
    fn vertex_values_average_incident_cells(p in small_params(), seed in any::<u64>()) {
        let f = sample_field(&p, seed, 1).unwrap();
        let n = f.n();
        let vv = f.vertex_value();
        let coef = coefficient_on_grid(&f);
        for i in 0..n {
            for j in 0..n {
                let c = |a: usize, b: usize| f.is_covered(a % n, b % n) as u8 as f64;
                let want = 0.25 * (c(i, j) + c(i + n - 1, j) + c(i, j + n - 1) + c(i + n - 1, j + n - 1));
                prop_assert_eq!(vv[i * n + j], want);
                let expect = p.lambda + (1.0 - p.lambda) * want;
                prop_assert!((coef[i * n + j] - expect).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn systems_are_compatible(p in small_params(), seed in any::<u64>()) {
        let f = sample_field(&p, seed, 1).unwrap();
        let a = assemble_total(&f, p.lambda).unwrap();
        prop_assert!(a.is_symmetric());
        let m = a.dim();
        prop_assert!(a.apply(&vec![1.0; m]).iter().all(|v| v.abs() <= 1e-12));
        for dir in Direction::BOTH {
            let rhs = assemble_rhs(&f, p.lambda, dir).unwrap();
            let norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(rhs.iter().sum::<f64>().abs() <= 1e-12 * norm.max(1.0));
        }
    }

    #[test]
    fn homogenized_matrix_is_bounded(p in small_params(), seed in any::<u64>()) {
        let f = sample_field(&p, seed, 1).unwrap();
        let (a, c) = homogenize(&f, p.lambda, &SolveOptions::default()).unwrap();
        prop_assert!(c.converged());
        let [lo, hi] = a.sym_eigenvalues();
        prop_assert!(p.lambda - 1e-9 <= lo && hi <= 1.0 + 1e-9);
        prop_assert!(a.asymmetry() <= 1e-7);
    }

    #[test]
    fn translation_leaves_matrix_unchanged(seed in any::<u64>(), d1 in -20isize..20, d2 in -20isize..20) {
        let p = EnsembleParams::new(2, 8, 0.25, 0.3, 1e-8).unwrap();
        let f = sample_field(&p, seed, 1).unwrap();
        let opts = SolveOptions::default();
        let a = homogenize(&f, 0.3, &opts).unwrap().0.flat();
        let b = homogenize(&transform_field(&f, SymmetryOp::Translate(d1, d2)), 0.3, &opts).unwrap().0.flat();
        for k in 0..4 {
            prop_assert!((a[k] - b[k]).abs() <= 1e-7);
        }
    }

    #[test]
    fn merge_equals_single_pass(data in prop::collection::vec(prop::array::uniform4(-1.0f64..1.0), 4..40), cut in 2usize..38) {
        let cut = cut.min(data.len() - 2);
        let all = Moments::from_samples(data.iter().copied());
        let left = Moments::from_samples(data[..cut].iter().copied());
        let right = Moments::from_samples(data[cut..].iter().copied());
        let merged = left.merge(&right);
        for k in 0..4 {
            prop_assert!((merged.mean[k] - all.mean[k]).abs() <= 1e-12);
            for l in 0..4 {
                prop_assert!((merged.comoment[k][l] - all.comoment[k][l]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn dos_is_normalized(eigs in prop::collection::vec(0.0f64..50.0, 1..40), eta in 0.05f64..2.0) {
        let c = rvehom_core::spectral::dos_default(&eigs, Some(eta)).unwrap();
        prop_assert!((c.integral() - 1.0).abs() <= 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// CG minimizes the energy norm of the error over growing Krylov spaces.
    #[test]
    fn energy_error_decreases_monotonically(seed in any::<u64>(), lambda in 0.05f64..1.0) {
        let p = EnsembleParams::new(2, 4, 0.25, lambda, 1e-8).unwrap();
        let f = sample_field(&p, seed, 1).unwrap();
        let a = assemble_total(&f, lambda).unwrap();
        let pre = build_preconditioner(8, lambda, 0.0).unwrap();
        let rhs = assemble_rhs(&f, lambda, Direction::X1).unwrap();
        let dense = a.to_dense();
        let m = dense.nrows();
        let shifted = &dense + DMatrix::from_element(m, m, 1.0 / m as f64);
        let exact = shifted.lu().solve(&DVector::from_column_slice(&rhs)).unwrap();
        let mut errors = Vec::new();
        pcg_solve_observed(&a, &pre, &rhs, 1e-12, 200, &mut |_, x| {
            let e = DVector::from_column_slice(x) - &exact;
            errors.push(e.dot(&(&dense * &e)).sqrt());
        })
        .unwrap();
        let scale = errors.first().copied().unwrap_or(0.0).max(1e-300);
        for w in errors.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-10 * scale);
        }
    }

    #[test]
    fn iterates_preserve_zero_mean(seed in any::<u64>(), lambda in 0.05f64..1.0) {
        let p = EnsembleParams::new(4, 4, 0.25, lambda, 1e-8).unwrap();
        let f = sample_field(&p, seed, 1).unwrap();
        let a = assemble_total(&f, lambda).unwrap();
        let pre = build_preconditioner(16, lambda, 0.0).unwrap();
        let rhs = assemble_rhs(&f, lambda, Direction::X2).unwrap();
        let mut worst: f64 = 0.0;
        pcg_solve_observed(&a, &pre, &rhs, 1e-10, 200, &mut |_, x| {
            worst = worst.max(x.iter().sum::<f64>().abs());
        })
        .unwrap();
        prop_assert!(worst <= 1e-10);
    }
}
