use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rvehom_core::solver::{pcg_solve_observed, project_mean_zero};
use rvehom_core::*;

fn random_mean_zero(m: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..m).map(|_| rng.random::<f64>() - 0.5).collect();
    project_mean_zero(&mut v);
    v
}

/// Dense `B = (1+lambda)/2 A_lap + delta I`.
fn dense_b(n: usize, lambda: f64, delta: f64) -> DMatrix<f64> {
    let lap = assemble_laplacian(n).unwrap().to_dense();
    lap * (0.5 * (1.0 + lambda)) + DMatrix::identity(n * n, n * n) * delta
}

/// Solves a singular SPD system on the mean-zero subspace via `(S + 11^T/M)`.
fn mean_zero_solve(s: &DMatrix<f64>, r: &[f64]) -> Vec<f64> {
    let m = s.nrows();
    let shifted = s + DMatrix::from_element(m, m, 1.0 / m as f64);
    let chol = Cholesky::new(shifted).expect("shifted matrix is SPD");
    chol.solve(&DVector::from_column_slice(r)).as_slice().to_vec()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[test]
fn preconditioner_residual_against_assembled_b() {
    let (n, lambda) = (32, 0.3);
    let p = build_preconditioner(n, lambda, 0.0).unwrap();
    let lap = assemble_laplacian(n).unwrap();
    let r = random_mean_zero(n * n, 4);
    let z = apply_preconditioner(&p, &r);
    let bz: Vec<f64> = lap.apply(&z).iter().map(|v| 0.5 * (1.0 + lambda) * v).collect();
    let res: Vec<f64> = bz.iter().zip(&r).map(|(a, b)| a - b).collect();
    assert!(norm(&res) / norm(&r) <= 1e-12);
    assert!(z.iter().sum::<f64>().abs() <= 1e-12);
}

#[test]
fn preconditioner_matches_dense_factorization() {
    let n = 8;
    for (lambda, delta) in [(0.25, 0.0), (0.7, 0.0), (0.4, 0.3)] {
        let p = build_preconditioner(n, lambda, delta).unwrap();
        let b = dense_b(n, lambda, delta);
        let r = random_mean_zero(n * n, 11);
        let want = if delta > 0.0 {
            Cholesky::new(b).unwrap().solve(&DVector::from_column_slice(&r)).as_slice().to_vec()
        } else {
            mean_zero_solve(&b, &r)
        };
        assert!(max_diff(&apply_preconditioner(&p, &r), &want) <= 1e-12);
    }
    let p = build_preconditioner(n, 0.5, 0.0).unwrap();
    assert!(apply_preconditioner(&p, &vec![0.0; n * n]).iter().all(|&v| v == 0.0));
    assert!(build_preconditioner(1, 0.5, 0.0).is_err());
    assert!(build_preconditioner(8, 0.0, 0.0).is_err());
    assert!(build_preconditioner(8, 0.5, -1.0).is_err());
}

#[test]
fn pcg_matches_dense_pseudo_inverse() {
    let params = EnsembleParams::new(4, 4, 0.25, 0.3, 1e-10).unwrap();
    for seed in 0..3 {
        let f = sample_field(&params, seed, 1).unwrap();
        let a = assemble_total(&f, 0.3).unwrap();
        let p = build_preconditioner(16, 0.3, 0.0).unwrap();
        let rhs = assemble_rhs(&f, 0.3, Direction::X1).unwrap();
        let tol = 1e-10;
        let (u, rep) = pcg_solve(&a, &p, &rhs, tol, 200).unwrap();
        assert!(rep.converged);
        assert!(rep.final_relative_residual <= tol);
        let dense = mean_zero_solve(&a.to_dense(), &rhs);
        let diff: Vec<f64> = u.iter().zip(&dense).map(|(x, y)| x - y).collect();
        assert!(norm(&diff) / norm(&dense) <= 10.0 * tol);
    }
}

#[test]
fn iterates_stay_mean_zero_and_residual_history_is_recorded() {
    let params = EnsembleParams::new(8, 4, 0.25, 0.2, 1e-8).unwrap();
    let f = sample_field(&params, 3, 1).unwrap();
    let a = assemble_total(&f, 0.2).unwrap();
    let p = build_preconditioner(32, 0.2, 0.0).unwrap();
    let rhs = assemble_rhs(&f, 0.2, Direction::X2).unwrap();
    let mut worst: f64 = 0.0;
    let (_, rep) = pcg_solve_observed(&a, &p, &rhs, 1e-10, 200, &mut |_, x| {
        worst = worst.max(x.iter().sum::<f64>().abs() / x.len() as f64);
    })
    .unwrap();
    assert!(worst <= 1e-12, "{worst}");
    assert_eq!(rep.residual_history.len(), rep.iterations);
    assert_eq!(*rep.residual_history.last().unwrap(), rep.final_relative_residual);
}

#[test]
fn solve_is_deterministic() {
    let params = EnsembleParams::new(4, 8, 0.25, 0.4, 1e-8).unwrap();
    let f = sample_field(&params, 21, 4).unwrap();
    let a = assemble_total(&f, 0.4).unwrap();
    let p = build_preconditioner(32, 0.4, 0.0).unwrap();
    let rhs = assemble_rhs(&f, 0.4, Direction::X1).unwrap();
    let one = pcg_solve(&a, &p, &rhs, 1e-8, 200).unwrap();
    let two = pcg_solve(&a, &p, &rhs, 1e-8, 200).unwrap();
    assert_eq!(one, two);
}

/// Extreme eigenvalues of `B^{-1} A` on the mean-zero subspace via an explicit basis.
fn generalized_oracle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> (f64, f64) {
    let m = a.nrows();
    // orthonormal basis of 1-perp: eigenvectors of the centering projector with eigenvalue 1
    let centering = DMatrix::identity(m, m) - DMatrix::from_element(m, m, 1.0 / m as f64);
    let eig = SymmetricEigen::new(centering);
    let cols: Vec<_> = (0..m)
        .filter(|&k| eig.eigenvalues[k] > 0.5)
        .map(|k| eig.eigenvectors.column(k).into_owned())
        .collect();
    let q = DMatrix::from_columns(&cols);
    let aq = q.transpose() * a * &q;
    let bq = q.transpose() * b * &q;
    let l = Cholesky::new(bq).unwrap().l();
    let linv = l.clone().try_inverse().unwrap();
    let c = &linv * aq * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let ev = SymmetricEigen::new(c).eigenvalues;
    (ev.min(), ev.max())
}

#[test]
fn generalized_eigs_match_dense_oracle() {
    let params = EnsembleParams::new(2, 4, 0.25, 0.35, 1e-8).unwrap();
    for seed in 0..3 {
        let f = sample_field(&params, seed, 1).unwrap();
        let a = assemble_total(&f, 0.35).unwrap();
        let p = build_preconditioner(8, 0.35, 0.0).unwrap();
        let got = extreme_generalized_eigs(&a, &p).unwrap();
        let (lo, hi) = generalized_oracle(&a.to_dense(), &dense_b(8, 0.35, 0.0));
        assert!((got.mu_min - lo).abs() <= 1e-10, "{} {lo}", got.mu_min);
        assert!((got.mu_max - hi).abs() <= 1e-10, "{} {hi}", got.mu_max);
    }
}

#[test]
fn unit_contrast_gives_unit_spectrum() {
    let params = EnsembleParams::new(4, 4, 0.25, 1.0, 1e-8).unwrap();
    let f = sample_field(&params, 2, 1).unwrap();
    let a = assemble_total(&f, 1.0).unwrap();
    let p = build_preconditioner(16, 1.0, 0.0).unwrap();
    let b = extreme_generalized_eigs(&a, &p).unwrap();
    assert!((b.mu_min - 1.0).abs() < 1e-12 && (b.mu_max - 1.0).abs() < 1e-12);
}

#[test]
fn conditioning_is_bounded_by_c_over_lambda() {
    // C = 4 fixed once; the measured constant is 1
    let params = EnsembleParams::new(4, 8, 0.25, 0.4, 1e-8).unwrap();
    for seed in 0..3 {
        let f = sample_field(&params, seed, 1).unwrap();
        let a = assemble_total(&f, 0.4).unwrap();
        let p = build_preconditioner(32, 0.4, 0.0).unwrap();
        let b = extreme_generalized_eigs(&a, &p).unwrap();
        assert!(b.condition() <= 4.0 / 0.4, "cond {}", b.condition());
    }
}
