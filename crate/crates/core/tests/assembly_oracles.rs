use std::f64::consts::PI;

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rvehom_core::assembly::{reference_assemble, KroneckerSum};
use rvehom_core::*;

fn params(l: usize, m0: usize, alpha: f64, lambda: f64) -> EnsembleParams {
    EnsembleParams::new(l, m0, alpha, lambda, 1e-8).unwrap()
}

#[test]
fn laplacian_spectrum_matches_dft() {
    let n = 4;
    let a = assemble_laplacian(n).unwrap();
    let mut got: Vec<f64> = SymmetricEigen::new(a.to_dense()).eigenvalues.iter().copied().collect();
    got.sort_by(f64::total_cmp);
    let mut want = Vec::new();
    for j in 0..n {
        for k in 0..n {
            let s = |t: usize| 2.0 - 2.0 * (2.0 * PI * t as f64 / n as f64).cos();
            want.push(n as f64 * (s(j) + s(k)));
        }
    }
    want.sort_by(f64::total_cmp);
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-12, "{g} vs {w}");
    }
}

#[test]
fn laplacian_has_five_point_rows() {
    for n in [3, 4, 16] {
        let a = assemble_laplacian(n).unwrap();
        assert!((0..n * n).all(|r| a.row_nnz(r) == 5));
        assert!(a.apply(&vec![1.0; n * n]).iter().all(|&v| v == 0.0));
    }
    assert!(assemble_laplacian(1).is_err());
}

#[test]
fn kronecker_assembly_equals_element_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for k in 0..50 {
        let (l, m0) = match k % 3 {
            0 => (2, 4),
            1 => (4, 4),
            _ => (4, 8),
        };
        let lambda = rng.random_range(0.05..=1.0);
        let p = params(l, m0, 0.25, lambda);
        let f = sample_field(&p, rng.random(), 1).unwrap();
        let a = assemble_total(&f, lambda).unwrap();
        let r = reference_assemble(&f, lambda).unwrap();
        assert!(a.max_abs_diff(&r) <= 1e-12, "config {k}");
    }
}

#[test]
fn stochastic_part_equals_reference_increment() {
    // A_s is the derivative of the total operator in (1 - lambda)
    let f = sample_field(&params(4, 4, 0.25, 0.5), 5, 2).unwrap();
    let s = assemble_stochastic(&f);
    let r1 = reference_assemble(&f, 1.0).unwrap();
    let r0 = reference_assemble(&f, 0.5).unwrap();
    // r0 = 0.5 lap + 0.5 A_s  and  r1 = lap
    let derived = r0.linear_combination(2.0, &r1, -1.0);
    assert!(s.max_abs_diff(&derived) <= 1e-12);
}

#[test]
fn reference_limits() {
    let p = params(2, 8, 0.5, 0.5);
    let lap = assemble_laplacian(16).unwrap();
    let full = CoefficientField::uniform(p, true).unwrap();
    assert!(reference_assemble(&full, 0.5).unwrap().max_abs_diff(&lap) < 1e-12);
    let empty = CoefficientField::uniform(p, false).unwrap();
    assert!(reference_assemble(&empty, 0.5).unwrap().max_abs_diff(&lap.scaled(0.5)) < 1e-12);
}

#[test]
fn operators_are_symmetric_psd_with_constant_kernel() {
    for seed in 0..4 {
        let f = sample_field(&params(4, 4, 0.25, 0.3), seed, 1).unwrap();
        let a = assemble_total(&f, 0.3).unwrap();
        assert!(a.is_symmetric());
        let m = a.dim();
        assert!(a.nnz() <= 9 * m);
        let r = a.apply(&vec![1.0; m]);
        assert!(r.iter().all(|v| v.abs() <= 1e-12));
        let ev = SymmetricEigen::new(a.to_dense()).eigenvalues;
        assert!(ev.iter().all(|&v| v >= -1e-10));
    }
}

#[test]
fn factored_storage_is_linear_in_cells() {
    for l in [2, 4, 8] {
        let f = sample_field(&params(l, 4, 0.25, 0.4), 1, 1).unwrap();
        let k = KroneckerSum::from_field(&f);
        assert_eq!(k.cells(), f.covered_cells());
        assert!(k.storage() <= 24 * k.cells());
    }
}

/// `int_cell d(psi_v)/dx_dir` by 2x2 Gauss quadrature of the bilinear derivative.
fn element_derivative(h: f64, local: (usize, usize), dir: usize) -> f64 {
    let g = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
    let shape = |p: usize, t: f64| if p == 0 { 1.0 - t } else { t };
    let dshape = |p: usize| if p == 0 { -1.0 } else { 1.0 };
    let mut acc = 0.0;
    for &t in &g {
        for &s in &g {
            let d = if dir == 0 {
                dshape(local.0) * shape(local.1, s) / h
            } else {
                shape(local.0, t) * dshape(local.1) / h
            };
            acc += 0.25 * h * h * d;
        }
    }
    acc
}

#[test]
fn rhs_matches_elementwise_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let lambda = rng.random_range(0.05..1.0);
        let l = if rng.random::<bool>() { 2 } else { 4 };
        let f = sample_field(&params(l, 4, 0.25, lambda), rng.random(), 1).unwrap();
        let n = f.n();
        let h = 1.0 / n as f64;
        for (d, dir) in Direction::BOTH.into_iter().enumerate() {
            let rhs = assemble_rhs(&f, lambda, dir).unwrap();
            let mut oracle = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    if !f.is_covered(i, j) {
                        continue;
                    }
                    for p in 0..2 {
                        for q in 0..2 {
                            let v = ((i + p) % n) * n + (j + q) % n;
                            oracle[v] -= (1.0 - lambda) * element_derivative(h, (p, q), d) / h;
                        }
                    }
                }
            }
            let err = rhs.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-12, "{err}");
            let norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(rhs.iter().sum::<f64>().abs() <= 1e-12 * norm.max(1.0));
        }
    }
}

#[test]
fn assembly_is_equivariant() {
    let f = sample_field(&params(4, 4, 0.25, 0.3), 8, 1).unwrap();
    let n = f.n();
    let a = assemble_total(&f, 0.3).unwrap();
    for op in [
        SymmetryOp::Translate(3, -5),
        SymmetryOp::Rotate90,
        SymmetryOp::ReflectX1,
        SymmetryOp::ReflectX2,
        SymmetryOp::SwapAxes,
    ] {
        let g = transform_field(&f, op);
        let b = assemble_total(&g, 0.3).unwrap();
        let pa = a.permuted(&op.vertex_permutation(n));
        assert_eq!(b.max_abs_diff(&pa), 0.0, "{op:?}");
    }
}
