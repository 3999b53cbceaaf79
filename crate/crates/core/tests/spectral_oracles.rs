use std::f64::consts::PI;

use rvehom_core::spectral::{
    average_curve, clustering_report, constant_coefficient_operator, dos_default, dos_ensemble, extended_grid,
    l2_distance, DENSE_MAX_DIM,
};
use rvehom_core::*;

fn realization_spectrum(p: &EnsembleParams, seed: u64, index: u64) -> Vec<f64> {
    let f = sample_field(p, seed, index).unwrap();
    dense_eigenvalues(&assemble_total(&f, p.lambda).unwrap()).unwrap()
}

#[test]
fn laplacian_eigenvalues_match_dft() {
    let n = 4;
    let got = dense_eigenvalues(&assemble_laplacian(n).unwrap()).unwrap();
    let mut want = Vec::new();
    for j in 0..n {
        for k in 0..n {
            let s = |t: usize| 4.0 * (PI * t as f64 / n as f64).sin().powi(2);
            want.push(n as f64 * (s(j) + s(k)));
        }
    }
    want.sort_by(f64::total_cmp);
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() <= 1e-10);
    }
}

#[test]
fn unit_contrast_has_simple_zero_eigenvalue() {
    let p = EnsembleParams::new(2, 8, 0.25, 1.0, 1e-8).unwrap();
    let ev = realization_spectrum(&p, 0, 1);
    assert_eq!(ev.iter().filter(|v| v.abs() < 1e-8).count(), 1);
    let lap = dense_eigenvalues(&assemble_laplacian(16).unwrap()).unwrap();
    assert!(ev.iter().zip(&lap).all(|(a, b)| (a - b).abs() <= 1e-10));
}

#[test]
fn realizations_are_positive_semidefinite_and_normalized() {
    let p = EnsembleParams::new(2, 8, 0.25, 0.5, 1e-8).unwrap();
    for index in 1..=4 {
        let ev = realization_spectrum(&p, 3, index);
        assert!(ev[0].abs() <= 1e-10);
        assert!(ev[1] > 1e-6);
        let c = dos_default(&ev, None).unwrap();
        assert!((c.integral() - 1.0).abs() <= 1e-6);
        assert!(c.values.iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn halving_eta_doubles_isolated_peaks() {
    let ev = [0.0, 10.0];
    let t = extended_grid(0.0, 10.0, 0.01, 20001);
    let wide = dos_curve(&ev, 0.02, &t).unwrap();
    let narrow = dos_curve(&ev, 0.01, &t).unwrap();
    let ratio = narrow.peak() / wide.peak();
    assert!((ratio - 2.0).abs() < 1e-3, "{ratio}");
}

#[test]
fn oversized_operators_are_refused() {
    let n = (DENSE_MAX_DIM as f64).sqrt() as usize + 1;
    assert!(dense_eigenvalues(&assemble_laplacian(n).unwrap()).is_err());
    assert!(dos_curve(&[1.0], -1.0, &[0.0]).is_err());
}

#[test]
fn ensemble_curves_cluster_and_differ_from_homogenized_operator() {
    let p = EnsembleParams::new(2, 8, 0.25, 0.5, 1e-8).unwrap();
    let spectra: Vec<Vec<f64>> = (1..=12).map(|i| realization_spectrum(&p, 0, i)).collect();
    let (curves, avg) = dos_ensemble(&spectra, None, 1024).unwrap();
    assert!(curves.iter().all(|c| (c.integral() - 1.0).abs() <= 1e-6));
    let report = clustering_report(&curves).unwrap();
    assert!(report.scatter.is_finite() && report.scatter > 0.0);
    let first = report.batch_spread.first().unwrap().1;
    let last = report.batch_spread.last().unwrap().1;
    assert!(last < first);

    let ens = run_ensemble(&p, 12, 0).unwrap();
    let m = ens.stats.mean;
    let hom = dense_eigenvalues(&constant_coefficient_operator(p.n(), m[0][0], m[1][1])).unwrap();
    let hom_curve = dos_curve(&hom, avg.eta, &avg.t).unwrap();
    assert!(l2_distance(&hom_curve, &avg) > report.scatter);
    assert!(average_curve(&[]).is_err());
}
