//! The study commands. Each writes `config.txt`, its CSV tables and `summary.json`
//! into the output directory.

use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use rayon::prelude::*;
use rvehom_core::ensemble::{
    quartic_diff_table, run_ensembles, std_dev_table, systematic_error_table, RunOptions, ScalingFit, SweepTable,
};
use rvehom_core::homogenize::{
    default_refinement_rhs, homogenized_matrix, refinement_study_for_field, CorrectorPair,
};
use rvehom_core::io::{write_centers_csv, write_field_dump, write_matrix_market};
use rvehom_core::solver::{pcg_solve, Preconditioner};
use rvehom_core::spectral::{clustering_report, constant_coefficient_operator, dos_ensemble, l2_distance, DEFAULT_POINTS};
use rvehom_core::{
    assemble_rhs, assemble_total, dense_eigenvalues, dos_curve, homogenize, quartic_diagnostics, sample_field,
    CoefficientField, Direction, EnsembleParams, HomogenizedMatrix,
};
use serde_json::json;

use crate::config::{CommandKind, RunConfig};
use crate::output::{csv, json, write};
use crate::CliError;

pub fn execute(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    write(out, "config.txt", cfg.to_text())?;
    let start = Instant::now();
    let (mut summary, non_converged) = match cfg.command {
        CommandKind::Field => (field(cfg, out)?, 0),
        CommandKind::Solve => solve(cfg, out)?,
        CommandKind::Sweep => sweep(cfg, out)?,
        CommandKind::Refine => refine(cfg, out)?,
        CommandKind::Dos => dos(cfg, out)?,
        CommandKind::Bench => bench(cfg, out)?,
    };
    summary["config"] = serde_json::to_value(cfg).context("serializing config")?;
    summary["non_converged"] = json!(non_converged);
    summary["elapsed_s"] = json!(start.elapsed().as_secs_f64());
    json(out, &summary)?;
    if cfg.strict && non_converged > 0 {
        return Err(CliError::NonConvergence(non_converged));
    }
    Ok(())
}

fn field(cfg: &RunConfig, out: &Path) -> Result<serde_json::Value, CliError> {
    let params = cfg.params()?;
    let f = sample_field(&params, cfg.seed, cfg.first_index)?;
    let mut dump = Vec::new();
    write_field_dump(&f, &mut dump)?;
    write(out, "field.txt", dump)?;
    let mut centers = Vec::new();
    write_centers_csv(&f, &mut centers)?;
    write(out, "centers.csv", centers)?;
    if cfg.dump_matrix {
        dump_matrix(&f, out)?;
    }
    Ok(json!({
        "n": f.n(),
        "centers": f.centers().len(),
        "inclusion_cells": params.inclusion_cells(),
        "covered_fraction": f.covered_fraction(),
        "stream_id": f.stream_id(),
    }))
}

fn dump_matrix(f: &CoefficientField, out: &Path) -> Result<(), CliError> {
    let a = assemble_total(f, f.params().lambda)?;
    let mut buf = Vec::new();
    write_matrix_market(&a, &mut buf)?;
    write(out, "matrix.mtx", buf)?;
    Ok(())
}

struct Timed {
    matrix: HomogenizedMatrix,
    correctors: CorrectorPair,
    t_field: f64,
    t_assembly: f64,
    t_rhs: f64,
    t_solve: f64,
}

/// One realization with per-stage wall-clock times in seconds.
fn timed_realization(params: &EnsembleParams, cfg: &RunConfig, index: u64) -> Result<Timed, CliError> {
    let lambda = params.lambda;
    let t = Instant::now();
    let f = sample_field(params, cfg.seed, index)?;
    let t_field = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let a = assemble_total(&f, lambda)?;
    let t_assembly = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let rhs = [
        assemble_rhs(&f, lambda, Direction::X1)?,
        assemble_rhs(&f, lambda, Direction::X2)?,
    ];
    let t_rhs = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let p = Preconditioner::new(f.n(), lambda, cfg.delta)?;
    let (phi1, r1) = pcg_solve(&a, &p, &rhs[0], cfg.tol, cfg.max_iter)?;
    let (phi2, r2) = pcg_solve(&a, &p, &rhs[1], cfg.tol, cfg.max_iter)?;
    let t_solve = t.elapsed().as_secs_f64();
    let correctors = CorrectorPair {
        phi: [phi1, phi2],
        reports: [r1, r2],
    };
    Ok(Timed {
        matrix: homogenized_matrix(&f, &correctors, lambda),
        correctors,
        t_field,
        t_assembly,
        t_rhs,
        t_solve,
    })
}

fn map_indices<T: Send>(
    cfg: &RunConfig,
    run: impl Fn(u64) -> Result<T, CliError> + Sync + Send,
) -> Result<Vec<T>, CliError> {
    let indices = cfg.first_index..cfg.first_index + cfg.n_realizations as u64;
    if cfg.serial {
        indices.map(run).collect()
    } else {
        indices.into_par_iter().map(run).collect()
    }
}

fn solve(cfg: &RunConfig, out: &Path) -> Result<(serde_json::Value, usize), CliError> {
    let params = cfg.params()?;
    let runs = map_indices(cfg, |i| timed_realization(&params, cfg, i))?;
    let rows = runs.iter().map(|r| {
        let m = &r.matrix;
        let rep = &r.correctors.reports;
        vec![
            m.realization_index.to_string(),
            cfg.seed.to_string(),
            m.a11.to_string(),
            m.a12.to_string(),
            m.a21.to_string(),
            m.a22.to_string(),
            rep[0].iterations.to_string(),
            rep[1].iterations.to_string(),
            format!("{:e}", rep[0].final_relative_residual),
            format!("{:e}", rep[1].final_relative_residual),
            m.converged.to_string(),
        ]
    });
    write(
        out,
        "realizations.csv",
        csv(
            &["index", "seed", "a11", "a12", "a21", "a22", "iters1", "iters2", "residual1", "residual2", "converged"],
            rows,
        ),
    )?;
    let timing_rows = runs.iter().map(|r| {
        vec![
            r.matrix.realization_index as f64,
            r.t_field,
            r.t_assembly,
            r.t_rhs,
            r.t_solve,
        ]
    });
    write(
        out,
        "timings.csv",
        csv(&["index", "t_field", "t_assembly", "t_rhs", "t_solve"], timing_rows),
    )?;
    if cfg.dump_matrix {
        dump_matrix(&sample_field(&params, cfg.seed, cfg.first_index)?, out)?;
    }
    let k = runs.len() as f64;
    let mean = |g: fn(&HomogenizedMatrix) -> f64| runs.iter().map(|r| g(&r.matrix)).sum::<f64>() / k;
    let total = |g: fn(&Timed) -> f64| runs.iter().map(g).sum::<f64>();
    let non_converged = runs.iter().filter(|r| !r.matrix.converged).count();
    Ok((
        json!({
            "realizations": runs.len(),
            "mean": [[mean(|m| m.a11), mean(|m| m.a12)], [mean(|m| m.a21), mean(|m| m.a22)]],
            "max_asymmetry": runs.iter().map(|r| r.matrix.asymmetry()).fold(0.0, f64::max),
            "timings_total_s": {
                "field": total(|r| r.t_field),
                "assembly": total(|r| r.t_assembly),
                "rhs": total(|r| r.t_rhs),
                "solve": total(|r| r.t_solve),
            },
        }),
        non_converged,
    ))
}

fn table_csv(t: &SweepTable) -> String {
    let mut header = vec!["L".to_string(), "N".to_string()];
    for c in &t.columns {
        header.push(c.clone());
        header.push(format!("{c}_se"));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = t.rows.iter().map(|r| {
        let mut row = vec![r.l.to_string(), r.n.to_string()];
        for (v, s) in r.values.iter().zip(&r.std_errs) {
            row.push(v.to_string());
            row.push(s.to_string());
        }
        row
    });
    csv(&header, rows)
}

fn fit_json(t: &SweepTable, column: &str) -> serde_json::Value {
    match t.fit(column) {
        Ok(ScalingFit {
            slope,
            intercept,
            r_squared,
            used,
        }) => json!({ "slope": slope, "intercept": intercept, "r_squared": r_squared, "points": used }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn sweep(cfg: &RunConfig, out: &Path) -> Result<(serde_json::Value, usize), CliError> {
    let base = cfg.params()?;
    let opts = RunOptions {
        solve: cfg.solve_options(),
        first_index: cfg.first_index,
        serial: cfg.serial,
    };
    let mut all: Vec<usize> = cfg.l_list.iter().flat_map(|&l| [l, 2 * l]).collect();
    all.sort_unstable();
    all.dedup();
    let set = run_ensembles(&base, &all, |_| cfg.n_realizations, cfg.seed, &opts)?;

    let systematic = systematic_error_table(&set, &cfg.l_list)?;
    let std_dev = std_dev_table(&set, &cfg.l_list)?;
    let quartic = quartic_diff_table(&set, &cfg.l_list)?;
    write(out, "systematic_error.csv", table_csv(&systematic))?;
    write(out, "std_dev.csv", table_csv(&std_dev))?;
    write(out, "quartic_diff.csv", table_csv(&quartic))?;

    let per_l = set.iter().map(|(l, e)| {
        let s = &e.stats;
        vec![
            l.to_string(),
            s.n.to_string(),
            s.mean[0][0].to_string(),
            s.mean[0][1].to_string(),
            s.mean[1][0].to_string(),
            s.mean[1][1].to_string(),
            s.std_a12.to_string(),
            s.std_diag_diff.to_string(),
            s.q(0, 0, 0, 0).to_string(),
            s.q(0, 0, 1, 1).to_string(),
            s.q(0, 1, 0, 1).to_string(),
            s.non_converged.to_string(),
        ]
    });
    write(
        out,
        "ensembles.csv",
        csv(
            &[
                "L", "N", "mean_a11", "mean_a12", "mean_a21", "mean_a22", "std_a12", "std_diag_diff", "q1111", "q1122",
                "q1212", "non_converged",
            ],
            per_l,
        ),
    )?;
    let samples = set.iter().flat_map(|(l, e)| {
        e.samples.iter().map(move |m| {
            vec![
                l.to_string(),
                m.realization_index.to_string(),
                m.a11.to_string(),
                m.a12.to_string(),
                m.a21.to_string(),
                m.a22.to_string(),
                m.iterations_total.to_string(),
                m.converged.to_string(),
            ]
        })
    });
    write(
        out,
        "realizations.csv",
        csv(&["L", "index", "a11", "a12", "a21", "a22", "iterations", "converged"], samples),
    )?;

    let diagnostics: Vec<_> = set
        .iter()
        .map(|(l, e)| json!({ "L": l, "quartic": quartic_diagnostics(e) }))
        .collect();
    let non_converged = set.values().map(|e| e.stats.non_converged).sum();
    Ok((
        json!({
            "ensembles": set.values().map(|e| &e.stats).collect::<Vec<_>>(),
            "fits": {
                "std_a12": fit_json(&std_dev, "std_a12"),
                "std_diag_diff": fit_json(&std_dev, "std_diag_diff"),
                "systematic_error": fit_json(&systematic, "diff"),
                "q11_diff": fit_json(&quartic, "q11_diff"),
                "q14_diff": fit_json(&quartic, "q14_diff"),
            },
            "quartic_diagnostics": diagnostics,
        }),
        non_converged,
    ))
}

fn refine(cfg: &RunConfig, out: &Path) -> Result<(serde_json::Value, usize), CliError> {
    let params = cfg.params()?;
    let f = sample_field(&params, cfg.seed, cfg.first_index)?;
    let table = refinement_study_for_field(&f, params.lambda, &cfg.grid_list, &default_refinement_rhs, &cfg.solve_options())?;
    let decay = table.decay_factors();
    let rows = table.rows.iter().enumerate().map(|(k, r)| {
        let d = if k == 0 { String::new() } else { decay[k - 1].to_string() };
        vec![r.n.to_string(), r.rel_diff.to_string(), d, r.iterations.to_string()]
    });
    write(out, "refinement.csv", csv(&["n", "rel_diff", "decay", "iterations"], rows))?;
    let non_converged = table.rows.iter().filter(|r| r.iterations >= cfg.max_iter).count();
    Ok((
        json!({
            "coarse_n": table.coarse_n,
            "rows": table.rows,
            "decay_factors": decay,
            "order": table.convergence_order(),
        }),
        non_converged,
    ))
}

fn dos(cfg: &RunConfig, out: &Path) -> Result<(serde_json::Value, usize), CliError> {
    let params = cfg.params()?;
    let opts = cfg.solve_options();
    let per = map_indices(cfg, |i| -> Result<_, CliError> {
        let f = sample_field(&params, cfg.seed, i)?;
        let ev = dense_eigenvalues(&assemble_total(&f, params.lambda)?)?;
        let (m, _) = homogenize(&f, params.lambda, &opts)?;
        Ok((ev, m))
    })?;
    let spectra: Vec<Vec<f64>> = per.iter().map(|p| p.0.clone()).collect();
    let (curves, avg) = dos_ensemble(&spectra, cfg.eta, DEFAULT_POINTS)?;
    let k = per.len() as f64;
    let a11 = per.iter().map(|p| p.1.a11).sum::<f64>() / k;
    let a22 = per.iter().map(|p| p.1.a22).sum::<f64>() / k;
    let hom_ev = dense_eigenvalues(&constant_coefficient_operator(params.n(), a11, a22))?;
    let hom = dos_curve(&hom_ev, avg.eta, &avg.t)?;

    let indices: Vec<u64> = (cfg.first_index..cfg.first_index + per.len() as u64).collect();
    let mut header = vec!["t".to_string()];
    header.extend(indices.iter().map(|i| format!("phi_{i}")));
    header.push("average".into());
    header.push("homogenized".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..avg.t.len()).map(|j| {
        let mut row = vec![avg.t[j]];
        row.extend(curves.iter().map(|c| c.values[j]));
        row.push(avg.values[j]);
        row.push(hom.values[j]);
        row
    });
    write(out, "dos.csv", csv(&header, rows))?;

    let mut ev_header = vec!["k".to_string()];
    ev_header.extend(indices.iter().map(|i| format!("eig_{i}")));
    let ev_header: Vec<&str> = ev_header.iter().map(String::as_str).collect();
    let ev_rows = (0..spectra[0].len()).map(|j| {
        let mut row = vec![j.to_string()];
        row.extend(spectra.iter().map(|s| s[j].to_string()));
        row
    });
    write(out, "eigenvalues.csv", csv(&ev_header, ev_rows))?;

    let clustering = (curves.len() >= 2)
        .then(|| clustering_report(&curves))
        .transpose()?
        .map(|r| json!({ "scatter": r.scatter, "batch_spread": r.batch_spread }));
    let non_converged = per.iter().filter(|p| !p.1.converged).count();
    Ok((
        json!({
            "eta": avg.eta,
            "points": avg.t.len(),
            "dimension": avg.m,
            "integrals": curves.iter().map(|c| c.integral()).collect::<Vec<_>>(),
            "min_eigenvalues": spectra.iter().map(|s| s[0]).collect::<Vec<_>>(),
            "max_eigenvalues": spectra.iter().map(|s| s[s.len() - 1]).collect::<Vec<_>>(),
            "mean_diagonal": [a11, a22],
            "clustering": clustering,
            "l2_distance_homogenized_vs_average": l2_distance(&hom, &avg),
        }),
        non_converged,
    ))
}

fn bench(cfg: &RunConfig, out: &Path) -> Result<(serde_json::Value, usize), CliError> {
    let mut rows = Vec::new();
    let mut non_converged = 0;
    for &l in &cfg.l_list {
        let params = cfg.params()?.with_l(l)?;
        let reps = cfg.n_realizations;
        let mut acc = [0.0; 4];
        let mut iters = [0usize; 2];
        for k in 0..reps as u64 {
            let r = timed_realization(&params, cfg, cfg.first_index + k)?;
            for (a, t) in acc.iter_mut().zip([r.t_field, r.t_assembly, r.t_rhs, r.t_solve]) {
                *a += t / reps as f64;
            }
            let it = r.correctors.iterations();
            iters = [iters[0].max(it[0]), iters[1].max(it[1])];
            non_converged += usize::from(!r.matrix.converged);
        }
        log::info!("bench L={l}: assembly {:.3e}s solve {:.3e}s", acc[1], acc[3]);
        rows.push(vec![
            l.to_string(),
            params.n().to_string(),
            params.dofs().to_string(),
            (l * l).to_string(),
            acc[0].to_string(),
            acc[1].to_string(),
            acc[2].to_string(),
            acc[3].to_string(),
            iters[0].to_string(),
            iters[1].to_string(),
        ]);
    }
    write(
        out,
        "bench.csv",
        csv(
            &[
                "L", "n", "dofs", "inclusions", "t_field", "t_assembly", "t_rhs", "t_solve", "max_iters1", "max_iters2",
            ],
            rows.clone(),
        ),
    )?;
    Ok((json!({ "rows": rows.len(), "repetitions": cfg.n_realizations }), non_converged))
}
