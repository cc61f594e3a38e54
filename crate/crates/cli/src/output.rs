//! Artifact writers: CSV tables (17 significant digits, deterministic) and
//! JSON sidecars.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use spinrb_core::diagnostics::{SvdDecay, ValidationReport};
use spinrb_core::offline::ReducedBasisModel;
use spinrb_core::online::ScanRow;
use spinrb_core::util::fmt_g17;

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_g17).unwrap_or_default()
}

/// Momentum column label from an integer reciprocal-lattice label.
fn momentum_column(label: [usize; 2], two_d: bool) -> String {
    if two_d {
        format!("sf_k{}_{}", label[0], label[1])
    } else {
        format!("sf_k{}", label[0])
    }
}

pub fn write_scan_csv(
    path: &Path,
    rbm: &ReducedBasisModel,
    rows: &[ScanRow],
    momenta: &[usize],
    param_dim: usize,
) -> anyhow::Result<()> {
    let obs = &rbm.observables()[0];
    let two_d = obs.meta.momentum_labels.iter().any(|l| l[1] != 0);
    let mut w = BufWriter::new(File::create(path)?);
    let mut header: Vec<String> = vec!["index".into()];
    for d in 0..param_dim {
        header.push(format!("mu_{d}"));
    }
    header.extend(
        [
            "lambda_rb",
            "degeneracy",
            "gap_rb",
            "residual",
            "occupation",
        ]
        .map(String::from),
    );
    for &p in momenta {
        header.push(momentum_column(obs.meta.momentum_labels[p], two_d));
    }
    header.push("imag_max".into());
    header.push("flag".into());
    writeln!(w, "{}", header.join(","))?;

    for row in rows {
        let mut cells: Vec<String> = vec![row.index.to_string()];
        for d in 0..param_dim {
            cells.push(fmt_g17(row.mu[d]));
        }
        cells.push(fmt_g17(row.lambda_rb));
        cells.push(row.degeneracy.to_string());
        cells.push(fmt_g17(row.gap_rb));
        cells.push(fmt_g17(row.residual));
        cells.push(fmt_opt(row.occupation));
        if row.structure_factor.is_empty() {
            cells.extend(momenta.iter().map(|_| String::new()));
        } else {
            cells.extend(row.structure_factor.iter().map(|&s| fmt_g17(s)));
        }
        cells.push(fmt_g17(row.imag_max));
        cells.push(row.flag.clone().unwrap_or_default());
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Scan sidecar: reduced-model metadata alongside the CSV.
pub fn write_scan_sidecar(path: &Path, rbm: &ReducedBasisModel) -> anyhow::Result<()> {
    let obs = &rbm.observables()[0];
    let meta = serde_json::json!({
        "model": rbm.model(),
        "basis_size": rbm.basis_size(),
        "truth_solves": rbm.samples().len(),
        "samples": rbm.samples(),
        "greedy_tol": rbm.greedy_tol(),
        "compress_tol": rbm.compress_tol(),
        "tol_degeneracy": rbm.tol_degeneracy(),
        "sigma_ref": rbm.sigma_ref(),
        "observable": {
            "label": obs.label,
            "momenta": obs.meta.momenta,
            "momentum_labels": obs.meta.momentum_labels,
            "norm": obs.meta.norm,
        },
        "basis_included": rbm.has_basis(),
        "domain": rbm.domain(),
    });
    std::fs::write(path, serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn write_svd_csv(path: &Path, decay: &SvdDecay) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "n,sigma_normalized")?;
    for (i, s) in decay.sigma.iter().enumerate() {
        writeln!(w, "{},{}", i + 1, fmt_g17(*s))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_residual_history_csv(path: &Path, rbm: &ReducedBasisModel) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "iteration,basis_size,max_residual,degeneracy,added,truth_iterations,truth_method,fallback"
    )?;
    for r in rbm.history() {
        writeln!(
            w,
            "{},{},{},{},{},{},{:?},{}",
            r.iteration,
            r.basis_size,
            fmt_g17(r.max_residual),
            r.degeneracy,
            r.added,
            r.truth_iterations,
            r.truth_method,
            r.fallback
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_validation_csv(path: &Path, report: &ValidationReport) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "basis_size,err_val,err_vec,err_sf,mean_val,mean_vec,mean_sf,max_residual,mean_residual,absolute_switches,degeneracy_mismatches"
    )?;
    for r in &report.per_basis {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.basis_size,
            fmt_g17(r.err_val),
            fmt_g17(r.err_vec),
            fmt_g17(r.err_sf),
            fmt_g17(r.mean_val),
            fmt_g17(r.mean_vec),
            fmt_g17(r.mean_sf),
            fmt_g17(r.max_residual),
            fmt_g17(r.mean_residual),
            r.absolute_switches,
            r.degeneracy_mismatches
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_validation_points_csv(path: &Path, report: &ValidationReport) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let dim = report.per_point.first().map_or(0, |p| p.mu.len());
    let mut header: Vec<String> = vec!["index".into()];
    for d in 0..dim {
        header.push(format!("mu_{d}"));
    }
    header.extend(
        [
            "err_val",
            "err_vec",
            "err_sf",
            "residual",
            "degeneracy_truth",
            "degeneracy_rb",
            "flagged",
        ]
        .map(String::from),
    );
    writeln!(w, "{}", header.join(","))?;
    for p in &report.per_point {
        let mut cells = vec![p.index.to_string()];
        cells.extend(p.mu.iter().map(|&c| fmt_g17(c)));
        cells.push(fmt_g17(p.err_val));
        cells.push(fmt_g17(p.err_vec));
        cells.push(fmt_g17(p.err_sf));
        cells.push(fmt_g17(p.residual));
        cells.push(p.degeneracy_truth.to_string());
        cells.push(p.degeneracy_rb.to_string());
        cells.push(p.flagged.to_string());
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}
