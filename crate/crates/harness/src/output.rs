//! CSV and plain-text writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use spme_core::{SparseSymMatrix, Trajectory};

use crate::experiments::{ConvergenceTable, ProjectionStudy, SpacetimeRun, StochasticCell, SupportRow};

/// Six significant digits, without an exponent where a plain decimal reads
/// naturally.
pub fn fmt6(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    let mag = rounded.abs().log10();
    if (-5.0..15.0).contains(&mag) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    csv::Writer::from_path(path).with_context(|| format!("opening {}", path.display()))
}

pub fn write_projection(path: &Path, study: &ProjectionStudy) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["target", "J", "h", "norm_p", "P_h_error", "tildeR_h_error"])?;
    for r in &study.rows {
        w.write_record([r.target.name().into(), r.cells.to_string(), fmt6(r.h), fmt6(r.norm_exponent), fmt6(r.projection_error), fmt6(r.restriction_error)])?;
    }
    w.flush()?;
    Ok(())
}

/// Long form: one row per `(J, N)`.
pub fn write_convergence_long(path: &Path, table: &ConvergenceTable) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["J", "N", "error", "error_gauss"])?;
    for c in &table.cells {
        w.write_record([c.cells.to_string(), c.steps.to_string(), fmt6(c.error), fmt6(c.error_gauss)])?;
    }
    w.flush()?;
    Ok(())
}

/// Table layout: rows `N`, columns `J`; missing entries are empty.
pub fn write_convergence_wide(path: &Path, table: &ConvergenceTable) -> Result<()> {
    let mut w = writer(path)?;
    let js = table.js();
    let mut header = vec!["N\\J".to_string()];
    header.extend(js.iter().map(|j| j.to_string()));
    w.write_record(&header)?;
    for n in table.ns() {
        let mut row = vec![n.to_string()];
        row.extend(js.iter().map(|&j| table.get(j, n).map(|c| fmt6(c.error)).unwrap_or_default()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_stochastic(path: &Path, cells: &[StochasticCell]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["J", "N", "samples", "mean", "std_error", "lp_omega", "failures", "boundary_hits"])?;
    for c in cells {
        w.write_record([
            c.cells.to_string(),
            c.steps.to_string(),
            c.stats.count.to_string(),
            fmt6(c.stats.mean),
            fmt6(c.stats.std_error),
            fmt6(c.lp_omega),
            c.failures.to_string(),
            c.boundary_hits.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_support(path: &Path, rows: &[SupportRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["seed", "n", "t", "left", "right", "radius", "extent", "contained", "touches_boundary"])?;
    for r in rows {
        w.write_record([
            r.seed.to_string(),
            r.step.to_string(),
            fmt6(r.time),
            fmt6(r.left),
            fmt6(r.right),
            fmt6(r.radius),
            fmt6(r.extent),
            r.contained.to_string(),
            r.touches_boundary.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `n,t,c_1,...,c_M` per time step, full precision.
pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = writer(path)?;
    let m = traj.grid().num_cells();
    let mut header = vec!["n".to_string(), "t".to_string()];
    header.extend((1..=m).map(|i| format!("c_{i}")));
    w.write_record(&header)?;
    for (n, u) in traj.states().iter().enumerate() {
        let mut row = vec![n.to_string(), format!("{:e}", traj.time(n))];
        row.extend(u.values().iter().map(|v| format!("{v:e}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_spacetime(dir: &Path, runs: &[SpacetimeRun]) -> Result<()> {
    for run in runs {
        write_trajectory(&dir.join(format!("spacetime_traj_seed{}.csv", run.seed)), &run.trajectory)?;
    }
    let rows: Vec<SupportRow> = runs.iter().flat_map(|r| r.support.iter().copied()).collect();
    write_support(&dir.join("spacetime_support.csv"), &rows)
}

/// Nonzero entries as `i j value`, 0-based, one per line.
pub fn write_matrix(out: &mut impl Write, m: &SparseSymMatrix) -> Result<()> {
    let mut out = BufWriter::new(out);
    for (i, j, v) in m.triplets() {
        if v != 0.0 {
            writeln!(out, "{i} {j} {v:e}")?;
        }
    }
    out.flush()?;
    Ok(())
}
