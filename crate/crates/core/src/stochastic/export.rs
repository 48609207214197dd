//! CSV snapshots of ensembles, processes and fields.

use std::io::Write;

use super::brownian::BrownianEnsemble;
use super::field::Field;
use super::process::PathProcess;
use crate::error::Result;

pub const FIELD_HEADER: &str = "path,t_index,s_index,component,value";
pub const PROCESS_HEADER: &str = "path,node,component,value";
pub const ENSEMBLE_HEADER: &str = "path,node,w";

fn export_count(requested: usize, ens: &BrownianEnsemble) -> usize {
    requested.min(ens.n_paths())
}

/// Writes `W` for the first `paths` paths.
pub fn write_ensemble_csv<W: Write>(out: &mut W, ens: &BrownianEnsemble, paths: usize) -> Result<()> {
    writeln!(out, "{ENSEMBLE_HEADER}")?;
    for p in 0..export_count(paths, ens) {
        for k in 0..=ens.grid().n_steps() {
            writeln!(out, "{p},{k},{}", ens.w(k)[p])?;
        }
    }
    Ok(())
}

/// Writes a process for the first `paths` paths over `nodes`.
pub fn write_process_csv<W: Write>(
    out: &mut W,
    process: &PathProcess,
    nodes: std::ops::Range<usize>,
    paths: usize,
) -> Result<()> {
    writeln!(out, "{PROCESS_HEADER}")?;
    let dim = process.dim();
    for p in 0..paths.min(process.n_paths()) {
        for k in nodes.clone() {
            for c in 0..dim {
                writeln!(out, "{p},{k},{c},{}", process.value(p, k, c))?;
            }
        }
    }
    Ok(())
}

/// Writes every stored cell of a field for the first `paths` paths.
pub fn write_field_csv<W: Write, F: Field>(
    out: &mut W,
    field: &F,
    ens: &BrownianEnsemble,
    paths: usize,
) -> Result<()> {
    writeln!(out, "{FIELD_HEADER}")?;
    let n = field.grid().n_steps();
    let dim = field.dim();
    let m = export_count(paths, ens);
    let mut buf = vec![0.0; m * dim];
    let mut rows: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    for i in 0..=n {
        for j in 1..=n {
            if let Some(cell) = field.lookup(i, j) {
                cell.eval_range(ens, j - 1, dim, 0..m, &mut buf);
                rows.push((i, j, buf.clone()));
            }
        }
    }
    for p in 0..m {
        for (i, j, vals) in &rows {
            for c in 0..dim {
                writeln!(out, "{p},{i},{j},{c},{}", vals[p * dim + c])?;
            }
        }
    }
    Ok(())
}
