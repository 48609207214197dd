//! Weighted `H^p_Delta` norms assembled from per-node contributions.

use crate::error::{invalid, Result};
use crate::par;
use crate::stochastic::{BrownianEnsemble, Cell, PathProcess, TimeGrid, TriangleField};

/// Difference of two cells at `node`, staying in coefficient space when possible.
pub(crate) fn cell_diff(a: &Cell, b: &Cell, ens: &BrownianEnsemble, node: usize, dim: usize) -> Cell {
    match (a, b) {
        (x, Cell::Zero) => x.clone(),
        (Cell::Basis { degree: d1, coeffs: c1 }, Cell::Basis { degree: d2, coeffs: c2 }) if d1 == d2 => Cell::Basis {
            degree: *d1,
            coeffs: c1.iter().zip(c2).map(|(x, y)| x - y).collect(),
        },
        (Cell::Zero, Cell::Basis { degree, coeffs }) => Cell::Basis {
            degree: *degree,
            coeffs: coeffs.iter().map(|x| -x).collect(),
        },
        _ => {
            let va = a.eval_vec(ens, node, dim);
            let vb = b.eval_vec(ens, node, dim);
            Cell::Dense(va.iter().zip(vb).map(|(x, y)| x - y).collect())
        }
    }
}

fn mean_pow(values: &[f64], dim: usize, p: f64) -> f64 {
    let n = (values.len() / dim) as f64;
    values
        .chunks(dim)
        .map(|r| r.iter().map(|x| x * x).sum::<f64>().powf(p / 2.0))
        .sum::<f64>()
        / n
}

/// `A_i = E|Y_i|^p + E(sum_k |Z(i, k+1)|^2 dt)^{p/2}` for rows given as cell rows.
pub(crate) fn contributions(
    ens: &BrownianEnsemble,
    dim: usize,
    y: &dyn Fn(usize) -> Vec<f64>,
    z_row: &(dyn Fn(usize) -> Vec<Cell> + Sync),
    p: f64,
) -> Vec<f64> {
    let n = ens.grid().n_steps();
    let dt = ens.grid().dt();
    let np = ens.n_paths();
    let zpart = par::map(n + 1, |i| {
        let row = z_row(i);
        if row.iter().all(Cell::is_zero) {
            return 0.0;
        }
        let mut quad = vec![0.0; np];
        let mut buf = vec![0.0; np * dim];
        for (off, cell) in row.iter().enumerate() {
            if cell.is_zero() {
                continue;
            }
            cell.eval(ens, i + off, dim, &mut buf);
            for (q, r) in quad.iter_mut().zip(buf.chunks(dim)) {
                *q += r.iter().map(|x| x * x).sum::<f64>() * dt;
            }
        }
        quad.iter().map(|q| q.powf(p / 2.0)).sum::<f64>() / np as f64
    });
    (0..=n).map(|i| mean_pow(&y(i), dim, p) + zpart[i]).collect()
}

/// `{sum_{i<n} e^{beta p t_i} A_i dt}^{1/p}`.
pub(crate) fn combine(grid: &TimeGrid, a: &[f64], beta: f64, p: f64) -> f64 {
    let dt = grid.dt();
    (0..grid.n_steps())
        .map(|i| (beta * p * grid.time(i)).exp() * a[i] * dt)
        .sum::<f64>()
        .powf(1.0 / p)
}

/// Empirical `H^{p, beta}_Delta` norm of a pair `(Y, Z)` on the upper triangle.
pub fn weighted_norm(
    y: &PathProcess,
    z: &TriangleField,
    ens: &BrownianEnsemble,
    beta: f64,
    p: f64,
) -> Result<f64> {
    if !(p > 1.0) {
        return invalid(format!("p must exceed 1, got {p}"));
    }
    if !(beta >= 0.0) {
        return invalid(format!("beta must be nonnegative, got {beta}"));
    }
    y.check_compatible(ens)?;
    if z.grid() != ens.grid() || z.dim() != y.dim() {
        return invalid("field does not match the process");
    }
    let a = contributions(ens, y.dim(), &|i| y.at(i).to_vec(), &|i| z.row(i).to_vec(), p);
    Ok(combine(ens.grid(), &a, beta, p))
}
