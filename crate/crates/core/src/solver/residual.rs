use super::picard::FrozenGenerator;
use super::BsvieSolution;
use crate::error::{invalid, Result};
use crate::generator::{FreeTerm, GeneratorSpec};
use crate::par;
use crate::stochastic::{BrownianEnsemble, PathProcess, TriangleField};

/// Pathwise equation residual at one parameter node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeResidual {
    pub node: usize,
    pub rms: f64,
    pub max_abs: f64,
}

/// Pathwise `Y_i - psi_i - sum_{k>=i} g_k dt + sum_{k>=i} Z_k dW_k` for row `i`.
///
/// `z_at(i, k, out)` writes the integrand on step `k`; `g_at(i, k, z, out)` the generator given it.
pub(crate) fn row_residual(
    ens: &BrownianEnsemble,
    y: &PathProcess,
    psi: &FreeTerm,
    i: usize,
    z_at: &(dyn Fn(usize, usize, &mut [f64]) + Sync),
    g_at: &(dyn Fn(usize, usize, &[f64], &mut [f64]) -> bool + Sync),
) -> Vec<f64> {
    let n = ens.grid().n_steps();
    let dt = ens.grid().dt();
    let dim = y.dim();
    let len = ens.n_paths() * dim;
    let mut r = vec![0.0; len];
    psi.evaluate(i, ens, &mut r);
    for (a, b) in r.iter_mut().zip(y.at(i)) {
        *a = b - *a;
    }
    let mut zv = vec![0.0; len];
    let mut gv = vec![0.0; len];
    for k in i..n {
        z_at(i, k, &mut zv);
        if g_at(i, k, &zv, &mut gv) {
            for (a, g) in r.iter_mut().zip(&gv) {
                *a -= g * dt;
            }
        }
        for (p, d) in ens.dw(k).iter().enumerate() {
            for c in 0..dim {
                r[p * dim + c] += zv[p * dim + c] * d;
            }
        }
    }
    r
}

pub(crate) fn summarize(node: usize, r: &[f64], dim: usize) -> NodeResidual {
    let mut sq = 0.0;
    let mut max_abs: f64 = 0.0;
    let mut count = 0usize;
    for row in r.chunks(dim) {
        let e = row.iter().map(|x| x * x).sum::<f64>();
        sq += e;
        max_abs = max_abs.max(e.sqrt());
        count += 1;
    }
    NodeResidual {
        node,
        rms: if count > 0 { (sq / count as f64).sqrt() } else { 0.0 },
        max_abs,
    }
}

/// Per-row residual statistics with `Z` read from `z`.
pub(crate) fn residual_with(
    ens: &BrownianEnsemble,
    y: &PathProcess,
    z: &TriangleField,
    psi: &FreeTerm,
    g_at: &(dyn Fn(usize, usize, &[f64], &mut [f64]) -> bool + Sync),
) -> Vec<NodeResidual> {
    let n = ens.grid().n_steps();
    let z_at = |i: usize, k: usize, out: &mut [f64]| z.eval(i, k + 1, ens, out).expect("triangle cell in range");
    par::map(n + 1, |i| summarize(i, &row_residual(ens, y, psi, i, &z_at, g_at), y.dim()))
}

/// Per-node residual of a Type-I or Type-II solution.
pub fn residual(sol: &BsvieSolution, psi: &FreeTerm, g: &GeneratorSpec, ens: &BrownianEnsemble) -> Result<Vec<NodeResidual>> {
    sol.y.check_compatible(ens)?;
    if g.dim != sol.y.dim() || psi.dim != sol.y.dim() {
        return invalid("dimension mismatch between solution and equation data");
    }
    let frozen = FrozenGenerator::new(ens, g, &sol.y, sol.z.triangle(), sol.z.square());
    Ok(residual_with(ens, &sol.y, sol.z.triangle(), psi, &|i, k, z, o| {
        frozen.eval(i, k, Some(z), o);
        true
    }))
}
