//! Backward regression recursion for one parameter row `t_i`.
//!
//! For fixed `i` the row solves
//! `eta(r) = E_r[eta(r+1) + J_r] + E_r[d_r(zeta_r)] dt`, `zeta_r = E_r[eta(r+1) dW_r] / dt`,
//! from `eta(n) = J_n` down to `r = i`, where `J_r` is the pathwise amount the source
//! injects at node `r` (already `F_r`-measurable) and `d_r` an optional adapted driver.

use crate::regression::Regressor;
use crate::stochastic::{Cell, PathProcess};

/// Supplies the data entering one row of the recursion.
pub(crate) trait RowSource: Sync {
    fn dim(&self) -> usize;
    /// Adds the amount entering row `i` at node `r` into `out`; returns whether anything was added.
    fn inject(&self, i: usize, r: usize, out: &mut [f64]) -> bool;
    /// Whether `driver` reads `zeta`.
    fn driver_needs_zeta(&self) -> bool;
    /// Writes the driver at step `k` of row `i` into `out`; returns `false` when there is none.
    fn driver(&self, i: usize, k: usize, zeta: Option<&[f64]>, out: &mut [f64]) -> bool;
}

/// Position of a row recursion; `z[k]` holds the cell `Z(i, k + 1)`.
#[derive(Clone, Debug)]
pub(crate) struct RowState {
    pub i: usize,
    pub node: usize,
    pub eta: Vec<f64>,
    pub coeffs: Option<Vec<f64>>,
    pub z: Vec<Cell>,
}

/// Optional record of the whole `(eta, zeta)` trajectory of a row.
pub(crate) struct Trace<'t> {
    pub eta: &'t mut PathProcess,
    pub zeta: &'t mut PathProcess,
}

impl RowState {
    pub fn start(reg: &Regressor<'_>, src: &dyn RowSource, i: usize) -> Self {
        let ens = reg.ensemble();
        let n = ens.grid().n_steps();
        let mut eta = vec![0.0; ens.n_paths() * src.dim()];
        src.inject(i, n, &mut eta);
        Self {
            i,
            node: n,
            eta,
            coeffs: None,
            z: vec![Cell::Zero; n],
        }
    }

    /// Runs the recursion from the current node down to `target`.
    pub fn advance(&mut self, reg: &Regressor<'_>, src: &dyn RowSource, target: usize, mut trace: Option<Trace<'_>>) {
        let ens = reg.ensemble();
        let dim = src.dim();
        let dt = ens.grid().dt();
        let len = ens.n_paths() * dim;
        if let Some(tr) = trace.as_mut() {
            tr.eta.at_mut(self.node).copy_from_slice(&self.eta);
        }
        let mut extra = vec![0.0; len];
        let mut drv = vec![0.0; len];
        let mut zeta_vals = vec![0.0; len];
        for k in (target..self.node).rev() {
            let fit = reg.project_step(k, &self.eta, dim);
            let want_zeta = src.driver_needs_zeta() || trace.is_some();
            if want_zeta {
                reg.evaluate(k, &fit.zeta, dim, &mut zeta_vals);
            }
            extra.fill(0.0);
            let mut any = src.inject(self.i, k, &mut extra);
            let zeta_arg = if want_zeta { Some(zeta_vals.as_slice()) } else { None };
            if src.driver(self.i, k, zeta_arg, &mut drv) {
                for (e, d) in extra.iter_mut().zip(&drv) {
                    *e += d * dt;
                }
                any = true;
            }
            let mut mean = fit.mean;
            if any {
                let c = reg.project(k, &extra, dim);
                for (m, v) in mean.iter_mut().zip(c) {
                    *m += v;
                }
            }
            reg.evaluate(k, &mean, dim, &mut self.eta);
            if let Some(tr) = trace.as_mut() {
                tr.eta.at_mut(k).copy_from_slice(&self.eta);
                tr.zeta.at_mut(k).copy_from_slice(&zeta_vals);
            }
            self.z[k] = reg.cell(k, fit.zeta);
            self.coeffs = Some(mean);
            self.node = k;
        }
    }

    /// Cell representation of `eta` at the current node.
    pub fn y_cell(&self, reg: &Regressor<'_>) -> Cell {
        match &self.coeffs {
            Some(c) => reg.cell(self.node, c.clone()),
            None => Cell::Dense(self.eta.clone()),
        }
    }

    /// Cells `Z(i, j)` for `j = i+1..=n`.
    pub fn z_row(&self) -> Vec<Cell> {
        self.z[self.i..].to_vec()
    }
}
