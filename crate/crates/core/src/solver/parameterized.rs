use super::row::{RowSource, RowState, Trace};
use crate::error::{invalid, Result};
use crate::regression::{BasisConfig, Regressor};
use crate::stochastic::{BrownianEnsemble, PathProcess};

/// `(eta(t, r), zeta(t, r))` for one parameter node `t`; entries before `t` are zero.
#[derive(Clone, Debug)]
pub struct ParameterizedSolution {
    pub t_node: usize,
    pub eta: PathProcess,
    pub zeta: PathProcess,
}

struct SliceSource<'a> {
    dim: usize,
    terminal: &'a [f64],
    g_slice: &'a (dyn Fn(usize, &[f64], &mut [f64]) + Sync),
}

impl RowSource for SliceSource<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    // Terminal data is placed directly into the starting state.
    fn inject(&self, _i: usize, _r: usize, _out: &mut [f64]) -> bool {
        false
    }

    fn driver_needs_zeta(&self) -> bool {
        true
    }

    fn driver(&self, _i: usize, k: usize, zeta: Option<&[f64]>, out: &mut [f64]) -> bool {
        (self.g_slice)(k, zeta.expect("zeta requested"), out);
        true
    }
}

/// Backward recursion `eta(t, T) = free_term`,
/// `eta(t, s_k) = E_k[eta(t, s_{k+1})] + E_k[g_slice(s_k, zeta(t, s_k))] dt`.
///
/// `g_slice(k, zeta, out)` must be `F_{s_k}`-measurable given an `F_{s_k}`-measurable `zeta`.
pub fn solve_parameterized_bsde(
    ens: &BrownianEnsemble,
    t_node: usize,
    free_term: &[f64],
    dim: usize,
    g_slice: &(dyn Fn(usize, &[f64], &mut [f64]) + Sync),
    basis: BasisConfig,
) -> Result<ParameterizedSolution> {
    let grid = *ens.grid();
    if t_node > grid.n_steps() {
        return invalid(format!("node {t_node} beyond the grid"));
    }
    if dim == 0 || free_term.len() != ens.n_paths() * dim {
        return invalid("free term length must be n_paths * dim");
    }
    let reg = Regressor::new(ens, basis)?;
    let src = SliceSource {
        dim,
        terminal: free_term,
        g_slice,
    };
    let mut state = RowState {
        i: t_node,
        node: grid.n_steps(),
        eta: src.terminal.to_vec(),
        coeffs: None,
        z: vec![crate::stochastic::Cell::Zero; grid.n_steps()],
    };
    let mut eta = PathProcess::zeros(grid, ens.n_paths(), dim);
    let mut zeta = PathProcess::zeros(grid, ens.n_paths(), dim);
    state.advance(
        &reg,
        &src,
        t_node,
        Some(Trace {
            eta: &mut eta,
            zeta: &mut zeta,
        }),
    );
    Ok(ParameterizedSolution { t_node, eta, zeta })
}
