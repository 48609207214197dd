use super::BsvieSolution;
use crate::error::Result;
use crate::par;
use crate::regression::{relative_gap, representation_cells, BasisConfig, Regressor};
use crate::stochastic::{BrownianEnsemble, Cell, PathProcess, SquareField};

/// Square field of an M-solution plus the per-node reconstruction error.
#[derive(Clone, Debug)]
pub struct MExtension {
    pub square: SquareField,
    pub reconstruction_error: Vec<f64>,
}

/// Lower rows `Z(i, j)`, `1 <= j <= i`, from the martingale representation of `Y(t_i)`.
pub(crate) fn extend_lower(reg: &Regressor<'_>, y: &PathProcess) -> Vec<Vec<Cell>> {
    let n = y.grid().n_steps();
    par::map(n + 1, |i| representation_cells(reg, y.at(i), y.dim(), i))
}

/// Relative error of `Y_i - E[Y_i] - sum_{k<i} Z(i, k+1) dW_k` for every node.
pub(crate) fn reconstruction_errors(ens: &BrownianEnsemble, y: &PathProcess, sq: &SquareField) -> Vec<f64> {
    let n = y.grid().n_steps();
    let dim = y.dim();
    par::map(n + 1, |i| {
        let mut stoch = vec![0.0; ens.n_paths() * dim];
        let mut buf = vec![0.0; ens.n_paths() * dim];
        for (k, cell) in sq.lower_row(i).iter().enumerate() {
            cell.eval(ens, k, dim, &mut buf);
            for (p, d) in ens.dw(k).iter().enumerate() {
                for c in 0..dim {
                    stoch[p * dim + c] += buf[p * dim + c] * d;
                }
            }
        }
        relative_gap(y.at(i), &stoch, dim, ens.n_paths())
    })
}

/// Extends an adapted solution to the full square.
pub fn m_extend(sol: &BsvieSolution, basis: BasisConfig, ens: &BrownianEnsemble) -> Result<MExtension> {
    sol.y.check_compatible(ens)?;
    let reg = Regressor::new(ens, basis)?;
    let square = SquareField::from_parts(sol.z.triangle().clone(), extend_lower(&reg, &sol.y))?;
    let reconstruction_error = reconstruction_errors(ens, &sol.y, &square);
    Ok(MExtension {
        square,
        reconstruction_error,
    })
}
