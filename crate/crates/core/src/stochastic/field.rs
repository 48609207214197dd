//! Two-parameter fields `Z(t_i, s_j)`.
//!
//! Labels follow the interval convention: `Z(i, j)` is the integrand on
//! `(s_{j-1}, s_j]`, measurable at node `j - 1`. The upper part `j > i` is what
//! adapted solutions carry; M-solutions add the lower part `1 <= j <= i`.

use std::ops::Range;

use super::brownian::BrownianEnsemble;
use super::features::{hermite, state_scale};
use super::grid::TimeGrid;
use super::process::PathProcess;
use crate::error::{invalid, Result};
use crate::par;

/// Largest polynomial degree a basis cell may carry.
pub const MAX_DEGREE: usize = 15;

/// Compact per-cell storage of a random variable measurable at one grid node.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Zero,
    /// Same value on every path.
    Const(Vec<f64>),
    /// Explicit per-path values, `[path][component]`.
    Dense(Vec<f64>),
    /// Hermite coefficients in the standardised state, `coeffs[c * (degree + 1) + b]`.
    Basis { degree: usize, coeffs: Vec<f64> },
}

impl Cell {
    /// Writes the values for `paths` into `out` (`paths.len() * dim` entries).
    pub fn eval_range(
        &self,
        ens: &BrownianEnsemble,
        node: usize,
        dim: usize,
        paths: Range<usize>,
        out: &mut [f64],
    ) {
        match self {
            Cell::Zero => out.fill(0.0),
            Cell::Const(v) => {
                for row in out.chunks_mut(dim) {
                    row.copy_from_slice(v);
                }
            }
            Cell::Dense(v) => out.copy_from_slice(&v[paths.start * dim..paths.end * dim]),
            Cell::Basis { degree, coeffs } => {
                let nb = degree + 1;
                let scale = state_scale(ens.grid(), node);
                let w = &ens.w(node)[paths];
                let mut h = [0.0; MAX_DEGREE + 1];
                for (row, &wp) in out.chunks_mut(dim).zip(w) {
                    hermite(wp * scale, *degree, &mut h);
                    for (c, o) in row.iter_mut().enumerate() {
                        let cf = &coeffs[c * nb..(c + 1) * nb];
                        *o = cf.iter().zip(&h[..nb]).map(|(a, b)| a * b).sum();
                    }
                }
            }
        }
    }

    /// Values on every path, `n_paths * dim` entries.
    pub fn eval(&self, ens: &BrownianEnsemble, node: usize, dim: usize, out: &mut [f64]) {
        let n = ens.n_paths();
        par::fill_rows(out, dim, |first, slab| {
            let len = slab.len() / dim;
            self.eval_range(ens, node, dim, first..first + len, slab);
        });
        debug_assert_eq!(out.len(), n * dim);
    }

    pub fn eval_vec(&self, ens: &BrownianEnsemble, node: usize, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; ens.n_paths() * dim];
        self.eval(ens, node, dim, &mut out);
        out
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Cell::Zero)
    }
}

fn upper_len(n: usize) -> usize {
    n * (n + 1) / 2
}

fn upper_index(n: usize, i: usize, j: usize) -> usize {
    i * n - i * i.saturating_sub(1) / 2 + (j - i - 1)
}

fn lower_index(i: usize, j: usize) -> usize {
    i * (i - 1) / 2 + (j - 1)
}

/// Read access shared by triangle and square fields.
pub trait Field {
    fn grid(&self) -> &TimeGrid;
    fn dim(&self) -> usize;
    /// Cell at `(i, j)` if the field stores it.
    fn lookup(&self, i: usize, j: usize) -> Option<&Cell>;
}

/// `Z(t_i, s_j)` for `j > i`.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleField {
    grid: TimeGrid,
    dim: usize,
    cells: Vec<Cell>,
}

impl TriangleField {
    pub fn zeros(grid: TimeGrid, dim: usize) -> Self {
        Self {
            grid,
            dim,
            cells: vec![Cell::Zero; upper_len(grid.n_steps())],
        }
    }

    /// Assembles the field from rows; row `i` holds cells `j = i+1..=n`.
    pub fn from_rows(grid: TimeGrid, dim: usize, rows: Vec<Vec<Cell>>) -> Result<Self> {
        let n = grid.n_steps();
        if rows.len() != n + 1 {
            return invalid(format!("expected {} rows, got {}", n + 1, rows.len()));
        }
        let mut cells = Vec::with_capacity(upper_len(n));
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n - i {
                return invalid(format!("row {i} has {} cells, expected {}", row.len(), n - i));
            }
            cells.extend(row);
        }
        Ok(Self { grid, dim, cells })
    }

    fn check(&self, i: usize, j: usize) -> Result<()> {
        let n = self.grid.n_steps();
        if j <= i || j > n {
            return invalid(format!("triangle cell ({i}, {j}) outside j > i, j <= {n}"));
        }
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> Result<&Cell> {
        self.check(i, j)?;
        Ok(&self.cells[upper_index(self.grid.n_steps(), i, j)])
    }

    pub fn set(&mut self, i: usize, j: usize, cell: Cell) -> Result<()> {
        self.check(i, j)?;
        let idx = upper_index(self.grid.n_steps(), i, j);
        self.cells[idx] = cell;
        Ok(())
    }

    /// Cells `j = i+1..=n` of row `i`.
    pub fn row(&self, i: usize) -> &[Cell] {
        let n = self.grid.n_steps();
        if i >= n {
            return &[];
        }
        let start = upper_index(n, i, i + 1);
        &self.cells[start..start + (n - i)]
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Values of `Z(i, j)` on every path.
    pub fn eval(&self, i: usize, j: usize, ens: &BrownianEnsemble, out: &mut [f64]) -> Result<()> {
        self.get(i, j)?.eval(ens, j - 1, self.dim, out);
        Ok(())
    }

    /// Row `i` as a left-point integrand: node `k >= i` carries `Z(i, k+1)`, other nodes are zero.
    pub fn row_integrand(&self, i: usize, ens: &BrownianEnsemble) -> PathProcess {
        let mut p = PathProcess::zeros(self.grid, ens.n_paths(), self.dim);
        for (off, cell) in self.row(i).iter().enumerate() {
            let k = i + off;
            cell.eval(ens, k, self.dim, p.at_mut(k));
        }
        p
    }
}

impl Field for TriangleField {
    fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn lookup(&self, i: usize, j: usize) -> Option<&Cell> {
        self.get(i, j).ok()
    }
}

/// `Z(t_i, s_j)` on the full square: the triangle plus `Z(i, j)` for `1 <= j <= i`.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareField {
    upper: TriangleField,
    lower: Vec<Cell>,
}

impl SquareField {
    pub fn zeros(grid: TimeGrid, dim: usize) -> Self {
        Self {
            upper: TriangleField::zeros(grid, dim),
            lower: vec![Cell::Zero; upper_len(grid.n_steps())],
        }
    }

    /// Combines a triangle with lower rows; lower row `i` holds cells `j = 1..=i`.
    pub fn from_parts(upper: TriangleField, lower_rows: Vec<Vec<Cell>>) -> Result<Self> {
        let n = upper.grid.n_steps();
        if lower_rows.len() != n + 1 {
            return invalid(format!("expected {} lower rows, got {}", n + 1, lower_rows.len()));
        }
        let mut lower = Vec::with_capacity(upper_len(n));
        for (i, row) in lower_rows.into_iter().enumerate() {
            if row.len() != i {
                return invalid(format!("lower row {i} has {} cells, expected {i}", row.len()));
            }
            lower.extend(row);
        }
        Ok(Self { upper, lower })
    }

    pub fn triangle(&self) -> &TriangleField {
        &self.upper
    }

    pub fn get(&self, i: usize, j: usize) -> Result<&Cell> {
        let n = self.upper.grid.n_steps();
        if j == 0 || j > n || i > n {
            return invalid(format!("square cell ({i}, {j}) outside 1 <= j <= {n}"));
        }
        if j > i {
            self.upper.get(i, j)
        } else {
            Ok(&self.lower[lower_index(i, j)])
        }
    }

    /// Cells `j = 1..=i` of row `i`.
    pub fn lower_row(&self, i: usize) -> &[Cell] {
        if i == 0 {
            return &[];
        }
        let start = lower_index(i, 1);
        &self.lower[start..start + i]
    }

    pub fn eval(&self, i: usize, j: usize, ens: &BrownianEnsemble, out: &mut [f64]) -> Result<()> {
        self.get(i, j)?.eval(ens, j - 1, self.upper.dim, out);
        Ok(())
    }

    /// Lower row `i` as a left-point integrand on `[0, t_i]`.
    pub fn lower_integrand(&self, i: usize, ens: &BrownianEnsemble) -> PathProcess {
        let dim = self.upper.dim;
        let mut p = PathProcess::zeros(self.upper.grid, ens.n_paths(), dim);
        for (k, cell) in self.lower_row(i).iter().enumerate() {
            cell.eval(ens, k, dim, p.at_mut(k));
        }
        p
    }
}

impl Field for SquareField {
    fn grid(&self) -> &TimeGrid {
        &self.upper.grid
    }
    fn dim(&self) -> usize {
        self.upper.dim
    }
    fn lookup(&self, i: usize, j: usize) -> Option<&Cell> {
        self.get(i, j).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::grid::make_grid;

    #[test]
    fn triangle_indexing_is_a_bijection() {
        let g = make_grid(1.0, 7).unwrap();
        let mut f = TriangleField::zeros(g, 1);
        for i in 0..=7 {
            for j in i + 1..=7 {
                f.set(i, j, Cell::Const(vec![(10 * i + j) as f64])).unwrap();
            }
        }
        for i in 0..=7 {
            for j in i + 1..=7 {
                assert_eq!(f.get(i, j).unwrap(), &Cell::Const(vec![(10 * i + j) as f64]));
            }
            assert_eq!(f.row(i).len(), 7 - i);
        }
    }

    #[test]
    fn triangle_rejects_diagonal_and_below() {
        let f = TriangleField::zeros(make_grid(1.0, 4).unwrap(), 1);
        assert!(f.get(2, 2).is_err());
        assert!(f.get(3, 1).is_err());
        assert!(f.get(0, 5).is_err());
    }

    #[test]
    fn square_restricts_to_triangle() {
        let g = make_grid(1.0, 4).unwrap();
        let mut t = TriangleField::zeros(g, 1);
        t.set(1, 3, Cell::Const(vec![2.0])).unwrap();
        let lower = (0..=4).map(|i| vec![Cell::Const(vec![-1.0]); i]).collect();
        let s = SquareField::from_parts(t.clone(), lower).unwrap();
        assert_eq!(s.get(1, 3).unwrap(), t.get(1, 3).unwrap());
        assert_eq!(s.get(3, 3).unwrap(), &Cell::Const(vec![-1.0]));
        assert!(s.get(3, 0).is_err());
        assert_eq!(s.triangle(), &t);
    }

    #[test]
    fn basis_cell_evaluates_polynomial() {
        let g = make_grid(1.0, 4).unwrap();
        let e = BrownianEnsemble::simulate(g, 100, 1).unwrap();
        // 1 + 2 x with x = W / sqrt(t).
        let cell = Cell::Basis {
            degree: 1,
            coeffs: vec![1.0, 2.0],
        };
        let v = cell.eval_vec(&e, 2, 1);
        for p in 0..100 {
            let x = e.w(2)[p] / 0.5f64.sqrt();
            assert!((v[p] - (1.0 + 2.0 * x)).abs() < 1e-12);
        }
    }
}
