use super::brownian::BrownianEnsemble;
use super::grid::TimeGrid;
use crate::error::{invalid, Result};

/// One-parameter process sampled on the grid, stored as `[node][path][component]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathProcess {
    grid: TimeGrid,
    n_paths: usize,
    dim: usize,
    values: Vec<f64>,
}

impl PathProcess {
    pub fn zeros(grid: TimeGrid, n_paths: usize, dim: usize) -> Self {
        Self {
            grid,
            n_paths,
            dim,
            values: vec![0.0; grid.n_nodes() * n_paths * dim],
        }
    }

    pub fn from_values(grid: TimeGrid, n_paths: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return invalid("state dimension must be positive");
        }
        if values.len() != grid.n_nodes() * n_paths * dim {
            return invalid(format!(
                "process needs {} values, got {}",
                grid.n_nodes() * n_paths * dim,
                values.len()
            ));
        }
        Ok(Self {
            grid,
            n_paths,
            dim,
            values,
        })
    }

    /// Evaluates `f(node, w_node, out)` on every node of the ensemble; `out` holds `n_paths * dim`.
    pub fn from_fn<F>(ens: &BrownianEnsemble, dim: usize, f: F) -> Self
    where
        F: Fn(usize, &BrownianEnsemble, &mut [f64]),
    {
        let mut p = Self::zeros(*ens.grid(), ens.n_paths(), dim);
        for k in 0..=ens.grid().n_steps() {
            f(k, ens, p.at_mut(k));
        }
        p
    }

    /// `W(t)` itself as a scalar process.
    pub fn brownian(ens: &BrownianEnsemble) -> Self {
        Self::from_fn(ens, 1, |k, e, out| out.copy_from_slice(e.w(k)))
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn stride(&self) -> usize {
        self.n_paths * self.dim
    }

    /// All paths at `node`, `n_paths * dim` values.
    pub fn at(&self, node: usize) -> &[f64] {
        let s = self.stride();
        &self.values[node * s..(node + 1) * s]
    }

    pub fn at_mut(&mut self, node: usize) -> &mut [f64] {
        let s = self.stride();
        &mut self.values[node * s..(node + 1) * s]
    }

    pub fn value(&self, path: usize, node: usize, comp: usize) -> f64 {
        self.values[node * self.stride() + path * self.dim + comp]
    }

    /// Checks that the process lives on the same grid and paths as `ens`.
    pub fn check_compatible(&self, ens: &BrownianEnsemble) -> Result<()> {
        if self.grid != *ens.grid() || self.n_paths != ens.n_paths() {
            return invalid("process and ensemble disagree on grid or path count");
        }
        Ok(())
    }

    /// Pointwise difference.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid || self.n_paths != other.n_paths || self.dim != other.dim {
            return invalid("processes have different shapes");
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            grid: self.grid,
            n_paths: self.n_paths,
            dim: self.dim,
            values,
        })
    }

    /// Root mean square over paths and components at `node`.
    pub fn rms_at(&self, node: usize) -> f64 {
        let v = self.at(node);
        (v.iter().map(|x| x * x).sum::<f64>() / self.n_paths as f64).sqrt()
    }

    /// Root mean square over paths of all nodes in `nodes`.
    pub fn rms_over(&self, nodes: impl Iterator<Item = usize>) -> f64 {
        let mut s = 0.0;
        let mut count = 0usize;
        for k in nodes {
            s += self.at(k).iter().map(|x| x * x).sum::<f64>();
            count += self.n_paths;
        }
        if count == 0 {
            0.0
        } else {
            (s / count as f64).sqrt()
        }
    }
}
