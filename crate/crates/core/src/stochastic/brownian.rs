use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::grid::TimeGrid;
use crate::error::{invalid, Result};
use crate::par;

/// A family of discretised Brownian paths shared by every computation of a run.
///
/// Storage is node-major: `dw(k)[p]` is the increment of path `p` over step `k`
/// and `w(k)[p]` is `W(t_k)`.
#[derive(Clone, Debug)]
pub struct BrownianEnsemble {
    grid: TimeGrid,
    n_paths: usize,
    seed: u64,
    increments: Vec<f64>,
    w: Vec<f64>,
}

fn path_stream(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Draws `steps` increments of variance `dt` for each path, returned node-major.
fn draw_increments(n_paths: usize, steps: usize, dt: f64, seed: u64) -> Vec<f64> {
    let sd = dt.sqrt();
    let ranges: Vec<_> = (0..n_paths.div_ceil(par::CHUNK))
        .map(|c| c * par::CHUNK..((c + 1) * par::CHUNK).min(n_paths))
        .collect();
    let blocks = par::map_items(&ranges, |r| {
        let mut block = Vec::with_capacity(r.len() * steps);
        for p in r.clone() {
            let mut rng = path_stream(seed, p);
            for _ in 0..steps {
                let z: f64 = StandardNormal.sample(&mut rng);
                block.push(z * sd);
            }
        }
        block
    });
    let mut out = vec![0.0; n_paths * steps];
    for (r, block) in ranges.iter().zip(blocks) {
        for (local, p) in r.clone().enumerate() {
            for k in 0..steps {
                out[k * n_paths + p] = block[local * steps + k];
            }
        }
    }
    out
}

fn cumulate(n_steps: usize, n_paths: usize, increments: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; (n_steps + 1) * n_paths];
    for k in 0..n_steps {
        let (done, rest) = w.split_at_mut((k + 1) * n_paths);
        let prev = &done[k * n_paths..];
        let dw = &increments[k * n_paths..(k + 1) * n_paths];
        for ((next, &a), &d) in rest[..n_paths].iter_mut().zip(prev).zip(dw) {
            *next = a + d;
        }
    }
    w
}

impl BrownianEnsemble {
    /// Simulates `n_paths` paths; path `p` uses its own ChaCha substream of `seed`.
    pub fn simulate(grid: TimeGrid, n_paths: usize, seed: u64) -> Result<Self> {
        if n_paths == 0 {
            return invalid("ensemble needs at least one path");
        }
        let increments = draw_increments(n_paths, grid.n_steps(), grid.dt(), seed);
        Self::from_increments(grid, n_paths, seed, increments)
    }

    /// Builds an ensemble from node-major increments (`n_steps * n_paths` values).
    pub fn from_increments(
        grid: TimeGrid,
        n_paths: usize,
        seed: u64,
        increments: Vec<f64>,
    ) -> Result<Self> {
        if n_paths == 0 {
            return invalid("ensemble needs at least one path");
        }
        if increments.len() != grid.n_steps() * n_paths {
            return invalid(format!(
                "expected {} increments, got {}",
                grid.n_steps() * n_paths,
                increments.len()
            ));
        }
        let w = cumulate(grid.n_steps(), n_paths, &increments);
        Ok(Self {
            grid,
            n_paths,
            seed,
            increments,
            w,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `W(t_node)` for every path.
    pub fn w(&self, node: usize) -> &[f64] {
        &self.w[node * self.n_paths..(node + 1) * self.n_paths]
    }

    /// Increment over `[t_step, t_{step+1}]` for every path.
    pub fn dw(&self, step: usize) -> &[f64] {
        &self.increments[step * self.n_paths..(step + 1) * self.n_paths]
    }

    /// Copy of the ensemble whose increments at steps `>= node` are redrawn from `seed`.
    ///
    /// Everything measurable at `t_node` is unchanged.
    pub fn resample_after(&self, node: usize, seed: u64) -> Self {
        let n = self.grid.n_steps();
        let node = node.min(n);
        let fresh = draw_increments(self.n_paths, n - node, self.grid.dt(), seed);
        let mut increments = self.increments.clone();
        increments[node * self.n_paths..].copy_from_slice(&fresh);
        Self::from_increments(self.grid, self.n_paths, self.seed, increments)
            .expect("same shape as the parent ensemble")
    }

    /// Same paths observed on a grid with `factor` times fewer steps.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        let grid = self.grid.coarsen(factor)?;
        let p = self.n_paths;
        let mut increments = vec![0.0; grid.n_steps() * p];
        for k in 0..grid.n_steps() {
            let out = &mut increments[k * p..(k + 1) * p];
            for q in 0..factor {
                for (o, d) in out.iter_mut().zip(self.dw(k * factor + q)) {
                    *o += d;
                }
            }
        }
        Self::from_increments(grid, p, self.seed, increments)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::grid::make_grid;

    #[test]
    fn starts_at_zero_and_telescopes() {
        let e = BrownianEnsemble::simulate(make_grid(1.0, 10).unwrap(), 257, 3).unwrap();
        assert!(e.w(0).iter().all(|&x| x == 0.0));
        for p in 0..257 {
            let s: f64 = (0..10).map(|k| e.dw(k)[p]).sum();
            assert!((s - e.w(10)[p]).abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let g = make_grid(1.0, 8).unwrap();
        let a = BrownianEnsemble::simulate(g, 5000, 11).unwrap();
        let b = BrownianEnsemble::simulate(g, 5000, 11).unwrap();
        assert_eq!(a.increments, b.increments);
        let c = BrownianEnsemble::simulate(g, 5000, 12).unwrap();
        assert_ne!(a.increments, c.increments);
    }

    #[test]
    fn path_substreams_do_not_depend_on_ensemble_size() {
        let g = make_grid(1.0, 8).unwrap();
        let small = BrownianEnsemble::simulate(g, 10, 5).unwrap();
        let large = BrownianEnsemble::simulate(g, 5000, 5).unwrap();
        for k in 0..8 {
            assert_eq!(small.dw(k), &large.dw(k)[..10]);
        }
    }

    #[test]
    fn terminal_moments() {
        let e = BrownianEnsemble::simulate(make_grid(1.0, 20).unwrap(), 100_000, 1).unwrap();
        let wt = e.w(20);
        let n = wt.len() as f64;
        let mean = wt.iter().sum::<f64>() / n;
        let var = wt.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 5.0 / n.sqrt());
        assert!((0.97..=1.03).contains(&var), "var = {var}");
    }

    #[test]
    fn resampling_keeps_the_past() {
        let e = BrownianEnsemble::simulate(make_grid(1.0, 10).unwrap(), 100, 9).unwrap();
        let r = e.resample_after(4, 99);
        for k in 0..4 {
            assert_eq!(e.dw(k), r.dw(k));
        }
        for k in 0..=4 {
            assert_eq!(e.w(k), r.w(k));
        }
        assert_ne!(e.dw(4), r.dw(4));
    }

    #[test]
    fn coarsening_sums_increments() {
        let e = BrownianEnsemble::simulate(make_grid(1.0, 12).unwrap(), 50, 2).unwrap();
        let c = e.coarsen(3).unwrap();
        assert_eq!(c.grid().n_steps(), 4);
        for k in 0..=4 {
            for p in 0..50 {
                assert!((c.w(k)[p] - e.w(3 * k)[p]).abs() < 1e-12);
            }
        }
        assert!(e.coarsen(5).is_err());
    }
}
