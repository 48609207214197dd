//! Grids, Brownian ensembles, discrete integrals and random-field storage.

mod brownian;
pub mod export;
mod features;
mod field;
mod grid;
mod integrals;
mod process;

pub use brownian::BrownianEnsemble;
pub use features::{feature_count, hermite, node_degree, state_scale};
pub use field::{Cell, Field, SquareField, TriangleField, MAX_DEGREE};
pub use grid::{make_grid, TimeGrid};
pub use integrals::{ito_integral, lebesgue_integral, martingale_moment_ratio, MomentRatio};
pub use process::PathProcess;

/// Simulates the shared Brownian paths for a run.
pub fn simulate_brownian(grid: TimeGrid, n_paths: usize, seed: u64) -> crate::Result<BrownianEnsemble> {
    BrownianEnsemble::simulate(grid, n_paths, seed)
}
