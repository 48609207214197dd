//! Type-I and Type-II solvers: Picard iteration over parameterised backward
//! recursions, M-extension, residual checks and the window-stepping reference solver.

mod extension;
mod norm;
mod parameterized;
mod picard;
mod residual;
pub(crate) mod row;
mod stepping;

use std::sync::Arc;

use crate::constants::WellPosednessCertificate;
use crate::regression::BasisConfig;
use crate::stochastic::{Cell, Field, PathProcess, SquareField, TimeGrid, TriangleField};

pub use extension::{m_extend, MExtension};
pub use norm::weighted_norm;
pub use parameterized::{solve_parameterized_bsde, ParameterizedSolution};
pub use picard::{solve_type1, solve_type2};
pub use residual::{residual, NodeResidual};
pub use stepping::{default_delta_steps, solve_adapted_stepping};

pub(crate) use extension::{extend_lower, reconstruction_errors};
pub(crate) use norm::{cell_diff, combine, contributions};
pub(crate) use picard::{check_lz_dt, FrozenGenerator};
pub(crate) use residual::{residual_with, row_residual};
pub(crate) use stepping::window_change;

/// Choice of the weight `beta` in the Picard norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BetaPolicy {
    Fixed(f64),
    /// Start at 0 and escalate through `{0, 1/T, 4/T}` whenever successive deltas stop shrinking.
    Auto,
}

/// Solver settings shared by every solver in the crate.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub p: f64,
    pub beta: BetaPolicy,
    pub max_picard: usize,
    pub tol: f64,
    /// Window length in grid steps for the stepping solvers (`None`: derived from the Lipschitz data).
    pub delta_steps: Option<usize>,
    pub basis: BasisConfig,
    /// Refuse to run when the certificate rejects the generator.
    pub strict: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            p: 2.0,
            beta: BetaPolicy::Auto,
            max_picard: 50,
            tol: 1e-4,
            delta_steps: None,
            basis: BasisConfig::default(),
            strict: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.tol > 0.0) {
            return crate::error::invalid("tol must be positive");
        }
        if self.max_picard == 0 {
            return crate::error::invalid("max_picard must be positive");
        }
        if self.delta_steps == Some(0) {
            return crate::error::invalid("delta_steps must be at least 1");
        }
        if let BetaPolicy::Fixed(b) = self.beta {
            if !(b >= 0.0) {
                return crate::error::invalid("beta must be nonnegative");
            }
        }
        if !(self.p > 1.0) {
            return crate::error::invalid("p must exceed 1");
        }
        self.basis.validate()
    }

    /// `beta` values the policy may visit, in order.
    pub fn beta_ladder(&self, horizon: f64) -> Vec<f64> {
        match self.beta {
            BetaPolicy::Fixed(b) => vec![b],
            BetaPolicy::Auto => vec![0.0, 1.0 / horizon, 4.0 / horizon],
        }
    }
}

/// `Z` of a solution: upper triangle for adapted solutions, full square for M-solutions.
#[derive(Clone, Debug, PartialEq)]
pub enum ZField {
    Triangle(TriangleField),
    Square(SquareField),
}

impl ZField {
    pub fn triangle(&self) -> &TriangleField {
        match self {
            ZField::Triangle(t) => t,
            ZField::Square(s) => s.triangle(),
        }
    }

    pub fn square(&self) -> Option<&SquareField> {
        match self {
            ZField::Triangle(_) => None,
            ZField::Square(s) => Some(s),
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        self.triangle().grid()
    }
}

impl Field for ZField {
    fn grid(&self) -> &TimeGrid {
        self.triangle().grid()
    }
    fn dim(&self) -> usize {
        self.triangle().dim()
    }
    fn lookup(&self, i: usize, j: usize) -> Option<&Cell> {
        match self {
            ZField::Triangle(t) => t.lookup(i, j),
            ZField::Square(s) => s.lookup(i, j),
        }
    }
}

/// One Picard sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct PicardRecord {
    pub iteration: usize,
    pub beta: f64,
    /// `||iterate_k - iterate_{k-1}||` in the weighted norm.
    pub delta: f64,
    pub relative_delta: f64,
    /// `delta_k / delta_{k-1}` at the same `beta`.
    pub ratio: Option<f64>,
}

/// Paired `(Y, Z)` with diagnostics.
#[derive(Clone, Debug)]
pub struct BsvieSolution {
    pub y: Arc<PathProcess>,
    /// `Y(t_i)` as cells: basis coefficients for `i < n`, explicit values at `T`.
    pub y_cells: Arc<Vec<Cell>>,
    pub z: Arc<ZField>,
    pub picard_history: Vec<PicardRecord>,
    pub beta: f64,
    pub tolerance: f64,
    pub residual: Vec<NodeResidual>,
    /// Per-node relative reconstruction error of the M-extension (Type-II only).
    pub reconstruction_error: Option<Vec<f64>>,
    pub certificate: Option<WellPosednessCertificate>,
    pub warnings: Vec<String>,
}

impl BsvieSolution {
    pub fn grid(&self) -> &TimeGrid {
        self.y.grid()
    }

    /// Largest per-node residual RMS.
    pub fn max_residual_rms(&self) -> f64 {
        self.residual.iter().map(|r| r.rms).fold(0.0, f64::max)
    }
}
