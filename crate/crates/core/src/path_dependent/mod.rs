//! Path-dependent Type-I equations, anticipated BSDEs and the counterexample demos.

mod anticipated;
mod demo;
mod windows;

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::stochastic::{BrownianEnsemble, PathProcess, TimeGrid};

pub use anticipated::{solve_anticipated_bsde, AnticipatedGenerator, AnticipatedInput, AnticipatedSolution, FutureForm};
pub use demo::{demo_no_adapted_solution, DemoCase, DemoReport, DEMO_HEADER};
pub use windows::{default_path_delta_steps, solve_path_dependent, solve_path_dependent_with_z};

/// Suffix view `{Y(r) : r >= s}` of a process.
#[derive(Clone, Copy)]
pub struct PathSegment<'a> {
    process: &'a PathProcess,
    start: usize,
}

impl<'a> PathSegment<'a> {
    pub fn new(process: &'a PathProcess, start: usize) -> Result<Self> {
        if start > process.grid().n_steps() {
            return invalid(format!("segment start {start} beyond the grid"));
        }
        Ok(Self { process, start })
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.process.grid().n_steps()
    }

    pub fn grid(&self) -> &TimeGrid {
        self.process.grid()
    }

    pub fn dim(&self) -> usize {
        self.process.dim()
    }

    /// Values at `node`, laid out `[path][component]`; `node` must lie in the segment.
    pub fn at(&self, node: usize) -> &'a [f64] {
        assert!(node >= self.start, "node {node} precedes the segment start {}", self.start);
        self.process.at(node)
    }

    pub fn value(&self, path: usize, node: usize, comp: usize) -> f64 {
        self.at(node)[path * self.dim() + comp]
    }

    /// `sup_{r >= s} |Y(r)|` on one path.
    pub fn sup_norm(&self, path: usize) -> f64 {
        let dim = self.dim();
        (self.start..=self.end())
            .map(|k| {
                let v = &self.at(k)[path * dim..(path + 1) * dim];
                v.iter().map(|x| x * x).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// Arguments of a path-dependent generator evaluation.
pub struct PathInput<'a> {
    pub t_node: usize,
    pub s_node: usize,
    pub ensemble: &'a BrownianEnsemble,
    pub segment: PathSegment<'a>,
    pub z: Option<&'a [f64]>,
}

impl PathInput<'_> {
    pub fn t(&self) -> f64 {
        self.ensemble.grid().time(self.t_node)
    }

    pub fn s(&self) -> f64 {
        self.ensemble.grid().time(self.s_node)
    }
}

pub type PathEvalFn = dyn Fn(&PathInput<'_>, &mut [f64]) + Send + Sync;
/// `(s_node, n_steps) -> last node` the generator reads at `s`.
pub type LookaheadFn = dyn Fn(usize, usize) -> usize + Send + Sync;

/// Generator `g(t, s, Y_s[, z])` reading the future path segment.
#[derive(Clone)]
pub struct PathGeneratorSpec {
    pub id: String,
    pub dim: usize,
    /// Lipschitz constant in the segment under the uniform norm.
    pub lipschitz: f64,
    /// Lipschitz constant in `z` (zero when `z` is not read).
    pub lz: f64,
    pub uses_z: bool,
    /// Declares `g(t, s, y_s, z)` to be `F_s`-measurable for every adapted `y`.
    pub adaptedness_condition: bool,
    /// Modulus of continuity in `t` (metadata).
    pub modulus: String,
    /// Bound on `|g(t, s, 0)|` (metadata).
    pub bound: String,
    lookahead: Option<Arc<LookaheadFn>>,
    eval: Arc<PathEvalFn>,
}

impl fmt::Debug for PathGeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PathGeneratorSpec")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .field("lipschitz", &self.lipschitz)
            .field("lz", &self.lz)
            .field("uses_z", &self.uses_z)
            .field("adaptedness_condition", &self.adaptedness_condition)
            .finish()
    }
}

impl PathGeneratorSpec {
    pub fn new(
        id: impl Into<String>,
        dim: usize,
        lipschitz: f64,
        eval: impl Fn(&PathInput<'_>, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            id: id.into(),
            dim,
            lipschitz,
            lz: 0.0,
            uses_z: false,
            adaptedness_condition: false,
            modulus: "rho(r) = r".into(),
            bound: "xi = 0".into(),
            lookahead: None,
            eval: Arc::new(eval),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new("zero", dim, 0.0, |_, out| out.fill(0.0)).with_lookahead(|s, _| s)
    }

    /// Marks the generator as reading `z` with Lipschitz constant `lz`.
    pub fn with_z(mut self, lz: f64) -> Self {
        self.uses_z = true;
        self.lz = lz;
        self
    }

    pub fn with_adaptedness_condition(mut self) -> Self {
        self.adaptedness_condition = true;
        self
    }

    /// Last node read at `s`; without it the whole tail up to `T` is assumed.
    pub fn with_lookahead(mut self, f: impl Fn(usize, usize) -> usize + Send + Sync + 'static) -> Self {
        self.lookahead = Some(Arc::new(f));
        self
    }

    pub fn with_metadata(mut self, modulus: impl Into<String>, bound: impl Into<String>) -> Self {
        self.modulus = modulus.into();
        self.bound = bound.into();
        self
    }

    pub fn evaluate(&self, input: &PathInput<'_>, out: &mut [f64]) {
        (self.eval)(input, out)
    }

    /// Node at which `g(t, s_node, Y_s)` becomes known along a stored trajectory.
    pub fn read_horizon(&self, s_node: usize, n_steps: usize) -> usize {
        match &self.lookahead {
            Some(f) => f(s_node, n_steps).clamp(s_node, n_steps),
            None => n_steps,
        }
    }
}

#[cfg(test)]
mod tests;
