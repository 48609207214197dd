//! Generators `g(t, s, y, z, zhat)` with measurability metadata, free terms, and the
//! split `g = g_0 + g_1` into an adapted part and an anticipating remainder.

use std::fmt;
use std::sync::Arc;

use crate::constants::LipschitzProfile;
use crate::error::{invalid, Result};
use crate::regression::{BasisConfig, Regressor};
use crate::stochastic::{BrownianEnsemble, PathProcess};

/// Whether `g(t, s, ...)` only reads the path up to `s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Measurability {
    Adapted,
    Anticipating,
}

/// Arguments of one batched generator evaluation; every slice holds `n_paths * dim` values.
pub struct GenInput<'a> {
    pub t_node: usize,
    pub s_node: usize,
    pub ensemble: &'a BrownianEnsemble,
    pub y: &'a [f64],
    pub z: &'a [f64],
    pub zhat: &'a [f64],
}

impl GenInput<'_> {
    pub fn t(&self) -> f64 {
        self.ensemble.grid().time(self.t_node)
    }

    pub fn s(&self) -> f64 {
        self.ensemble.grid().time(self.s_node)
    }
}

pub type EvalFn = dyn Fn(&GenInput<'_>, &mut [f64]) + Send + Sync;
/// `(t_node, s_node, n_steps) -> node` at which the generator value becomes measurable.
pub type NodeMap = dyn Fn(usize, usize, usize) -> usize + Send + Sync;

/// Batched evaluator plus the metadata solvers and certifiers need.
#[derive(Clone)]
pub struct GeneratorSpec {
    pub id: String,
    pub dim: usize,
    pub uses_y: bool,
    pub uses_z: bool,
    pub uses_zhat: bool,
    pub class: Measurability,
    pub profile: LipschitzProfile,
    eval: Arc<EvalFn>,
    measurable_at: Option<Arc<NodeMap>>,
    exact_adapted: Option<Arc<EvalFn>>,
}

impl fmt::Debug for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratorSpec")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .field("uses_y", &self.uses_y)
            .field("uses_z", &self.uses_z)
            .field("uses_zhat", &self.uses_zhat)
            .field("class", &self.class)
            .finish()
    }
}

impl GeneratorSpec {
    pub fn new(
        id: impl Into<String>,
        dim: usize,
        class: Measurability,
        profile: LipschitzProfile,
        eval: impl Fn(&GenInput<'_>, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            id: id.into(),
            dim,
            uses_y: false,
            uses_z: false,
            uses_zhat: false,
            class,
            profile,
            eval: Arc::new(eval),
            measurable_at: None,
            exact_adapted: None,
        }
    }

    /// Declares which arguments the evaluator reads.
    pub fn reads(mut self, y: bool, z: bool, zhat: bool) -> Self {
        self.uses_y = y;
        self.uses_z = z;
        self.uses_zhat = zhat;
        self
    }

    /// Node at which an anticipating value becomes known (default: the last node).
    pub fn with_measurable_at(mut self, f: impl Fn(usize, usize, usize) -> usize + Send + Sync + 'static) -> Self {
        self.measurable_at = Some(Arc::new(f));
        self
    }

    /// Closed-form `E_s[g]` used as a test oracle.
    pub fn with_exact_adapted(mut self, f: impl Fn(&GenInput<'_>, &mut [f64]) + Send + Sync + 'static) -> Self {
        self.exact_adapted = Some(Arc::new(f));
        self
    }

    /// The zero generator.
    pub fn zero(dim: usize, horizon: f64) -> Self {
        Self::new("zero", dim, Measurability::Adapted, LipschitzProfile::adapted(horizon, 0.0, 0.0, 0.0), |_, out| {
            out.fill(0.0)
        })
    }

    pub fn evaluate(&self, input: &GenInput<'_>, out: &mut [f64]) {
        (self.eval)(input, out)
    }

    pub fn has_exact_adapted(&self) -> bool {
        self.exact_adapted.is_some()
    }

    /// Writes the closed-form `E_s[g]` if one is registered.
    pub fn exact_adapted(&self, input: &GenInput<'_>, out: &mut [f64]) -> bool {
        match &self.exact_adapted {
            Some(f) => {
                f(input, out);
                true
            }
            None => false,
        }
    }

    /// Node at which `g(t_i, s_k, ...)` evaluated on adapted arguments is measurable.
    pub fn measurable_node(&self, t_node: usize, s_node: usize, n_steps: usize) -> usize {
        match self.class {
            Measurability::Adapted => s_node,
            Measurability::Anticipating => match &self.measurable_at {
                Some(f) => f(t_node, s_node, n_steps).clamp(s_node, n_steps),
                None => n_steps,
            },
        }
    }

    /// `a g + b h`; the profile of `self` scaled by `|a| + |b|` is kept as metadata only.
    pub fn linear_combination(a: f64, g: &GeneratorSpec, b: f64, h: &GeneratorSpec) -> Result<Self> {
        if g.dim != h.dim {
            return invalid("generators have different dimensions");
        }
        let (g2, h2) = (g.clone(), h.clone());
        let class = if g.class == Measurability::Adapted && h.class == Measurability::Adapted {
            Measurability::Adapted
        } else {
            Measurability::Anticipating
        };
        Ok(Self::new(format!("{a}*{}+{b}*{}", g.id, h.id), g.dim, class, g.profile.clone(), move |inp, out| {
            let mut tmp = vec![0.0; out.len()];
            g2.evaluate(inp, out);
            h2.evaluate(inp, &mut tmp);
            for (o, t) in out.iter_mut().zip(tmp) {
                *o = a * *o + b * t;
            }
        })
        .reads(g.uses_y || h.uses_y, g.uses_z || h.uses_z, g.uses_zhat || h.uses_zhat))
    }
}

/// Node at which a free term `psi(t_i)` becomes measurable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FreeTermNode {
    /// Only `F_T`-measurable.
    Terminal,
    /// `F_{t_i}`-measurable.
    Parameter,
}

pub type FreeTermFn = dyn Fn(usize, &BrownianEnsemble, &mut [f64]) + Send + Sync;

/// `psi(t_i)` evaluated on all paths.
#[derive(Clone)]
pub struct FreeTerm {
    pub dim: usize,
    pub node: FreeTermNode,
    eval: Arc<FreeTermFn>,
}

impl fmt::Debug for FreeTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FreeTerm")
            .field("dim", &self.dim)
            .field("node", &self.node)
            .finish()
    }
}

impl FreeTerm {
    pub fn new(
        dim: usize,
        node: FreeTermNode,
        f: impl Fn(usize, &BrownianEnsemble, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            node,
            eval: Arc::new(f),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, FreeTermNode::Parameter, |_, _, out| out.fill(0.0))
    }

    /// Free term read from stored values; node `i` of `process` holds `psi(t_i)`.
    pub fn from_process(process: PathProcess, node: FreeTermNode) -> Self {
        let dim = process.dim();
        let p = Arc::new(process);
        Self::new(dim, node, move |i, _, out| out.copy_from_slice(p.at(i)))
    }

    pub fn evaluate(&self, t_node: usize, ens: &BrownianEnsemble, out: &mut [f64]) {
        (self.eval)(t_node, ens, out)
    }

    pub fn measurable_node(&self, t_node: usize, n_steps: usize) -> usize {
        match self.node {
            FreeTermNode::Terminal => n_steps,
            FreeTermNode::Parameter => t_node,
        }
    }

    /// `psi + eps * phi`.
    pub fn perturbed(&self, eps: f64, phi: &FreeTerm) -> Result<Self> {
        if self.dim != phi.dim {
            return invalid("free terms have different dimensions");
        }
        let node = if self.node == FreeTermNode::Terminal || phi.node == FreeTermNode::Terminal {
            FreeTermNode::Terminal
        } else {
            FreeTermNode::Parameter
        };
        let (a, b) = (self.clone(), phi.clone());
        Ok(Self::new(self.dim, node, move |i, e, out| {
            a.evaluate(i, e, out);
            let mut tmp = vec![0.0; out.len()];
            b.evaluate(i, e, &mut tmp);
            for (o, t) in out.iter_mut().zip(tmp) {
                *o += eps * t;
            }
        }))
    }
}

/// Pathwise values of `g`, its regression estimate `g_1 = E_s[g]` and `g_0 = g - g_1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitValues {
    pub g: Vec<f64>,
    pub g1_coeffs: Vec<f64>,
    pub g1: Vec<f64>,
    pub g0: Vec<f64>,
}

/// A generator paired with the regression that defines its adapted part.
pub struct DecomposedGenerator<'a> {
    spec: GeneratorSpec,
    reg: Regressor<'a>,
}

impl<'a> DecomposedGenerator<'a> {
    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    pub fn basis(&self) -> BasisConfig {
        self.reg.basis()
    }

    pub fn regressor(&self) -> &Regressor<'a> {
        &self.reg
    }

    /// Splits `g` at frozen arguments.
    pub fn split(&self, input: &GenInput<'_>) -> SplitValues {
        let mut g = vec![0.0; self.reg.ensemble().n_paths() * self.spec.dim];
        self.spec.evaluate(input, &mut g);
        split_values(&self.reg, input.s_node, g, self.spec.dim)
    }
}

/// Splits pathwise values measured against `F_{s_node}`.
pub fn split_values(reg: &Regressor<'_>, s_node: usize, g: Vec<f64>, dim: usize) -> SplitValues {
    let g1_coeffs = reg.project(s_node, &g, dim);
    let mut g1 = vec![0.0; g.len()];
    reg.evaluate(s_node, &g1_coeffs, dim, &mut g1);
    let g0 = g.iter().zip(&g1).map(|(a, b)| a - b).collect();
    SplitValues {
        g,
        g1_coeffs,
        g1,
        g0,
    }
}

/// Builds the regression-based split of `g` on `ens`.
pub fn decompose<'a>(g: &GeneratorSpec, ens: &'a BrownianEnsemble, basis: BasisConfig) -> Result<DecomposedGenerator<'a>> {
    Ok(DecomposedGenerator {
        spec: g.clone(),
        reg: Regressor::new(ens, basis)?,
    })
}

/// Result of the future-resampling measurability test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptednessReport {
    pub node: usize,
    pub max_deviation: f64,
    pub adapted: bool,
}

/// Deviations at or below this count as measurable.
pub const ADAPTED_TOLERANCE: f64 = 1e-12;

/// Evaluates `f` on `ens` and on a copy whose increments after `node` are redrawn.
pub fn verify_measurability(
    f: impl Fn(&BrownianEnsemble) -> Vec<f64>,
    ens: &BrownianEnsemble,
    node: usize,
    seed: u64,
) -> AdaptednessReport {
    let other = ens.resample_after(node, seed);
    let a = f(ens);
    let b = f(&other);
    let max_deviation = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    AdaptednessReport {
        node,
        max_deviation,
        adapted: max_deviation <= ADAPTED_TOLERANCE,
    }
}

/// Re-evaluates `g(t, s, ...)` at adapted probe arguments after resampling the future of `s`.
///
/// Probes are `y = W(s)`, `z = W(s) / 2`, `zhat = W(t)`.
pub fn verify_adaptedness(g: &GeneratorSpec, ens: &BrownianEnsemble, t_node: usize, s_node: usize, seed: u64) -> Result<AdaptednessReport> {
    if t_node > s_node || s_node > ens.grid().n_steps() {
        return invalid(format!("nodes ({t_node}, {s_node}) outside the triangle"));
    }
    let dim = g.dim;
    Ok(verify_measurability(
        |e| {
            let spread = |v: &[f64], scale: f64| -> Vec<f64> {
                v.iter().flat_map(|w| std::iter::repeat_n(w * scale, dim)).collect()
            };
            let y = spread(e.w(s_node), 1.0);
            let z = spread(e.w(s_node), 0.5);
            let zhat = spread(e.w(t_node), 1.0);
            let input = GenInput {
                t_node,
                s_node,
                ensemble: e,
                y: &y,
                z: &z,
                zhat: &zhat,
            };
            let mut out = vec![0.0; e.n_paths() * dim];
            g.evaluate(&input, &mut out);
            out
        },
        ens,
        s_node,
        seed,
    ))
}
