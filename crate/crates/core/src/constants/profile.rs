use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};

/// Nonnegative deterministic function `L(t, s)` on the triangle `0 <= t <= s <= T`.
#[derive(Clone)]
pub enum ProfileFn {
    Const(f64),
    /// `sum_m a_m (s - t)^m`.
    Poly(Vec<f64>),
    /// Values on a rectangular `(t, s)` grid, bilinearly interpolated and clamped.
    Table(Arc<TabulatedProfile>),
    Closure(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for ProfileFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfileFn::Const(c) => write!(f, "Const({c})"),
            ProfileFn::Poly(a) => write!(f, "Poly({a:?})"),
            ProfileFn::Table(t) => write!(f, "Table({}x{})", t.t.len(), t.s.len()),
            ProfileFn::Closure(_) => write!(f, "Closure"),
        }
    }
}

impl Default for ProfileFn {
    fn default() -> Self {
        ProfileFn::Const(0.0)
    }
}

impl ProfileFn {
    pub fn closure(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        ProfileFn::Closure(Arc::new(f))
    }

    pub fn eval(&self, t: f64, s: f64) -> f64 {
        match self {
            ProfileFn::Const(c) => *c,
            ProfileFn::Poly(a) => {
                let x = s - t;
                a.iter().rev().fold(0.0, |acc, c| acc * x + c)
            }
            ProfileFn::Table(tab) => tab.eval(t, s),
            ProfileFn::Closure(f) => f(t, s),
        }
    }

    /// `lambda * L`.
    pub fn scaled(&self, lambda: f64) -> Self {
        match self {
            ProfileFn::Const(c) => ProfileFn::Const(lambda * c),
            ProfileFn::Poly(a) => ProfileFn::Poly(a.iter().map(|c| lambda * c).collect()),
            other => {
                let inner = other.clone();
                ProfileFn::closure(move |t, s| lambda * inner.eval(t, s))
            }
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        match self {
            ProfileFn::Const(c) => *c == 0.0,
            ProfileFn::Poly(a) => a.iter().all(|c| *c == 0.0),
            ProfileFn::Table(t) => t.values.iter().all(|v| *v == 0.0),
            ProfileFn::Closure(_) => false,
        }
    }

    /// Human-readable descriptor used in reports.
    pub fn describe(&self) -> String {
        match self {
            ProfileFn::Const(c) => format!("{c}"),
            ProfileFn::Poly(a) => {
                let parts: Vec<String> = a.iter().map(|c| c.to_string()).collect();
                format!("poly:{}", parts.join(","))
            }
            ProfileFn::Table(t) => format!("table:{}x{}", t.t.len(), t.s.len()),
            ProfileFn::Closure(_) => "closure".into(),
        }
    }
}

/// Profile sampled on a tensor grid.
#[derive(Clone, Debug)]
pub struct TabulatedProfile {
    t: Vec<f64>,
    s: Vec<f64>,
    values: Vec<f64>,
}

fn bracket(x: f64, nodes: &[f64]) -> (usize, f64) {
    if nodes.len() == 1 || x <= nodes[0] {
        return (0, 0.0);
    }
    let last = nodes.len() - 1;
    if x >= nodes[last] {
        return (last - 1, 1.0);
    }
    let i = nodes.partition_point(|&v| v <= x) - 1;
    (i, (x - nodes[i]) / (nodes[i + 1] - nodes[i]))
}

impl TabulatedProfile {
    /// `values` is row-major over `t` then `s`.
    pub fn new(t: Vec<f64>, s: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if t.is_empty() || s.is_empty() || values.len() != t.len() * s.len() {
            return invalid("tabulated profile shape mismatch");
        }
        if !t.windows(2).all(|w| w[1] > w[0]) || !s.windows(2).all(|w| w[1] > w[0]) {
            return invalid("tabulated profile axes must increase strictly");
        }
        if values.iter().any(|v| !(*v >= 0.0)) {
            return invalid("profile values must be nonnegative");
        }
        Ok(Self { t, s, values })
    }

    pub fn eval(&self, t: f64, s: f64) -> f64 {
        let ns = self.s.len();
        let (i, a) = bracket(t, &self.t);
        let (j, b) = bracket(s, &self.s);
        let at = |r: usize, c: usize| self.values[r.min(self.t.len() - 1) * ns + c.min(ns - 1)];
        let v0 = at(i, j) * (1.0 - b) + at(i, j + 1) * b;
        let v1 = at(i + 1, j) * (1.0 - b) + at(i + 1, j + 1) * b;
        v0 * (1.0 - a) + v1 * a
    }
}

/// The four Lipschitz/growth profiles of one part of the generator.
#[derive(Clone, Debug, Default)]
pub struct LipschitzParts {
    pub l0: ProfileFn,
    pub ly: ProfileFn,
    pub lz: ProfileFn,
    pub lzhat: ProfileFn,
}

/// Lipschitz data of a generator split as `g = g_0 + g_1`; `parts[0]` describes the
/// anticipating remainder `g_0`, `parts[1]` the adapted part `g_1`.
#[derive(Clone, Debug)]
pub struct LipschitzProfile {
    pub horizon: f64,
    pub p: f64,
    pub eps: f64,
    /// Martingale moment constant `K_p`; exactly 1 at `p = 2`.
    pub kp: f64,
    pub parts: [LipschitzParts; 2],
}

/// Which profile entry a builder call sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    L0,
    Ly,
    Lz,
    Lzhat,
}

impl Component {
    pub const ALL: [Component; 4] = [Component::L0, Component::Ly, Component::Lz, Component::Lzhat];

    pub fn key(self, part: usize) -> String {
        let base = match self {
            Component::L0 => "l0",
            Component::Ly => "ly",
            Component::Lz => "lz",
            Component::Lzhat => "lzhat",
        };
        format!("{base}{part}")
    }
}

impl LipschitzParts {
    pub fn get(&self, c: Component) -> &ProfileFn {
        match c {
            Component::L0 => &self.l0,
            Component::Ly => &self.ly,
            Component::Lz => &self.lz,
            Component::Lzhat => &self.lzhat,
        }
    }

    fn get_mut(&mut self, c: Component) -> &mut ProfileFn {
        match c {
            Component::L0 => &mut self.l0,
            Component::Ly => &mut self.ly,
            Component::Lz => &mut self.lz,
            Component::Lzhat => &mut self.lzhat,
        }
    }
}

/// Collects profile components; `lz` of both parts must be given explicitly.
#[derive(Clone, Debug)]
pub struct ProfileBuilder {
    horizon: f64,
    p: f64,
    eps: f64,
    kp: Option<f64>,
    parts: [[Option<ProfileFn>; 4]; 2],
}

fn component_index(c: Component) -> usize {
    Component::ALL.iter().position(|x| *x == c).unwrap()
}

impl ProfileBuilder {
    pub fn p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn kp(mut self, kp: f64) -> Self {
        self.kp = Some(kp);
        self
    }

    pub fn set(mut self, part: usize, c: Component, f: ProfileFn) -> Self {
        self.parts[part][component_index(c)] = Some(f);
        self
    }

    pub fn build(self) -> Result<LipschitzProfile> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return invalid("profile horizon must be positive");
        }
        if !(self.p > 1.0) {
            return invalid(format!("p must exceed 1, got {}", self.p));
        }
        if !(self.eps > 0.0) {
            return invalid(format!("epsilon must be positive, got {}", self.eps));
        }
        let kp = match self.kp {
            Some(k) => k,
            None if self.p == 2.0 => 1.0,
            None => return invalid("K_p must be supplied for p != 2"),
        };
        let mut parts: [LipschitzParts; 2] = Default::default();
        for (i, slots) in self.parts.into_iter().enumerate() {
            for (c, slot) in Component::ALL.into_iter().zip(slots) {
                match slot {
                    Some(f) => *parts[i].get_mut(c) = f,
                    None if c == Component::Lz => {
                        return invalid(format!("missing profile component {}", c.key(i)))
                    }
                    None => {}
                }
            }
        }
        Ok(LipschitzProfile {
            horizon: self.horizon,
            p: self.p,
            eps: self.eps,
            kp,
            parts,
        })
    }
}

impl LipschitzProfile {
    pub fn builder(horizon: f64) -> ProfileBuilder {
        ProfileBuilder {
            horizon,
            p: 2.0,
            eps: 0.5,
            kp: None,
            parts: Default::default(),
        }
    }

    /// Constant profile of an adapted generator (`g_0 = 0`).
    pub fn adapted(horizon: f64, ly: f64, lz: f64, lzhat: f64) -> Self {
        Self::constant(horizon, [0.0; 4], [0.0, ly, lz, lzhat])
    }

    /// Constant profiles `[l0, ly, lz, lzhat]` for `g_0` and `g_1`.
    pub fn constant(horizon: f64, g0: [f64; 4], g1: [f64; 4]) -> Self {
        let mut b = Self::builder(horizon);
        for (part, vals) in [(0, g0), (1, g1)] {
            for (c, v) in Component::ALL.into_iter().zip(vals) {
                b = b.set(part, c, ProfileFn::Const(v));
            }
        }
        b.build().expect("constant profile is complete")
    }

    /// Same profile with `L_z^1` multiplied by `lambda`.
    pub fn with_scaled_lz1(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        out.parts[1].lz = self.parts[1].lz.scaled(lambda);
        out
    }
}
