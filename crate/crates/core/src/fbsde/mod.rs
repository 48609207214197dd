//! Parameterised coupled FBSDE families and their anticipating BSVIE form
//!
//! `X^t(s) = x^t + int_t^s b^t(r, Z^t(r)) dr`,
//! `Y^t(s) = xi^t X^t(T) + int_s^T g^t(r, Z^t(r)) dr - int_s^T Z^t(r) dW(r)`
//! is equivalent to the BSVIE with free term `xi^t x^t` and generator
//! `xi^t b^t(s, z) + g^t(s, z)`.

use std::fmt;
use std::sync::Arc;

use crate::constants::{LipschitzProfile, WellPosednessCertificate};
use crate::error::{invalid, Result};
use crate::generator::{FreeTerm, FreeTermNode, GeneratorSpec, Measurability};
use crate::par;
use crate::regression::Regressor;
use crate::solver::{residual, solve_type1, BsvieSolution, SolverConfig, ZField};
use crate::stochastic::{BrownianEnsemble, PathProcess};

/// `(t_node, ens, out)`: per-path values of an `F_t`- or `F_T`-measurable datum.
pub type DatumFn = dyn Fn(usize, &BrownianEnsemble, &mut [f64]) + Send + Sync;
/// `(t_node, r_node, ens, z, out)`: adapted coefficient in `z`.
pub type CoefficientFn = dyn Fn(usize, usize, &BrownianEnsemble, &[f64], &mut [f64]) + Send + Sync;

/// Coupling factor `xi^t`.
#[derive(Clone)]
pub enum Coupling {
    /// `xi^t = 0`: the family decouples into BSDEs.
    Zero,
    /// Scalar `F_T`-measurable factor with a declared sup bound.
    Terminal { eval: Arc<DatumFn>, bound: Option<f64> },
}

/// Adapted coefficient with its Lipschitz constant in `z`.
#[derive(Clone)]
pub struct Coefficient {
    pub lz: f64,
    eval: Arc<CoefficientFn>,
}

impl Coefficient {
    pub fn new(lz: f64, f: impl Fn(usize, usize, &BrownianEnsemble, &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        Self { lz, eval: Arc::new(f) }
    }

    pub fn zero() -> Self {
        Self::new(0.0, |_, _, _, _, out| out.fill(0.0))
    }

    /// `kappa * z`.
    pub fn linear(kappa: f64) -> Self {
        Self::new(kappa.abs(), move |_, _, _, z, out| {
            for (o, v) in out.iter_mut().zip(z) {
                *o = kappa * v;
            }
        })
    }

    pub fn evaluate(&self, t: usize, r: usize, ens: &BrownianEnsemble, z: &[f64], out: &mut [f64]) {
        (self.eval)(t, r, ens, z, out)
    }
}

/// Data `(x^t, xi^t, b^t, g^t)` of the family.
#[derive(Clone)]
pub struct FbsdeSpec {
    pub id: String,
    pub dim: usize,
    pub horizon: f64,
    x: Arc<DatumFn>,
    pub xi: Coupling,
    pub b: Coefficient,
    pub g: Coefficient,
}

impl fmt::Debug for FbsdeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FbsdeSpec")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .field("horizon", &self.horizon)
            .field("b_lz", &self.b.lz)
            .field("g_lz", &self.g.lz)
            .finish()
    }
}

impl FbsdeSpec {
    pub fn new(
        id: impl Into<String>,
        dim: usize,
        horizon: f64,
        x: impl Fn(usize, &BrownianEnsemble, &mut [f64]) + Send + Sync + 'static,
        xi: Coupling,
        b: Coefficient,
        g: Coefficient,
    ) -> Self {
        Self {
            id: id.into(),
            dim,
            horizon,
            x: Arc::new(x),
            xi,
            b,
            g,
        }
    }

    /// `x^t` on every path, laid out `[path][component]`.
    pub fn x(&self, t: usize, ens: &BrownianEnsemble, out: &mut [f64]) {
        (self.x)(t, ens, out)
    }

    /// `xi^t` per path (zeros when decoupled).
    pub fn xi_values(&self, t: usize, ens: &BrownianEnsemble) -> Vec<f64> {
        let mut v = vec![0.0; ens.n_paths()];
        if let Coupling::Terminal { eval, .. } = &self.xi {
            eval(t, ens, &mut v);
        }
        v
    }

    /// `sup |xi| * L_b * T`, the small-time quantity.
    pub fn small_time_constant(&self) -> f64 {
        match &self.xi {
            Coupling::Zero => 0.0,
            Coupling::Terminal { bound, .. } => bound.unwrap_or(f64::INFINITY) * self.b.lz * self.horizon,
        }
    }
}

fn scale_rows(values: &mut [f64], factor: &[f64], dim: usize) {
    for (row, f) in values.chunks_mut(dim).zip(factor) {
        for v in row {
            *v *= f;
        }
    }
}

/// Free term `xi^t x^t` and generator `xi^t b^t(s, z) + g^t(s, z)`.
///
/// With a coupling bounded by `B`, `L_z^0 = 2 B L_b` bounds `(xi - E_s[xi]) b_z` and
/// `L_z^1 = B L_b + L_g` bounds the adapted remainder.
pub fn induced_bsvie_generator(spec: &FbsdeSpec) -> Result<(FreeTerm, GeneratorSpec)> {
    let dim = spec.dim;
    let (bound, class) = match &spec.xi {
        Coupling::Zero => (0.0, Measurability::Adapted),
        Coupling::Terminal { bound: None, .. } => {
            return invalid("the coupling factor needs a declared sup bound");
        }
        Coupling::Terminal { bound: Some(b), .. } if !(*b >= 0.0 && b.is_finite()) => {
            return invalid("the coupling bound must be finite and nonnegative");
        }
        Coupling::Terminal { bound: Some(b), .. } => {
            let class = if spec.b.lz == 0.0 {
                Measurability::Adapted
            } else {
                Measurability::Anticipating
            };
            (*b, class)
        }
    };
    let profile = LipschitzProfile::constant(
        spec.horizon,
        [0.0, 0.0, 2.0 * bound * spec.b.lz, 0.0],
        [0.0, 0.0, bound * spec.b.lz + spec.g.lz, 0.0],
    );
    let coupled = !matches!(spec.xi, Coupling::Zero);
    let s1 = spec.clone();
    let psi = if coupled {
        FreeTerm::new(dim, FreeTermNode::Terminal, move |t, ens, out| {
            s1.x(t, ens, out);
            scale_rows(out, &s1.xi_values(t, ens), dim);
        })
    } else {
        FreeTerm::new(dim, FreeTermNode::Parameter, |_, _, out| out.fill(0.0))
    };
    let s2 = spec.clone();
    let eval = move |inp: &crate::generator::GenInput<'_>, out: &mut [f64]| {
        let ens = inp.ensemble;
        s2.g.evaluate(inp.t_node, inp.s_node, ens, inp.z, out);
        if coupled {
            let mut bv = vec![0.0; out.len()];
            s2.b.evaluate(inp.t_node, inp.s_node, ens, inp.z, &mut bv);
            scale_rows(&mut bv, &s2.xi_values(inp.t_node, ens), dim);
            for (o, v) in out.iter_mut().zip(bv) {
                *o += v;
            }
        }
    };
    let g = GeneratorSpec::new(format!("{}-induced", spec.id), dim, class, profile, eval).reads(false, true, false);
    Ok((psi, g))
}

/// Per-`t` triples rebuilt from a BSVIE solution; `Y` and `Z` are shared with it.
pub struct FbsdeSolution<'a> {
    pub spec: FbsdeSpec,
    ens: &'a BrownianEnsemble,
    reg: Regressor<'a>,
    y: Arc<PathProcess>,
    y_cells: Arc<Vec<crate::stochastic::Cell>>,
    z: Arc<ZField>,
    pub certificate: Option<WellPosednessCertificate>,
}

/// `(X^t, Y^t, Z^t)` on the grid; entries before `t` are zero and `Z^t` node `k` covers `(s_k, s_{k+1}]`.
#[derive(Clone, Debug)]
pub struct FbsdeTriple {
    pub t_node: usize,
    pub x: PathProcess,
    pub y: PathProcess,
    pub z: PathProcess,
}

impl<'a> FbsdeSolution<'a> {
    /// Wraps externally supplied `(Y, Z)`; used to test inconsistent families.
    pub fn from_parts(
        spec: FbsdeSpec,
        ens: &'a BrownianEnsemble,
        y: Arc<PathProcess>,
        z: Arc<ZField>,
        basis: crate::regression::BasisConfig,
    ) -> Result<Self> {
        y.check_compatible(ens)?;
        if z.grid() != ens.grid() || y.dim() != spec.dim {
            return invalid("FBSDE parts do not match the ensemble");
        }
        let n = ens.grid().n_steps();
        Ok(Self {
            spec,
            ens,
            reg: Regressor::new(ens, basis)?,
            y_cells: Arc::new(vec![crate::stochastic::Cell::Zero; n + 1]),
            y,
            z,
            certificate: None,
        })
    }

    pub fn ensemble(&self) -> &'a BrownianEnsemble {
        self.ens
    }

    fn z_at(&self, t: usize, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.ens.n_paths() * self.spec.dim];
        self.z.triangle().eval(t, k + 1, self.ens, &mut v).expect("cell in range");
        v
    }

    /// `X^t` by forward quadrature of `b^t(r, Z(t, r))`.
    pub fn x(&self, t: usize) -> PathProcess {
        let grid = *self.ens.grid();
        let dim = self.spec.dim;
        let dt = grid.dt();
        let mut x = PathProcess::zeros(grid, self.ens.n_paths(), dim);
        let mut cur = vec![0.0; self.ens.n_paths() * dim];
        self.spec.x(t, self.ens, &mut cur);
        x.at_mut(t).copy_from_slice(&cur);
        let mut bv = vec![0.0; cur.len()];
        for k in t..grid.n_steps() {
            self.spec.b.evaluate(t, k, self.ens, &self.z_at(t, k), &mut bv);
            for (c, b) in cur.iter_mut().zip(&bv) {
                *c += b * dt;
            }
            x.at_mut(k + 1).copy_from_slice(&cur);
        }
        x
    }

    fn terminal(&self, t: usize, x: &PathProcess) -> Vec<f64> {
        let n = self.ens.grid().n_steps();
        let mut v = x.at(n).to_vec();
        scale_rows(&mut v, &self.spec.xi_values(t, self.ens), self.spec.dim);
        v
    }

    /// Full triple for parameter node `t`.
    ///
    /// `Y^t(t)` is the shared BSVIE value, `Y^t(T) = xi^t X^t(T)` pathwise and
    /// `Y^t(s) = E_s[xi^t X^t(T) + int_s^T g^t dr]` in between.
    pub fn triple(&self, t: usize) -> FbsdeTriple {
        let grid = *self.ens.grid();
        let n = grid.n_steps();
        let dim = self.spec.dim;
        let dt = grid.dt();
        let x = self.x(t);
        let mut y = PathProcess::zeros(grid, self.ens.n_paths(), dim);
        let mut z = PathProcess::zeros(grid, self.ens.n_paths(), dim);
        let mut target = self.terminal(t, &x);
        y.at_mut(n).copy_from_slice(&target);
        let mut gv = vec![0.0; target.len()];
        for k in (t..n).rev() {
            let zk = self.z_at(t, k);
            self.spec.g.evaluate(t, k, self.ens, &zk, &mut gv);
            for (a, g) in target.iter_mut().zip(&gv) {
                *a += g * dt;
            }
            z.at_mut(k).copy_from_slice(&zk);
            if k > t {
                let v = self.reg.fitted(k, &target, dim);
                y.at_mut(k).copy_from_slice(&v);
            }
        }
        y.at_mut(t).copy_from_slice(self.y.at(t));
        FbsdeTriple { t_node: t, x, y, z }
    }

    /// `max_p |Y^t(T) - xi^t X^t(T)|` per parameter node.
    pub fn terminal_coupling(&self) -> Vec<f64> {
        let n = self.ens.grid().n_steps();
        par::map(n, |t| {
            let tr = self.triple(t);
            let target = self.terminal(t, &tr.x);
            tr.y.at(n).iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
    }

    /// RMS of `E_t[xi^t X^t(T) + int_t^T g^t] - Y(t)` per parameter node.
    pub fn diagonal_gap(&self) -> Vec<f64> {
        let grid = *self.ens.grid();
        let n = grid.n_steps();
        let dim = self.spec.dim;
        par::map(n, |t| {
            let x = self.x(t);
            let mut target = self.terminal(t, &x);
            let mut gv = vec![0.0; target.len()];
            for k in t..n {
                self.spec.g.evaluate(t, k, self.ens, &self.z_at(t, k), &mut gv);
                for (a, g) in target.iter_mut().zip(&gv) {
                    *a += g * grid.dt();
                }
            }
            let fit = self.reg.fitted(t, &target, dim);
            let sq: f64 = fit.iter().zip(self.y.at(t)).map(|(a, b)| (a - b) * (a - b)).sum();
            (sq / self.ens.n_paths() as f64).sqrt()
        })
    }

    pub fn y_shared(&self) -> &Arc<PathProcess> {
        &self.y
    }

    pub fn z_shared(&self) -> &Arc<ZField> {
        &self.z
    }
}

/// Solves the induced BSVIE and wraps it as an FBSDE family.
pub fn solve_fbsde_via_bsvie<'a>(
    ens: &'a BrownianEnsemble,
    spec: &FbsdeSpec,
    cfg: &SolverConfig,
) -> Result<(FbsdeSolution<'a>, BsvieSolution)> {
    let (psi, g) = induced_bsvie_generator(spec)?;
    let sol = solve_type1(ens, &psi, &g, cfg)?;
    let fb = FbsdeSolution {
        spec: spec.clone(),
        ens,
        reg: Regressor::new(ens, cfg.basis)?,
        y: Arc::clone(&sol.y),
        y_cells: Arc::clone(&sol.y_cells),
        z: Arc::clone(&sol.z),
        certificate: sol.certificate.clone(),
    };
    Ok((fb, sol))
}

/// Stitches `Y(t) = Y^t(t)`, `Z(t, s) = Z^t(s)` and re-checks the BSVIE residual.
pub fn fbsde_to_bsvie(sol: &FbsdeSolution<'_>, cfg: &SolverConfig) -> Result<BsvieSolution> {
    let (psi, g) = induced_bsvie_generator(&sol.spec)?;
    let mut out = BsvieSolution {
        y: Arc::clone(&sol.y),
        y_cells: Arc::clone(&sol.y_cells),
        z: Arc::clone(&sol.z),
        picard_history: Vec::new(),
        beta: 0.0,
        tolerance: cfg.tol,
        residual: Vec::new(),
        reconstruction_error: None,
        certificate: sol.certificate.clone(),
        warnings: Vec::new(),
    };
    out.residual = residual(&out, &psi, &g, sol.ens)?;
    Ok(out)
}
