use super::{PathGeneratorSpec, PathInput, PathSegment};
use crate::error::{invalid, BsvieError, Result};
use crate::generator::{verify_measurability, FreeTerm};
use crate::par;
use crate::regression::Regressor;
use crate::solver::row::{RowSource, RowState};
use crate::solver::{residual_with, window_change, BsvieSolution, PicardRecord, SolverConfig, ZField};
use crate::stochastic::{BrownianEnsemble, Cell, PathProcess, TimeGrid, TriangleField};
use std::sync::Arc;

/// Largest window (in steps) with `L * delta <= 0.5`.
pub fn default_path_delta_steps(g: &PathGeneratorSpec, grid: &TimeGrid) -> usize {
    let n = grid.n_steps().max(1);
    if g.lipschitz <= 0.0 {
        return n;
    }
    ((0.5 / (g.lipschitz * grid.dt())).floor() as usize).clamp(1, n)
}

struct PathSource<'a> {
    reg: &'a Regressor<'a>,
    psi: &'a FreeTerm,
    g: &'a PathGeneratorSpec,
    y: &'a PathProcess,
    /// Project `g` onto `F_s` and feed it through the driver instead of injecting it pathwise.
    conditioned: bool,
}

impl PathSource<'_> {
    fn eval(&self, i: usize, k: usize, z: Option<&[f64]>, out: &mut [f64]) {
        let ens = self.reg.ensemble();
        self.g.evaluate(
            &PathInput {
                t_node: i,
                s_node: k,
                ensemble: ens,
                segment: PathSegment::new(self.y, k).expect("node in range"),
                z,
            },
            out,
        );
        if self.conditioned {
            let fitted = self.reg.fitted(k, out, self.g.dim);
            out.copy_from_slice(&fitted);
        }
    }
}

impl RowSource for PathSource<'_> {
    fn dim(&self) -> usize {
        self.g.dim
    }

    fn inject(&self, i: usize, r: usize, out: &mut [f64]) -> bool {
        let ens = self.reg.ensemble();
        let n = ens.grid().n_steps();
        let dt = ens.grid().dt();
        let mut any = false;
        let mut buf = vec![0.0; out.len()];
        if self.psi.measurable_node(i, n) == r {
            self.psi.evaluate(i, ens, &mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += b;
            }
            any = true;
        }
        if !self.conditioned {
            for k in i..n {
                if self.g.read_horizon(k, n) != r {
                    continue;
                }
                self.eval(i, k, None, &mut buf);
                for (o, b) in out.iter_mut().zip(&buf) {
                    *o += b * dt;
                }
                any = true;
            }
        }
        any
    }

    fn driver_needs_zeta(&self) -> bool {
        self.conditioned && self.g.uses_z
    }

    fn driver(&self, i: usize, k: usize, zeta: Option<&[f64]>, out: &mut [f64]) -> bool {
        if !self.conditioned {
            return false;
        }
        self.eval(i, k, zeta, out);
        true
    }
}

fn windowed(
    ens: &BrownianEnsemble,
    psi: &FreeTerm,
    g: &PathGeneratorSpec,
    cfg: &SolverConfig,
    conditioned: bool,
) -> Result<BsvieSolution> {
    cfg.validate()?;
    if psi.dim != g.dim {
        return invalid("free term and generator dimensions differ");
    }
    let grid = *ens.grid();
    let n = grid.n_steps();
    let dt = grid.dt();
    let delta = cfg.delta_steps.unwrap_or_else(|| default_path_delta_steps(g, &grid));
    if g.lipschitz * delta as f64 * dt >= 1.0 {
        return Err(BsvieError::SolverDivergence(format!(
            "L * delta = {:.3} >= 1; retry with delta_steps < {}",
            g.lipschitz * delta as f64 * dt,
            ((1.0 / (g.lipschitz * dt)).floor() as usize).max(1)
        )));
    }
    if g.uses_z && g.lz * dt >= 1.0 {
        return Err(BsvieError::SolverDivergence(format!("L_z dt = {:.3} >= 1; refine the grid", g.lz * dt)));
    }
    let reg = Regressor::new(ens, cfg.basis)?;
    let dim = g.dim;
    let mut y = PathProcess::zeros(grid, ens.n_paths(), dim);
    let mut y_cells = vec![Cell::Zero; n + 1];
    let mut z_rows: Vec<Vec<Cell>> = vec![Vec::new(); n + 1];
    {
        let src = PathSource {
            reg: &reg,
            psi,
            g,
            y: &y,
            conditioned,
        };
        let last = RowState::start(&reg, &src, n);
        y_cells[n] = last.y_cell(&reg);
        let eta = last.eta;
        y.at_mut(n).copy_from_slice(&eta);
    }
    let mut history = Vec::new();
    let mut b = n;
    while b > 0 {
        let a = b.saturating_sub(delta);
        let mut prev: Option<f64> = None;
        let mut done = false;
        for sweep in 1..=cfg.max_picard {
            let locals = {
                let src = PathSource {
                    reg: &reg,
                    psi,
                    g,
                    y: &y,
                    conditioned,
                };
                par::map(b - a, |off| {
                    let mut st = RowState::start(&reg, &src, a + off);
                    st.advance(&reg, &src, a + off, None);
                    st
                })
            };
            let change = window_change(&y, &locals, a);
            for (off, st) in locals.iter().enumerate() {
                y.at_mut(a + off).copy_from_slice(&st.eta);
            }
            history.push(PicardRecord {
                iteration: history.len() + 1,
                beta: 0.0,
                delta: change,
                relative_delta: change,
                ratio: prev.map(|p| change / p),
            });
            if change < cfg.tol {
                for (off, st) in locals.iter().enumerate() {
                    y_cells[a + off] = st.y_cell(&reg);
                    z_rows[a + off] = st.z_row();
                }
                done = true;
                break;
            }
            if let Some(p) = prev {
                if sweep >= 3 && change >= p {
                    return Err(BsvieError::SolverDivergence(format!(
                        "window [{a}, {b}) is not contracting; retry with delta_steps < {delta}"
                    )));
                }
            }
            prev = Some(change);
        }
        if !done {
            let rel: Vec<f64> = history.iter().map(|h: &PicardRecord| h.relative_delta).collect();
            return Err(BsvieError::NonConvergence {
                last: *rel.last().unwrap_or(&f64::NAN),
                history: rel,
            });
        }
        b = a;
    }
    let z = TriangleField::from_rows(grid, dim, z_rows)?;
    let src = PathSource {
        reg: &reg,
        psi,
        g,
        y: &y,
        conditioned,
    };
    let residual = residual_with(ens, &y, &z, psi, &|i, k, zv, out| {
        src.eval(i, k, g.uses_z.then_some(zv), out);
        true
    });
    let mut warnings = Vec::new();
    if cfg.delta_steps.is_none() {
        warnings.push(format!("delta_steps = {delta} chosen from L * delta <= 0.5"));
    }
    Ok(BsvieSolution {
        y: Arc::new(y),
        y_cells: Arc::new(y_cells),
        z: Arc::new(ZField::Triangle(z)),
        picard_history: history,
        beta: 0.0,
        tolerance: cfg.tol,
        residual,
        reconstruction_error: None,
        certificate: None,
        warnings,
    })
}

/// Solves `Y(t) = psi(t) + int_t^T g(t, s, Y_s) ds - int_t^T Z(t, s) dW(s)` window by window.
///
/// Inside a window the generator is evaluated pathwise on the frozen iterate, so it
/// is treated as anticipating and enters each row at the node where it becomes known.
pub fn solve_path_dependent(
    ens: &BrownianEnsemble,
    psi: &FreeTerm,
    g: &PathGeneratorSpec,
    cfg: &SolverConfig,
) -> Result<BsvieSolution> {
    if g.uses_z {
        return invalid("generator reads z; use solve_path_dependent_with_z");
    }
    windowed(ens, psi, g, cfg, false)
}

/// Deterministic probe path `1 + t` per component.
fn probe_process(ens: &BrownianEnsemble, dim: usize) -> PathProcess {
    let grid = *ens.grid();
    let mut p = PathProcess::zeros(grid, ens.n_paths(), dim);
    for k in 0..=grid.n_steps() {
        p.at_mut(k).fill(1.0 + grid.time(k));
    }
    p
}

/// Solves the `z`-dependent variant under the adaptedness condition.
///
/// The generator is made `F_s`-measurable by projecting it onto the time-`s` basis,
/// and `z` enters through the step recursion. Generators failing a future-resampling
/// test on deterministic probe paths are refused.
pub fn solve_path_dependent_with_z(
    ens: &BrownianEnsemble,
    psi: &FreeTerm,
    g: &PathGeneratorSpec,
    cfg: &SolverConfig,
) -> Result<BsvieSolution> {
    if !g.adaptedness_condition {
        return Err(BsvieError::Refused(format!(
            "generator {} does not declare the adaptedness condition",
            g.id
        )));
    }
    let n = ens.grid().n_steps();
    let dim = g.dim;
    for s in [0, n / 2, n.saturating_sub(1)] {
        let report = verify_measurability(
            |e| {
                let probe = probe_process(e, dim);
                let z: Vec<f64> = e.w(s).iter().flat_map(|w| std::iter::repeat_n(*w, dim)).collect();
                let mut out = vec![0.0; e.n_paths() * dim];
                g.evaluate(
                    &PathInput {
                        t_node: 0,
                        s_node: s,
                        ensemble: e,
                        segment: PathSegment::new(&probe, s).expect("node in range"),
                        z: Some(&z),
                    },
                    &mut out,
                );
                out
            },
            ens,
            s,
            ens.seed() ^ 0xada9,
        );
        if !report.adapted {
            return Err(BsvieError::Refused(format!(
                "generator {} reads the Brownian future at s-node {s} (deviation {:.3e})",
                g.id, report.max_deviation
            )));
        }
    }
    windowed(ens, psi, g, cfg, true)
}
