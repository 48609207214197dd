use super::picard::FrozenGenerator;
use super::row::{RowSource, RowState};
use super::{check_lz_dt, residual_with, BsvieSolution, PicardRecord, SolverConfig, ZField};
use crate::error::{invalid, BsvieError, Result};
use crate::generator::{verify_adaptedness, FreeTerm, GenInput, GeneratorSpec, Measurability};
use crate::par;
use crate::regression::Regressor;
use crate::stochastic::{BrownianEnsemble, Cell, PathProcess, TimeGrid, TriangleField};
use std::sync::Arc;

/// Largest window (in steps) with `L_y * delta <= 0.5`, at least one step.
pub fn default_delta_steps(g: &GeneratorSpec, grid: &TimeGrid) -> usize {
    let n = grid.n_steps();
    let mut ly: f64 = 0.0;
    for i in 0..=n {
        for k in i..=n {
            let (t, s) = (grid.time(i), grid.time(k));
            ly = ly.max(g.profile.parts[0].ly.eval(t, s) + g.profile.parts[1].ly.eval(t, s));
        }
    }
    if ly <= 0.0 {
        return n.max(1);
    }
    ((0.5 / (ly * grid.dt())).floor() as usize).clamp(1, n.max(1))
}

struct StepSource<'a> {
    ens: &'a BrownianEnsemble,
    psi: &'a FreeTerm,
    g: &'a GeneratorSpec,
    y: &'a PathProcess,
    zeros: Vec<f64>,
}

impl RowSource for StepSource<'_> {
    fn dim(&self) -> usize {
        self.g.dim
    }

    fn inject(&self, i: usize, r: usize, out: &mut [f64]) -> bool {
        if self.psi.measurable_node(i, self.ens.grid().n_steps()) != r {
            return false;
        }
        let mut buf = vec![0.0; out.len()];
        self.psi.evaluate(i, self.ens, &mut buf);
        for (o, b) in out.iter_mut().zip(buf) {
            *o += b;
        }
        true
    }

    fn driver_needs_zeta(&self) -> bool {
        self.g.uses_z
    }

    fn driver(&self, i: usize, k: usize, zeta: Option<&[f64]>, out: &mut [f64]) -> bool {
        let y = if self.g.uses_y { self.y.at(k) } else { &self.zeros };
        self.g.evaluate(
            &GenInput {
                t_node: i,
                s_node: k,
                ensemble: self.ens,
                y,
                z: zeta.unwrap_or(&self.zeros),
                zhat: &self.zeros,
            },
            out,
        );
        true
    }
}

pub(crate) fn window_change(y: &PathProcess, locals: &[RowState], a: usize) -> f64 {
    let (mut d, mut m) = (0.0, 0.0);
    for (off, st) in locals.iter().enumerate() {
        for (new, old) in st.eta.iter().zip(y.at(a + off)) {
            d += (new - old) * (new - old);
            m += new * new;
        }
    }
    if m > 0.0 {
        (d / m).sqrt()
    } else if d == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Reference solver for adapted generators: local fixed points on windows of
/// `delta_steps` steps, swept from `T` back to `0`.
pub fn solve_adapted_stepping(
    ens: &BrownianEnsemble,
    psi: &FreeTerm,
    g: &GeneratorSpec,
    cfg: &SolverConfig,
) -> Result<BsvieSolution> {
    cfg.validate()?;
    if psi.dim != g.dim {
        return invalid("free term and generator dimensions differ");
    }
    if g.uses_zhat {
        return invalid("the stepping solver does not handle Z(s, t) dependence");
    }
    let grid = *ens.grid();
    let n = grid.n_steps();
    if g.class == Measurability::Anticipating {
        return Err(BsvieError::Refused(
            "generator is anticipating: the tail integral over a window is only F_T-measurable, so it \
             cannot become a new free term measurable at the window start; use solve_type1"
                .into(),
        ));
    }
    for (t, s) in [(0, n / 2), (n / 2, n.saturating_sub(1))] {
        let report = verify_adaptedness(g, ens, t, s, ens.seed() ^ 0x5eedad)?;
        if !report.adapted {
            return Err(BsvieError::Refused(format!(
                "generator declared adapted but depends on the future of s (deviation {:.3e} at node {s})",
                report.max_deviation
            )));
        }
    }
    check_lz_dt(g, &grid)?;
    let delta = cfg.delta_steps.unwrap_or_else(|| default_delta_steps(g, &grid));
    let reg = Regressor::new(ens, cfg.basis)?;
    let dim = g.dim;
    let zeros = vec![0.0; ens.n_paths() * dim];

    let mut y = PathProcess::zeros(grid, ens.n_paths(), dim);
    let mut y_cells = vec![Cell::Zero; n + 1];
    let mut z_rows: Vec<Vec<Cell>> = vec![Vec::new(); n + 1];
    let mut carries: Vec<RowState> = {
        let src = StepSource {
            ens,
            psi,
            g,
            y: &y,
            zeros: zeros.clone(),
        };
        (0..=n).map(|i| RowState::start(&reg, &src, i)).collect()
    };
    y.at_mut(n).copy_from_slice(&carries[n].eta);
    y_cells[n] = carries[n].y_cell(&reg);

    let mut history = Vec::new();
    let mut b = n;
    while b > 0 {
        let a = b.saturating_sub(delta);
        let mut prev: Option<f64> = None;
        let mut done = false;
        for sweep in 1..=cfg.max_picard {
            let locals = {
                let src = StepSource {
                    ens,
                    psi,
                    g,
                    y: &y,
                    zeros: zeros.clone(),
                };
                par::map(b - a, |off| {
                    let mut st = carries[a + off].clone();
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
                        "local fixed point on steps [{a}, {b}) is not contracting; retry with delta_steps < {delta}"
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
        // Rows left of the window absorb the committed window values.
        let src = StepSource {
            ens,
            psi,
            g,
            y: &y,
            zeros: zeros.clone(),
        };
        par::for_each_mut(&mut carries[..a], |_, st| st.advance(&reg, &src, a, None));
        b = a;
    }
    z_rows[n] = Vec::new();
    let z = TriangleField::from_rows(grid, dim, z_rows)?;
    let frozen = FrozenGenerator::new(ens, g, &y, &z, None);
    let residual = residual_with(ens, &y, &z, psi, &|i, k, zv, o| {
        frozen.eval(i, k, Some(zv), o);
        true
    });
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
        warnings: Vec::new(),
    })
}
