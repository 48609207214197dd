use super::row::{RowSource, RowState};
use super::{
    cell_diff, combine, contributions, extend_lower, reconstruction_errors, residual_with, BsvieSolution, PicardRecord,
    SolverConfig, ZField,
};
use crate::constants::{certify, Hypothesis};
use crate::error::{invalid, BsvieError, Result};
use crate::generator::{FreeTerm, GenInput, GeneratorSpec, Measurability};
use crate::par;
use crate::regression::Regressor;
use crate::stochastic::{BrownianEnsemble, Cell, PathProcess, SquareField, TimeGrid, TriangleField};
use std::sync::Arc;

pub(crate) struct Iterate {
    pub y: PathProcess,
    pub y_cells: Vec<Cell>,
    pub z: TriangleField,
    pub square: Option<SquareField>,
}

impl Iterate {
    fn zero(grid: TimeGrid, n_paths: usize, dim: usize, type2: bool) -> Self {
        Self {
            y: PathProcess::zeros(grid, n_paths, dim),
            y_cells: vec![Cell::Zero; grid.n_nodes()],
            z: TriangleField::zeros(grid, dim),
            square: type2.then(|| SquareField::zeros(grid, dim)),
        }
    }
}

/// Everything a Picard run reads besides the configuration.
pub(crate) struct PicardInputs<'a> {
    pub reg: &'a Regressor<'a>,
    pub psi: &'a FreeTerm,
    pub g: &'a GeneratorSpec,
    pub type2: bool,
}

/// Evaluates `g(t_i, s_k, y_k, z, zhat(i, k))` against a frozen iterate.
pub(crate) struct FrozenGenerator<'a> {
    pub ens: &'a BrownianEnsemble,
    pub g: &'a GeneratorSpec,
    pub y: &'a PathProcess,
    pub z: &'a TriangleField,
    pub square: Option<&'a SquareField>,
    pub zeros: Vec<f64>,
}

impl<'a> FrozenGenerator<'a> {
    pub fn new(
        ens: &'a BrownianEnsemble,
        g: &'a GeneratorSpec,
        y: &'a PathProcess,
        z: &'a TriangleField,
        square: Option<&'a SquareField>,
    ) -> Self {
        Self {
            ens,
            g,
            y,
            z,
            square,
            zeros: vec![0.0; ens.n_paths() * g.dim],
        }
    }

    /// `Z(s_k, t_i)` on the interval starting at `t_i`: square cell `(k, i + 1)`.
    fn zhat(&self, i: usize, k: usize) -> Vec<f64> {
        match self.square {
            Some(sq) if i < self.ens.grid().n_steps() => {
                let mut v = vec![0.0; self.zeros.len()];
                sq.eval(k, i + 1, self.ens, &mut v).expect("square cell in range");
                v
            }
            _ => self.zeros.clone(),
        }
    }

    pub fn eval(&self, i: usize, k: usize, zeta: Option<&[f64]>, out: &mut [f64]) {
        let g = self.g;
        let y = if g.uses_y { self.y.at(k) } else { &self.zeros };
        let z_owned;
        let z = match zeta {
            Some(v) => v,
            None if g.uses_z => {
                z_owned = {
                    let mut v = vec![0.0; self.zeros.len()];
                    self.z.eval(i, k + 1, self.ens, &mut v).expect("triangle cell in range");
                    v
                };
                &z_owned
            }
            None => &self.zeros,
        };
        let zhat_owned;
        let zhat = if g.uses_zhat {
            zhat_owned = self.zhat(i, k);
            &zhat_owned
        } else {
            &self.zeros
        };
        g.evaluate(
            &GenInput {
                t_node: i,
                s_node: k,
                ensemble: self.ens,
                y,
                z,
                zhat,
            },
            out,
        );
    }
}

struct PicardSource<'a> {
    reg: &'a Regressor<'a>,
    psi: &'a FreeTerm,
    frozen: FrozenGenerator<'a>,
}

impl RowSource for PicardSource<'_> {
    fn dim(&self) -> usize {
        self.frozen.g.dim
    }

    fn inject(&self, i: usize, r: usize, out: &mut [f64]) -> bool {
        let ens = self.reg.ensemble();
        let n = ens.grid().n_steps();
        let dt = ens.grid().dt();
        let g = self.frozen.g;
        let mut any = false;
        let mut buf = vec![0.0; out.len()];
        if self.psi.measurable_node(i, n) == r {
            self.psi.evaluate(i, ens, &mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += b;
            }
            any = true;
        }
        if g.class == Measurability::Anticipating {
            for k in i..n {
                if g.measurable_node(i, k, n) != r {
                    continue;
                }
                self.frozen.eval(i, k, None, &mut buf);
                if g.uses_z {
                    // Only the remainder g - E_k[g] is injected; E_k[g] enters through the driver.
                    let fitted = self.reg.fitted(k, &buf, g.dim);
                    for (b, f) in buf.iter_mut().zip(fitted) {
                        *b -= f;
                    }
                }
                for (o, b) in out.iter_mut().zip(&buf) {
                    *o += b * dt;
                }
                any = true;
            }
        }
        any
    }

    fn driver_needs_zeta(&self) -> bool {
        self.frozen.g.uses_z
    }

    fn driver(&self, i: usize, k: usize, zeta: Option<&[f64]>, out: &mut [f64]) -> bool {
        let g = self.frozen.g;
        if g.class == Measurability::Adapted || g.uses_z {
            self.frozen.eval(i, k, zeta, out);
            true
        } else {
            false
        }
    }
}

/// Fails when `sup L_z dt >= 1` on the grid.
pub(crate) fn check_lz_dt(g: &GeneratorSpec, grid: &TimeGrid) -> Result<()> {
    let n = grid.n_steps();
    let mut sup: f64 = 0.0;
    for i in 0..=n {
        for k in i..=n {
            let (t, s) = (grid.time(i), grid.time(k));
            sup = sup.max(g.profile.parts[0].lz.eval(t, s) + g.profile.parts[1].lz.eval(t, s));
        }
    }
    if sup * grid.dt() >= 1.0 {
        return Err(BsvieError::SolverDivergence(format!(
            "L_z dt = {:.3} >= 1; refine the grid",
            sup * grid.dt()
        )));
    }
    Ok(())
}

pub(crate) struct PicardOutcome {
    pub iterate: Iterate,
    pub history: Vec<PicardRecord>,
    pub beta: f64,
}

fn sweep(inputs: &PicardInputs<'_>, prev: &Iterate) -> Result<Iterate> {
    let reg = inputs.reg;
    let ens = reg.ensemble();
    let grid = *ens.grid();
    let n = grid.n_steps();
    let dim = inputs.g.dim;
    let src = PicardSource {
        reg,
        psi: inputs.psi,
        frozen: FrozenGenerator::new(ens, inputs.g, &prev.y, &prev.z, prev.square.as_ref()),
    };
    let rows = par::map(n + 1, |i| {
        let mut st = RowState::start(reg, &src, i);
        st.advance(reg, &src, i, None);
        st
    });
    let mut y = PathProcess::zeros(grid, ens.n_paths(), dim);
    let mut y_cells = Vec::with_capacity(n + 1);
    let mut z_rows = Vec::with_capacity(n + 1);
    for (i, st) in rows.into_iter().enumerate() {
        y.at_mut(i).copy_from_slice(&st.eta);
        y_cells.push(st.y_cell(reg));
        z_rows.push(st.z_row());
    }
    let z = TriangleField::from_rows(grid, dim, z_rows)?;
    let square = if inputs.type2 {
        Some(SquareField::from_parts(z.clone(), extend_lower(reg, &y))?)
    } else {
        None
    };
    Ok(Iterate {
        y,
        y_cells,
        z,
        square,
    })
}

/// Picard iteration from the zero iterate until the relative weighted delta drops below `tol`.
pub(crate) fn picard_loop(inputs: &PicardInputs<'_>, cfg: &SolverConfig) -> Result<PicardOutcome> {
    let ens = inputs.reg.ensemble();
    let grid = *ens.grid();
    let dim = inputs.g.dim;
    let p = cfg.p;
    let ladder = cfg.beta_ladder(grid.horizon());
    let mut bidx = 0;
    let mut it = Iterate::zero(grid, ens.n_paths(), dim, inputs.type2);
    let mut history: Vec<PicardRecord> = Vec::new();
    let mut prev_delta: Option<Vec<f64>> = None;
    for iteration in 1..=cfg.max_picard {
        let next = sweep(inputs, &it)?;
        let a_delta = contributions(
            ens,
            dim,
            &|i| next.y.at(i).iter().zip(it.y.at(i)).map(|(a, b)| a - b).collect(),
            &|i| {
                next.z
                    .row(i)
                    .iter()
                    .zip(it.z.row(i))
                    .enumerate()
                    .map(|(off, (a, b))| cell_diff(a, b, ens, i + off, dim))
                    .collect()
            },
            p,
        );
        let a_new = contributions(ens, dim, &|i| next.y.at(i).to_vec(), &|i| next.z.row(i).to_vec(), p);
        let ratio_at = |b: f64| prev_delta.as_ref().map(|pd| combine(&grid, &a_delta, b, p) / combine(&grid, pd, b, p));
        let mut ratio = ratio_at(ladder[bidx]);
        while matches!(ratio, Some(r) if r >= 1.0) && bidx + 1 < ladder.len() {
            bidx += 1;
            ratio = ratio_at(ladder[bidx]);
        }
        let beta = ladder[bidx];
        let delta = combine(&grid, &a_delta, beta, p);
        let norm = combine(&grid, &a_new, beta, p);
        let relative_delta = if norm > 0.0 {
            delta / norm
        } else if delta == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        history.push(PicardRecord {
            iteration,
            beta,
            delta,
            relative_delta,
            ratio,
        });
        it = next;
        if relative_delta < cfg.tol {
            return Ok(PicardOutcome {
                iterate: it,
                history,
                beta,
            });
        }
        if !relative_delta.is_finite() {
            return Err(BsvieError::SolverDivergence(format!(
                "iterate blew up at Picard sweep {iteration}"
            )));
        }
        prev_delta = Some(a_delta);
    }
    let rel: Vec<f64> = history.iter().map(|h| h.relative_delta).collect();
    Err(BsvieError::NonConvergence {
        last: *rel.last().unwrap_or(&f64::NAN),
        history: rel,
    })
}

fn prepare(
    ens: &BrownianEnsemble,
    psi: &FreeTerm,
    g: &GeneratorSpec,
    cfg: &SolverConfig,
    hyp: Hypothesis,
) -> Result<(crate::constants::WellPosednessCertificate, Vec<String>)> {
    cfg.validate()?;
    if psi.dim != g.dim {
        return invalid("free term and generator dimensions differ");
    }
    let cert = certify(&g.profile, hyp)?;
    let mut warnings = Vec::new();
    if !cert.certified {
        if cfg.strict {
            return Err(BsvieError::CertificateRejected { margin: cert.margin });
        }
        warnings.push(format!(
            "certificate rejected (margin {:.6}); continuing in warning-only mode",
            cert.margin
        ));
    }
    check_lz_dt(g, ens.grid())?;
    Ok((cert, warnings))
}

fn finish(
    ens: &BrownianEnsemble,
    psi: &FreeTerm,
    g: &GeneratorSpec,
    cfg: &SolverConfig,
    out: PicardOutcome,
    cert: crate::constants::WellPosednessCertificate,
    warnings: Vec<String>,
) -> BsvieSolution {
    let it = out.iterate;
    let frozen = FrozenGenerator::new(ens, g, &it.y, &it.z, it.square.as_ref());
    let residual = residual_with(ens, &it.y, &it.z, psi, &|i, k, z, o| {
        frozen.eval(i, k, Some(z), o);
        true
    });
    let reconstruction_error = it.square.as_ref().map(|sq| reconstruction_errors(ens, &it.y, sq));
    let z = match it.square {
        Some(sq) => ZField::Square(sq),
        None => ZField::Triangle(it.z),
    };
    BsvieSolution {
        y: Arc::new(it.y),
        y_cells: Arc::new(it.y_cells),
        z: Arc::new(z),
        picard_history: out.history,
        beta: out.beta,
        tolerance: cfg.tol,
        residual,
        reconstruction_error,
        certificate: Some(cert),
        warnings,
    }
}

/// Type-I solve: the generator reads `(y, z)` but not `Z(s, t)`; free term may be `F_T`-measurable.
pub fn solve_type1(ens: &BrownianEnsemble, psi: &FreeTerm, g: &GeneratorSpec, cfg: &SolverConfig) -> Result<BsvieSolution> {
    if g.uses_zhat {
        return invalid("Type-I generators cannot read Z(s, t); use solve_type2");
    }
    let (cert, warnings) = prepare(ens, psi, g, cfg, Hypothesis::TypeOne)?;
    let reg = Regressor::new(ens, cfg.basis)?;
    let out = picard_loop(
        &PicardInputs {
            reg: &reg,
            psi,
            g,
            type2: false,
        },
        cfg,
    )?;
    Ok(finish(ens, psi, g, cfg, out, cert, warnings))
}

/// Type-II solve returning an M-solution; every sweep extends `Z` below the diagonal.
pub fn solve_type2(ens: &BrownianEnsemble, psi: &FreeTerm, g: &GeneratorSpec, cfg: &SolverConfig) -> Result<BsvieSolution> {
    if cfg.p != 2.0 {
        return invalid("Type-II solves run at p = 2 only");
    }
    let (cert, warnings) = prepare(ens, psi, g, cfg, Hypothesis::TypeTwo)?;
    let reg = Regressor::new(ens, cfg.basis)?;
    let out = picard_loop(
        &PicardInputs {
            reg: &reg,
            psi,
            g,
            type2: true,
        },
        cfg,
    )?;
    Ok(finish(ens, psi, g, cfg, out, cert, warnings))
}
