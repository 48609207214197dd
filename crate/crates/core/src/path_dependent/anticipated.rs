use crate::error::{invalid, BsvieError, Result};
use crate::regression::Regressor;
use crate::solver::SolverConfig;
use crate::stochastic::{BrownianEnsemble, PathProcess};
use std::fmt;
use std::sync::Arc;

/// How the driver reads future values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FutureForm {
    /// Future values arrive as `E_s[y(s + delta)]`, `E_s[z(s + delta)]`.
    Conditioned,
    /// Future values are read pathwise; not adapted in general.
    Raw,
}

/// Arguments of an anticipated driver at step `s_node`.
pub struct AnticipatedInput<'a> {
    pub s_node: usize,
    pub ensemble: &'a BrownianEnsemble,
    pub y: &'a [f64],
    pub y_future: &'a [f64],
    pub z: &'a [f64],
    pub z_future: &'a [f64],
}

pub type AnticipatedFn = dyn Fn(&AnticipatedInput<'_>, &mut [f64]) + Send + Sync;

/// Driver `f(s, y(s), y(s + delta), z(s), z(s + delta))`.
#[derive(Clone)]
pub struct AnticipatedGenerator {
    pub id: String,
    pub dim: usize,
    pub form: FutureForm,
    eval: Arc<AnticipatedFn>,
}

impl fmt::Debug for AnticipatedGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnticipatedGenerator")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .field("form", &self.form)
            .finish()
    }
}

impl AnticipatedGenerator {
    pub fn new(
        id: impl Into<String>,
        dim: usize,
        form: FutureForm,
        eval: impl Fn(&AnticipatedInput<'_>, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            id: id.into(),
            dim,
            form,
            eval: Arc::new(eval),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new("zero", dim, FutureForm::Conditioned, |_, out| out.fill(0.0))
    }

    pub fn evaluate(&self, input: &AnticipatedInput<'_>, out: &mut [f64]) {
        (self.eval)(input, out)
    }
}

/// `(Y, Z)` on the extended grid; `z` node `k` holds `Z` on `(s_k, s_{k+1}]`.
#[derive(Clone, Debug)]
pub struct AnticipatedSolution {
    pub horizon_steps: usize,
    pub delta_steps: usize,
    pub y: PathProcess,
    pub z: PathProcess,
}

/// Implicit passes for `y(s)` inside each backward step.
const IMPLICIT_PASSES: usize = 3;

/// Solves `dY = -f(s, Y(s), E_s[Y(s+d)], Z(s), E_s[Z(s+d)]) ds + Z dW` on `[0, T]`
/// with `Y = eta`, `Z = zeta` on `[T, T + d]`.
///
/// `ens` lives on the extended grid `[0, T + d]`; `horizon_steps` is the node of `T`.
/// Nodes `horizon_steps..` of `eta` and steps `horizon_steps..` of `zeta` are read.
pub fn solve_anticipated_bsde(
    ens: &BrownianEnsemble,
    horizon_steps: usize,
    eta: &PathProcess,
    zeta: &PathProcess,
    f: &AnticipatedGenerator,
    cfg: &SolverConfig,
) -> Result<AnticipatedSolution> {
    if f.form == FutureForm::Raw {
        return Err(BsvieError::Refused(format!(
            "driver {} reads future values pathwise; such equations need not have adapted solutions \
             (see `demo counterexample --case 4.2`). Supply the future terms as conditional expectations",
            f.id
        )));
    }
    cfg.validate()?;
    let grid = *ens.grid();
    let total = grid.n_steps();
    let n = horizon_steps;
    if n == 0 || n >= total {
        return invalid("horizon node must lie strictly inside the extended grid");
    }
    let d = total - n;
    let dim = f.dim;
    eta.check_compatible(ens)?;
    zeta.check_compatible(ens)?;
    if eta.dim() != dim || zeta.dim() != dim {
        return invalid("terminal data dimension differs from the driver");
    }
    let reg = Regressor::new(ens, cfg.basis)?;
    let dt = grid.dt();
    let len = ens.n_paths() * dim;
    let mut y = PathProcess::zeros(grid, ens.n_paths(), dim);
    let mut z = PathProcess::zeros(grid, ens.n_paths(), dim);
    for k in n..=total {
        y.at_mut(k).copy_from_slice(eta.at(k));
    }
    for k in n..total {
        z.at_mut(k).copy_from_slice(zeta.at(k));
    }
    let mut mean = vec![0.0; len];
    let mut zk = vec![0.0; len];
    let mut fval = vec![0.0; len];
    for k in (0..n).rev() {
        let fit = reg.project_step(k, y.at(k + 1), dim);
        reg.evaluate(k, &fit.mean, dim, &mut mean);
        reg.evaluate(k, &fit.zeta, dim, &mut zk);
        let y_future = reg.fitted(k, y.at(k + d), dim);
        let z_future = reg.fitted(k, z.at(k + d), dim);
        let mut yk = mean.clone();
        for _ in 0..IMPLICIT_PASSES {
            f.evaluate(
                &AnticipatedInput {
                    s_node: k,
                    ensemble: ens,
                    y: &yk,
                    y_future: &y_future,
                    z: &zk,
                    z_future: &z_future,
                },
                &mut fval,
            );
            let drift = reg.fitted(k, &fval, dim);
            let mut change: f64 = 0.0;
            for ((yv, m), dv) in yk.iter_mut().zip(&mean).zip(&drift) {
                let next = m + dv * dt;
                change = change.max((next - *yv).abs());
                *yv = next;
            }
            if change <= cfg.tol * 1e-3 {
                break;
            }
        }
        y.at_mut(k).copy_from_slice(&yk);
        z.at_mut(k).copy_from_slice(&zk);
    }
    Ok(AnticipatedSolution {
        horizon_steps: n,
        delta_steps: d,
        y,
        z,
    })
}
