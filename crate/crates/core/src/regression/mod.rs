//! Least-squares conditional expectations on polynomial features of `W(s)`.
//!
//! Two projections are available at every node `k`:
//! - `project`: onto `He_b(x_k)`, giving `E_k[.]`;
//! - `project_step`: jointly onto `He_b(x_k)` and `He_b(x_k) dW_k / sqrt(dt)`, giving
//!   both `E_k[.]` and `E_k[. dW_k] / dt` from a single fit. The increment block
//!   removes the sampling cross-talk between the two estimates.
//!
//! Here `x_k = W(t_k) / sqrt(t_k)`. Because the features only see `W(t_k)`, inputs
//! that depend on the path history in a non-Markov way are projected onto their
//! best Markov approximation.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, BsvieError, Result};
use crate::par;
use crate::stochastic::{
    feature_count, hermite, node_degree, state_scale, BrownianEnsemble, Cell, PathProcess,
    MAX_DEGREE,
};

/// Polynomial basis in the standardised Brownian state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasisConfig {
    pub degree: usize,
    pub ridge: f64,
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self {
            degree: 3,
            ridge: 1e-8,
        }
    }
}

impl BasisConfig {
    pub fn with_degree(degree: usize) -> Self {
        Self {
            degree,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree > MAX_DEGREE {
            return invalid(format!("basis degree {} exceeds {MAX_DEGREE}", self.degree));
        }
        if !(self.ridge.is_finite() && self.ridge >= 0.0) {
            return invalid(format!("ridge must be finite and nonnegative, got {}", self.ridge));
        }
        Ok(())
    }
}

/// Designs whose regularised Gram matrix is worse conditioned than this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Debug)]
struct NodeFit {
    degree: usize,
    scale: f64,
    inv: Vec<f64>,
    condition: f64,
    step_inv: Vec<f64>,
    step_condition: f64,
}

/// Per-node condition numbers of the two designs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegressionDiagnostic {
    pub node: usize,
    pub condition: f64,
    pub step_condition: f64,
}

/// Coefficients of a one-step fit at node `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepFit {
    /// Coefficients of `E_k[y]`.
    pub mean: Vec<f64>,
    /// Coefficients of `E_k[y dW_k] / dt`.
    pub zeta: Vec<f64>,
}

/// Precomputed normal equations for every node of an ensemble.
#[derive(Clone, Debug)]
pub struct Regressor<'a> {
    ens: &'a BrownianEnsemble,
    basis: BasisConfig,
    nodes: Vec<NodeFit>,
}

fn invert(node: usize, gram: Vec<f64>, m: usize) -> Result<(Vec<f64>, f64)> {
    let mat = DMatrix::from_row_slice(m, m, &gram);
    let eig = SymmetricEigen::new(mat.clone());
    let max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(BsvieError::NumericalFailure {
            node,
            condition,
            detail: "rank-deficient regression design".into(),
        });
    }
    let inv = mat
        .cholesky()
        .ok_or_else(|| BsvieError::NumericalFailure {
            node,
            condition,
            detail: "Gram matrix not positive definite".into(),
        })?
        .inverse();
    let mut out = vec![0.0; m * m];
    for r in 0..m {
        for c in 0..m {
            out[r * m + c] = inv[(r, c)];
        }
    }
    Ok((out, condition))
}

fn apply(inv: &[f64], m: usize, rhs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; rhs.len()];
    for (o, r) in out.chunks_mut(m).zip(rhs.chunks(m)) {
        for a in 0..m {
            o[a] = (0..m).map(|b| inv[a * m + b] * r[b]).sum();
        }
    }
    out
}

impl<'a> Regressor<'a> {
    /// Builds and factorises the designs at every node of `ens`.
    pub fn new(ens: &'a BrownianEnsemble, basis: BasisConfig) -> Result<Self> {
        basis.validate()?;
        let n = ens.grid().n_steps();
        let fits = par::map(n + 1, |k| Self::fit_node(ens, basis, k));
        let nodes = fits.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(Self { ens, basis, nodes })
    }

    fn fit_node(ens: &BrownianEnsemble, basis: BasisConfig, k: usize) -> Result<NodeFit> {
        let n = ens.grid().n_steps();
        let degree = node_degree(k, basis.degree);
        let nb = feature_count(degree);
        let m = 2 * nb;
        let scale = state_scale(ens.grid(), k);
        let w = ens.w(k);
        let has_step = k < n;
        let dw = if has_step { ens.dw(k) } else { w };
        let inv_sd = 1.0 / ens.grid().dt().sqrt();
        let sums = par::chunked_sum(ens.n_paths(), m * m, |r, acc| {
            let mut v = [0.0; 2 * (MAX_DEGREE + 1)];
            for p in r {
                hermite(w[p] * scale, degree, &mut v[..nb]);
                let u = dw[p] * inv_sd;
                for b in 0..nb {
                    v[nb + b] = v[b] * u;
                }
                for a in 0..m {
                    let va = v[a];
                    for b in a..m {
                        acc[a * m + b] += va * v[b];
                    }
                }
            }
        });
        let np = ens.n_paths() as f64;
        let mut full = vec![0.0; m * m];
        for a in 0..m {
            for b in a..m {
                let x = sums[a * m + b] / np;
                full[a * m + b] = x;
                full[b * m + a] = x;
            }
            full[a * m + a] += basis.ridge;
        }
        let mut plain = vec![0.0; nb * nb];
        for a in 0..nb {
            for b in 0..nb {
                plain[a * nb + b] = full[a * m + b];
            }
        }
        let (inv, condition) = invert(k, plain, nb)?;
        let (step_inv, step_condition) = if has_step {
            invert(k, full, m)?
        } else {
            (Vec::new(), f64::NAN)
        };
        Ok(NodeFit {
            degree,
            scale,
            inv,
            condition,
            step_inv,
            step_condition,
        })
    }

    pub fn ensemble(&self) -> &'a BrownianEnsemble {
        self.ens
    }

    pub fn basis(&self) -> BasisConfig {
        self.basis
    }

    pub fn degree_at(&self, node: usize) -> usize {
        self.nodes[node].degree
    }

    pub fn n_basis(&self, node: usize) -> usize {
        feature_count(self.nodes[node].degree)
    }

    pub fn diagnostics(&self) -> Vec<RegressionDiagnostic> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(node, f)| RegressionDiagnostic {
                node,
                condition: f.condition,
                step_condition: f.step_condition,
            })
            .collect()
    }

    /// Coefficients of `E_node[data]`, laid out `[component][basis]`.
    pub fn project(&self, node: usize, data: &[f64], dim: usize) -> Vec<f64> {
        let fit = &self.nodes[node];
        let nb = feature_count(fit.degree);
        let w = self.ens.w(node);
        let sums = par::chunked_sum(self.ens.n_paths(), nb * dim, |r, acc| {
            let mut h = [0.0; MAX_DEGREE + 1];
            for p in r {
                hermite(w[p] * fit.scale, fit.degree, &mut h);
                for c in 0..dim {
                    let y = data[p * dim + c];
                    for b in 0..nb {
                        acc[c * nb + b] += y * h[b];
                    }
                }
            }
        });
        let np = self.ens.n_paths() as f64;
        let rhs: Vec<f64> = sums.iter().map(|s| s / np).collect();
        apply(&fit.inv, nb, &rhs)
    }

    /// Joint fit of `data` at `node < n` giving `E_node[data]` and `E_node[data dW]/dt`.
    pub fn project_step(&self, node: usize, data: &[f64], dim: usize) -> StepFit {
        let fit = &self.nodes[node];
        assert!(!fit.step_inv.is_empty(), "no step regression at the last node");
        let nb = feature_count(fit.degree);
        let m = 2 * nb;
        let w = self.ens.w(node);
        let dw = self.ens.dw(node);
        let dt = self.ens.grid().dt();
        let inv_sd = 1.0 / dt.sqrt();
        let sums = par::chunked_sum(self.ens.n_paths(), m * dim, |r, acc| {
            let mut h = [0.0; MAX_DEGREE + 1];
            for p in r {
                hermite(w[p] * fit.scale, fit.degree, &mut h);
                let u = dw[p] * inv_sd;
                for c in 0..dim {
                    let y = data[p * dim + c];
                    let yu = y * u;
                    let a = &mut acc[c * m..(c + 1) * m];
                    for b in 0..nb {
                        a[b] += y * h[b];
                        a[nb + b] += yu * h[b];
                    }
                }
            }
        });
        let np = self.ens.n_paths() as f64;
        let rhs: Vec<f64> = sums.iter().map(|s| s / np).collect();
        let coef = apply(&fit.step_inv, m, &rhs);
        let mut mean = Vec::with_capacity(nb * dim);
        let mut zeta = Vec::with_capacity(nb * dim);
        for c in 0..dim {
            mean.extend_from_slice(&coef[c * m..c * m + nb]);
            zeta.extend(coef[c * m + nb..(c + 1) * m].iter().map(|x| x * inv_sd));
        }
        StepFit { mean, zeta }
    }

    /// Basis cell at `node` holding `coeffs`.
    pub fn cell(&self, node: usize, coeffs: Vec<f64>) -> Cell {
        Cell::Basis {
            degree: self.nodes[node].degree,
            coeffs,
        }
    }

    /// Writes the fitted values of `coeffs` at `node` into `out`.
    pub fn evaluate(&self, node: usize, coeffs: &[f64], dim: usize, out: &mut [f64]) {
        let fit = &self.nodes[node];
        let nb = feature_count(fit.degree);
        let w = self.ens.w(node);
        par::fill_rows(out, dim, |first, slab| {
            let mut h = [0.0; MAX_DEGREE + 1];
            for (row, &wp) in slab.chunks_mut(dim).zip(&w[first..]) {
                hermite(wp * fit.scale, fit.degree, &mut h);
                for (c, o) in row.iter_mut().enumerate() {
                    let cf = &coeffs[c * nb..(c + 1) * nb];
                    *o = cf.iter().zip(&h[..nb]).map(|(a, b)| a * b).sum();
                }
            }
        });
    }

    /// Fitted values of `E_node[data]`.
    pub fn fitted(&self, node: usize, data: &[f64], dim: usize) -> Vec<f64> {
        let coeffs = self.project(node, data, dim);
        let mut out = vec![0.0; data.len()];
        self.evaluate(node, &coeffs, dim, &mut out);
        out
    }
}

/// `E_s[samples]` evaluated on every path.
pub fn conditional_expectation(
    samples: &[f64],
    dim: usize,
    s: usize,
    basis: BasisConfig,
    ens: &BrownianEnsemble,
) -> Result<Vec<f64>> {
    if samples.len() != ens.n_paths() * dim {
        return invalid("sample length does not match the ensemble");
    }
    if s > ens.grid().n_steps() {
        return invalid(format!("node {s} beyond the grid"));
    }
    let reg = Regressor::new(ens, basis)?;
    Ok(reg.fitted(s, samples, dim))
}

/// Representation cells `Z(t, j)` for `j = 1..=t`, each measurable at `j - 1`.
pub fn representation_cells(reg: &Regressor<'_>, y_at_t: &[f64], dim: usize, t: usize) -> Vec<Cell> {
    (0..t)
        .map(|k| {
            let fit = reg.project_step(k, y_at_t, dim);
            reg.cell(k, fit.zeta)
        })
        .collect()
}

/// Integrand `Z(t, .)` on `[0, t]` with `Y(t) ~ E[Y(t)] + int_0^t Z(t, s) dW(s)`.
///
/// Node `k < t` of the result carries the integrand on `(s_k, s_{k+1}]`.
pub fn martingale_representation(
    y_at_t: &[f64],
    dim: usize,
    t: usize,
    basis: BasisConfig,
    ens: &BrownianEnsemble,
) -> Result<PathProcess> {
    if y_at_t.len() != ens.n_paths() * dim {
        return invalid("sample length does not match the ensemble");
    }
    if t > ens.grid().n_steps() {
        return invalid(format!("node {t} beyond the grid"));
    }
    let mut out = PathProcess::zeros(*ens.grid(), ens.n_paths(), dim);
    if t == 0 {
        return Ok(out);
    }
    let reg = Regressor::new(ens, basis)?;
    for (k, cell) in representation_cells(&reg, y_at_t, dim, t).iter().enumerate() {
        cell.eval(ens, k, dim, out.at_mut(k));
    }
    Ok(out)
}

/// Relative L2 error of `y - E[y] - sum_{k<t} z_k dW_k`; zero when `y` vanishes.
pub fn reconstruction_error(
    y_at_t: &[f64],
    dim: usize,
    z_slice: &PathProcess,
    ens: &BrownianEnsemble,
    t: usize,
) -> Result<f64> {
    let stoch = crate::stochastic::ito_integral(z_slice, ens, 0, t)?;
    Ok(relative_gap(y_at_t, &stoch, dim, ens.n_paths()))
}

pub(crate) fn relative_gap(y: &[f64], stoch: &[f64], dim: usize, n_paths: usize) -> f64 {
    let np = n_paths as f64;
    let mut mean = vec![0.0; dim];
    for row in y.chunks(dim) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / np;
        }
    }
    let mut err = 0.0;
    let mut norm = 0.0;
    for (p, row) in y.chunks(dim).enumerate() {
        for c in 0..dim {
            let r = row[c] - mean[c] - stoch[p * dim + c];
            err += r * r;
            norm += row[c] * row[c];
        }
    }
    if norm == 0.0 {
        0.0
    } else {
        (err / norm).sqrt()
    }
}
