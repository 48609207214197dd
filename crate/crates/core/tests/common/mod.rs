//! Helpers and independent oracles shared by the integration tests.
#![allow(dead_code)]

use bsvie::stochastic::{BrownianEnsemble, PathProcess, TimeGrid};
use nalgebra::{DMatrix, DVector};

pub fn ensemble(t: f64, n: usize, paths: usize, seed: u64) -> BrownianEnsemble {
    BrownianEnsemble::simulate(TimeGrid::new(t, n).unwrap(), paths, seed).unwrap()
}

/// RMS of `a[p] - b(p)`.
pub fn rms(a: &[f64], b: impl Fn(usize) -> f64) -> f64 {
    (a.iter().enumerate().map(|(p, v)| (v - b(p)).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

/// RMS over nodes `from..=to` of `y - f(t, W)`.
pub fn process_rms(y: &PathProcess, ens: &BrownianEnsemble, nodes: std::ops::RangeInclusive<usize>, f: impl Fn(f64, f64) -> f64) -> f64 {
    let grid = *ens.grid();
    let mut sq = 0.0;
    let mut count = 0usize;
    for i in nodes {
        let t = grid.time(i);
        for (v, w) in y.at(i).iter().zip(ens.w(i)) {
            sq += (v - f(t, *w)).powi(2);
            count += 1;
        }
    }
    (sq / count as f64).sqrt()
}

/// Least squares on raw monomials `1, w, ..., w^degree`; returns fitted values.
pub struct MonomialFit {
    design: DMatrix<f64>,
    svd: nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl MonomialFit {
    pub fn new(w: &[f64], degree: usize) -> Self {
        // W(0) = 0 on every path: only the constant is identifiable
        let deg = if w.iter().all(|x| *x == 0.0) { 0 } else { degree };
        let design = DMatrix::from_fn(w.len(), deg + 1, |p, b| w[p].powi(b as i32));
        let svd = design.clone().svd(true, true);
        Self { design, svd }
    }

    pub fn fitted(&self, data: &[f64]) -> Vec<f64> {
        let rhs = DVector::from_column_slice(data);
        let coef = self.svd.solve(&rhs, 1e-12).expect("svd solve");
        (&self.design * coef).iter().copied().collect()
    }
}

/// Row `t` of the `fbsde-sin` family by fixed-point iteration on `Z^t`:
/// `X^t(T) = 1 + kappa int_t^T Z^t ds`, `Y^t = E[sin(W_T) X^t(T) | F_s]`,
/// backward Euler with plain monomial regressions. Returns `Y^t(t)` per path.
pub fn coupled_fbsde_oracle(ens: &BrownianEnsemble, t: usize, kappa: f64, degree: usize) -> Vec<f64> {
    let grid = *ens.grid();
    let n = grid.n_steps();
    let dt = grid.dt();
    let paths = ens.n_paths();
    let fits: Vec<MonomialFit> = (t..n).map(|k| MonomialFit::new(ens.w(k), degree)).collect();
    let mut z = vec![vec![0.0; paths]; n - t];
    let mut y_t = vec![0.0; paths];
    for _ in 0..60 {
        let mut v: Vec<f64> = (0..paths)
            .map(|p| {
                let x = 1.0 + kappa * dt * z.iter().map(|zk| zk[p]).sum::<f64>();
                ens.w(n)[p].sin() * x
            })
            .collect();
        let mut z_new = vec![vec![0.0; paths]; n - t];
        for k in (t..n).rev() {
            let fit = &fits[k - t];
            let prod: Vec<f64> = v.iter().zip(ens.dw(k)).map(|(a, d)| a * d / dt).collect();
            z_new[k - t] = fit.fitted(&prod);
            v = fit.fitted(&v);
        }
        let change = z_new
            .iter()
            .zip(&z)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        z = z_new;
        y_t = v;
        if change < 1e-10 {
            break;
        }
    }
    y_t
}

/// The first `m` paths of `ens`.
pub fn subset(ens: &BrownianEnsemble, m: usize) -> BrownianEnsemble {
    let grid = *ens.grid();
    let mut inc = Vec::with_capacity(m * grid.n_steps());
    for k in 0..grid.n_steps() {
        inc.extend_from_slice(&ens.dw(k)[..m]);
    }
    BrownianEnsemble::from_increments(grid, m, ens.seed(), inc).unwrap()
}
