use super::brownian::BrownianEnsemble;
use super::process::PathProcess;
use crate::error::{invalid, Result};

fn check_range(p: &PathProcess, from: usize, to: usize) -> Result<()> {
    if from > to {
        return invalid(format!("integration range reversed: from {from} > to {to}"));
    }
    if to > p.grid().n_steps() {
        return invalid(format!("integration end {to} beyond last node"));
    }
    Ok(())
}

/// Left-point Itô sum `sum_{from <= k < to} z(t_k) (W(t_{k+1}) - W(t_k))` per path.
pub fn ito_integral(
    integrand: &PathProcess,
    ens: &BrownianEnsemble,
    from: usize,
    to: usize,
) -> Result<Vec<f64>> {
    check_range(integrand, from, to)?;
    integrand.check_compatible(ens)?;
    let dim = integrand.dim();
    let mut out = vec![0.0; ens.n_paths() * dim];
    for k in from..to {
        let z = integrand.at(k);
        let dw = ens.dw(k);
        for (p, &d) in dw.iter().enumerate() {
            for c in 0..dim {
                out[p * dim + c] += z[p * dim + c] * d;
            }
        }
    }
    Ok(out)
}

/// Left-point Riemann sum `sum_{from <= k < to} x(t_k) dt` per path.
pub fn lebesgue_integral(integrand: &PathProcess, from: usize, to: usize) -> Result<Vec<f64>> {
    check_range(integrand, from, to)?;
    let dt = integrand.grid().dt();
    let mut out = vec![0.0; integrand.n_paths() * integrand.dim()];
    for k in from..to {
        for (o, x) in out.iter_mut().zip(integrand.at(k)) {
            *o += x * dt;
        }
    }
    Ok(out)
}

/// Empirical ratio `E(int |z|^2 ds)^{p/2} / E|int z dW|^p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentRatio {
    pub ratio: f64,
    /// Set when `z` vanishes identically; `ratio` is then 1 by convention.
    pub degenerate: bool,
}

pub fn martingale_moment_ratio(z: &PathProcess, ens: &BrownianEnsemble, p: f64) -> Result<MomentRatio> {
    if !(p > 1.0) {
        return invalid(format!("moment order must exceed 1, got {p}"));
    }
    let n = ens.grid().n_steps();
    let stoch = ito_integral(z, ens, 0, n)?;
    let dim = z.dim();
    let dt = ens.grid().dt();
    let mut quad = vec![0.0; ens.n_paths()];
    for k in 0..n {
        for (q, row) in quad.iter_mut().zip(z.at(k).chunks(dim)) {
            *q += row.iter().map(|x| x * x).sum::<f64>() * dt;
        }
    }
    let np = ens.n_paths() as f64;
    let num = quad.iter().map(|q| q.powf(p / 2.0)).sum::<f64>() / np;
    let den = stoch
        .chunks(dim)
        .map(|row| row.iter().map(|x| x * x).sum::<f64>().powf(p / 2.0))
        .sum::<f64>()
        / np;
    if num == 0.0 {
        return Ok(MomentRatio {
            ratio: 1.0,
            degenerate: true,
        });
    }
    Ok(MomentRatio {
        ratio: num / den,
        degenerate: false,
    })
}
