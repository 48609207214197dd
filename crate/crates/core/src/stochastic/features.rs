//! Polynomial features of the Markov state `W(s)` used by the regression basis.

use super::grid::TimeGrid;

/// Number of basis functions for a given degree.
pub fn feature_count(degree: usize) -> usize {
    degree + 1
}

/// Degree actually used at `node`: `F_0` is trivial, so only the constant survives there.
pub fn node_degree(node: usize, degree: usize) -> usize {
    if node == 0 {
        0
    } else {
        degree
    }
}

/// Standardisation factor `1/sqrt(t_node)` (zero at the origin).
pub fn state_scale(grid: &TimeGrid, node: usize) -> f64 {
    if node == 0 {
        0.0
    } else {
        1.0 / grid.time(node).sqrt()
    }
}

/// Probabilists' Hermite polynomials `He_0..He_degree` at `x`.
#[inline]
pub fn hermite(x: f64, degree: usize, out: &mut [f64]) {
    out[0] = 1.0;
    if degree == 0 {
        return;
    }
    out[1] = x;
    for m in 1..degree {
        out[m + 1] = x * out[m] - m as f64 * out[m - 1];
    }
}
