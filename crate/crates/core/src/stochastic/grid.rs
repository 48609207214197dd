use crate::error::{invalid, Result};

/// Uniform partition `0 = t_0 < t_1 < ... < t_n = T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

/// Builds the uniform grid with `n_steps` intervals on `[0, horizon]`.
pub fn make_grid(horizon: f64, n_steps: usize) -> Result<TimeGrid> {
    TimeGrid::new(horizon, n_steps)
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return invalid(format!("horizon must be positive and finite, got {horizon}"));
        }
        if n_steps < 2 {
            return invalid(format!("at least 2 steps required, got {n_steps}"));
        }
        Ok(Self { horizon, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// Time of node `k`; the last node is exactly the horizon.
    pub fn time(&self, k: usize) -> f64 {
        debug_assert!(k <= self.n_steps);
        if k == self.n_steps {
            self.horizon
        } else {
            self.horizon * k as f64 / self.n_steps as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }

    /// Node index whose time equals `t` up to a relative tolerance of `1e-9 * dt`.
    pub fn node_of(&self, t: f64) -> Option<usize> {
        let x = t / self.dt();
        let k = x.round();
        if k < 0.0 || k > self.n_steps as f64 || (x - k).abs() > 1e-9 {
            return None;
        }
        Some(k as usize)
    }

    /// Grid with the same spacing and `extra` additional steps.
    pub fn extended(&self, extra: usize) -> Self {
        let n = self.n_steps + extra;
        Self {
            horizon: self.dt() * n as f64,
            n_steps: n,
        }
    }

    /// Grid with every `factor` consecutive steps merged.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.n_steps.is_multiple_of(factor) {
            return invalid(format!(
                "coarsening factor {factor} does not divide {} steps",
                self.n_steps
            ));
        }
        Self::new(self.horizon, self.n_steps / factor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_grid() {
        let g = make_grid(1.0, 4).unwrap();
        assert_eq!(g.nodes(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn two_step_grid() {
        let g = make_grid(2.0, 2).unwrap();
        assert_eq!(g.nodes(), vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(make_grid(0.0, 4).is_err());
        assert!(make_grid(-1.0, 4).is_err());
        assert!(make_grid(1.0, 1).is_err());
        assert!(make_grid(f64::NAN, 4).is_err());
    }

    #[test]
    fn last_node_is_horizon() {
        for n in [3, 7, 49, 50, 333] {
            let g = make_grid(0.7, n).unwrap();
            assert_eq!(g.time(n), 0.7);
            let nodes = g.nodes();
            assert!(nodes.windows(2).all(|w| w[1] > w[0]));
            for w in nodes.windows(2) {
                assert!((w[1] - w[0] - g.dt()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn node_lookup_and_coarsening() {
        let g = make_grid(2.0, 50).unwrap();
        assert_eq!(g.node_of(1.0), Some(25));
        assert_eq!(g.node_of(1.01), None);
        let c = g.coarsen(5).unwrap();
        assert_eq!(c.n_steps(), 10);
        assert!(g.coarsen(3).is_err());
        let e = g.extended(10);
        assert_eq!(e.n_steps(), 60);
        assert!((e.horizon() - 2.4).abs() < 1e-12);
    }
}
