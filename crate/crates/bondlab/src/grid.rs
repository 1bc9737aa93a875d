use crate::error::{LabError, Result};

/// Uniform time grid on `[0, horizon]` shared by calendar time and maturity.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(LabError::InvalidGrid(format!(
                "horizon must be a positive finite number, got {horizon}"
            )));
        }
        if steps < 2 {
            return Err(LabError::InvalidGrid(format!(
                "step count must be at least 2, got {steps}"
            )));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of steps M; the grid has M+1 nodes.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of nodes, M+1.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Node t_k. Computed as a product so the last node is exactly the horizon.
    pub fn node(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.node(k)).collect()
    }

    /// Composite trapezoid of `values` (one per node) over `[node(a), node(b)]`.
    pub fn trapezoid(&self, values: &[f64], a: usize, b: usize) -> f64 {
        debug_assert!(a <= b && b < self.len());
        let dt = self.dt();
        let mut acc = 0.0;
        for l in a..b {
            acc += 0.5 * (values[l] + values[l + 1]) * dt;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_grids() {
        assert!(TimeGrid::new(0.0, 10).is_err());
        assert!(TimeGrid::new(-1.0, 10).is_err());
        assert!(TimeGrid::new(1.0, 1).is_err());
    }

    #[test]
    fn nodes_are_uniform_and_hit_horizon() {
        let g = TimeGrid::new(2.0, 8).unwrap();
        let nodes = g.nodes();
        assert_eq!(nodes.len(), 9);
        assert_eq!(nodes[0], 0.0);
        assert_eq!(nodes[8], 2.0);
        for w in nodes.windows(2) {
            assert!((w[1] - w[0] - g.dt()).abs() < 1e-15);
        }
    }

    #[test]
    fn trapezoid_linear_is_exact() {
        let g = TimeGrid::new(1.0, 100).unwrap();
        let vals: Vec<f64> = g.nodes().iter().map(|t| 2.0 * t + 1.0).collect();
        let exact = 1.0 + 1.0; // int_0^1 (2t+1) dt = 2
        assert!((g.trapezoid(&vals, 0, 100) - exact).abs() < 1e-14);
    }
}
