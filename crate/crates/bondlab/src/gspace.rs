//! Discretization of the Sobolev space `G = H^1[0, horizon]`.
//!
//! A curve `g` on the grid carries the norm
//! `|g|_G^2 = g(0)^2 + sum_l ((g_{l+1} - g_l)/dt)^2 dt`, realized through the
//! bidiagonal coordinate map `g -> (g_0, (g_1-g_0)/sqrt(dt), ...)` which turns
//! the G inner product into the plain Euclidean one. Forward differences are
//! exact on piecewise-linear curves, so the linear-curve anchors are exact.

use nalgebra::{DMatrix, DVector};

use crate::error::{LabError, Result};
use crate::grid::TimeGrid;

/// The discrete G metric on curves sampled at the grid nodes.
#[derive(Debug, Clone)]
pub struct GMetric {
    grid: TimeGrid,
}

impl GMetric {
    pub fn new(grid: TimeGrid) -> Self {
        Self { grid }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn check(&self, curve: &[f64]) -> Result<()> {
        if curve.len() != self.grid.len() {
            return Err(LabError::LengthMismatch { got: curve.len(), expected: self.grid.len() });
        }
        Ok(())
    }

    /// Coordinate map `T` with `|g|_G = |T g|_2`; the factor of the Gram
    /// matrix `M_G = T' T`.
    pub fn to_coords(&self, curve: &[f64]) -> Result<DVector<f64>> {
        self.check(curve)?;
        let inv_sqrt_dt = 1.0 / self.grid.dt().sqrt();
        let mut out = DVector::zeros(curve.len());
        out[0] = curve[0];
        for l in 1..curve.len() {
            out[l] = (curve[l] - curve[l - 1]) * inv_sqrt_dt;
        }
        Ok(out)
    }

    /// Inverse of `to_coords` (cumulative sum).
    pub fn from_coords(&self, coords: &DVector<f64>) -> Result<Vec<f64>> {
        if coords.len() != self.grid.len() {
            return Err(LabError::LengthMismatch { got: coords.len(), expected: self.grid.len() });
        }
        let sqrt_dt = self.grid.dt().sqrt();
        let mut out = Vec::with_capacity(coords.len());
        out.push(coords[0]);
        for l in 1..coords.len() {
            out.push(out[l - 1] + coords[l] * sqrt_dt);
        }
        Ok(out)
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        Ok(self.to_coords(a)?.dot(&self.to_coords(b)?))
    }

    /// Applies `T` columnwise to a matrix of curves.
    pub fn to_coords_matrix(&self, curves: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if curves.nrows() != self.grid.len() {
            return Err(LabError::LengthMismatch {
                got: curves.nrows(),
                expected: self.grid.len(),
            });
        }
        let inv_sqrt_dt = 1.0 / self.grid.dt().sqrt();
        let mut out = curves.clone();
        for j in 0..curves.ncols() {
            for l in (1..curves.nrows()).rev() {
                out[(l, j)] = (curves[(l, j)] - curves[(l - 1, j)]) * inv_sqrt_dt;
            }
        }
        Ok(out)
    }
}

/// G-norm of a curve on the grid.
pub fn g_norm(curve: &[f64], metric: &GMetric) -> Result<f64> {
    Ok(metric.to_coords(curve)?.norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metric(steps: usize) -> GMetric {
        GMetric::new(TimeGrid::new(1.0, steps).unwrap())
    }

    #[test]
    fn constant_curve_norm_is_its_level() {
        let m = metric(64);
        let g = vec![5.0; 65];
        assert!((g_norm(&g, &m).unwrap() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn linear_curve_norm_is_exact_for_any_step_count() {
        for steps in [2, 7, 100, 1000] {
            let m = metric(steps);
            let g: Vec<f64> = m.grid().nodes();
            assert!((g_norm(&g, &m).unwrap() - 1.0).abs() < 1e-12, "steps={steps}");
        }
    }

    #[test]
    fn quadratic_curve_norm_converges_to_closed_form() {
        let m = metric(1000);
        let g: Vec<f64> = m.grid().nodes().iter().map(|t| t * t).collect();
        // |g|_G^2 = int_0^1 (2t)^2 dt = 4/3
        assert!((g_norm(&g, &m).unwrap() - (4.0f64 / 3.0).sqrt()).abs() < 1e-3);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let m = metric(10);
        assert!(g_norm(&[1.0; 4], &m).is_err());
    }

    #[test]
    fn coords_roundtrip() {
        let m = metric(17);
        let g: Vec<f64> = m.grid().nodes().iter().map(|t| (3.0 * t).sin()).collect();
        let back = m.from_coords(&m.to_coords(&g).unwrap()).unwrap();
        for (a, b) in g.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
