use crate::autodiff::Matrix;
use crate::error::{Error, Result};

use super::snapshot::{GridMeta, SnapshotSet};

/// Periodic space-time grid. `nx` counts points including the duplicated right endpoint,
/// `nt` counts time intervals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PdeGrid {
    pub nx: usize,
    pub nt: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub t_end: f64,
}

impl Default for PdeGrid {
    fn default() -> Self {
        PdeGrid {
            nx: 1001,
            nt: 1000,
            x_min: -3.0,
            x_max: 3.0,
            t_end: 2.0,
        }
    }
}

impl PdeGrid {
    pub fn validate(&self) -> Result<()> {
        if self.nx < 4 || self.nt < 2 {
            return Err(Error::Config(format!("grid too small: nx = {}, nt = {}", self.nx, self.nt)));
        }
        if !(self.x_max > self.x_min) || !(self.t_end > 0.0) {
            return Err(Error::Config("grid needs a positive domain and final time".into()));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.nt as f64
    }

    /// Grid points without the duplicated endpoint.
    pub fn interior_points(&self) -> Vec<f64> {
        (0..self.nx - 1).map(|j| self.x_min + j as f64 * self.dx()).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.nt).map(|k| k as f64 * self.dt()).collect()
    }

    pub fn meta(&self) -> GridMeta {
        GridMeta {
            dx: self.dx(),
            dt: self.dt(),
            x_min: self.x_min,
            x_max: self.x_max,
        }
    }
}

/// `α·exp(−x²/(2ω²))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianIc {
    pub amplitude: f64,
    pub width: f64,
}

impl GaussianIc {
    pub fn new(amplitude: f64, width: f64) -> Self {
        GaussianIc { amplitude, width }
    }

    pub fn from_mu(mu: &[f64]) -> Result<Self> {
        match mu {
            [a, w] => Ok(GaussianIc::new(*a, *w)),
            _ => Err(Error::dim("Gaussian parameters", 2, mu.len())),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.amplitude * (-x * x / (2.0 * self.width * self.width)).exp()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0) || !self.amplitude.is_finite() {
            return Err(Error::Config(format!("invalid Gaussian: amplitude {}, width {}", self.amplitude, self.width)));
        }
        Ok(())
    }
}

/// Builds a snapshot set from periodic states given without the duplicated endpoint.
pub(crate) fn periodic_snapshots(mu: Vec<f64>, grid: &PdeGrid, levels: Vec<Vec<f64>>) -> Result<SnapshotSet> {
    let nt = levels.len();
    let mut states = Matrix::zeros(nt, grid.nx);
    for (k, u) in levels.iter().enumerate() {
        let row = states.row_mut(k);
        row[..u.len()].copy_from_slice(u);
        row[u.len()] = u[0];
    }
    Ok(SnapshotSet::new(mu, grid.times(), states)?.with_grid(grid.meta()))
}

/// Drops the duplicated endpoint of a periodic state.
pub fn unique_points(x: &[f64]) -> &[f64] {
    &x[..x.len().saturating_sub(1)]
}
