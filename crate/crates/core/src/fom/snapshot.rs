use crate::autodiff::Matrix;
use crate::error::{Error, Result};

/// Spatial and temporal spacing of a PDE-sourced snapshot set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridMeta {
    pub dx: f64,
    pub dt: f64,
    pub x_min: f64,
    pub x_max: f64,
}

/// Full-order trajectory at one parameter value. `states` holds one snapshot per row.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSet {
    pub mu: Vec<f64>,
    pub times: Vec<f64>,
    pub states: Matrix,
    pub derivatives: Option<Matrix>,
    pub grid: Option<GridMeta>,
}

impl SnapshotSet {
    pub fn new(mu: Vec<f64>, times: Vec<f64>, states: Matrix) -> Result<Self> {
        let s = SnapshotSet {
            mu,
            times,
            states,
            derivatives: None,
            grid: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_derivatives(mut self, derivatives: Matrix) -> Result<Self> {
        self.derivatives = Some(derivatives);
        self.validate()?;
        Ok(self)
    }

    pub fn with_grid(mut self, grid: GridMeta) -> Self {
        self.grid = Some(grid);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.states.rows() != self.times.len() {
            return Err(Error::dim("snapshot rows", self.times.len(), self.states.rows()));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("snapshot times must be strictly increasing".into()));
        }
        if let Some(d) = &self.derivatives {
            if d.shape() != self.states.shape() {
                return Err(Error::dim(
                    "snapshot derivatives",
                    format!("{:?}", self.states.shape()),
                    format!("{:?}", d.shape()),
                ));
            }
        }
        Ok(())
    }

    /// Number of snapshots.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Full-state dimension `N`.
    pub fn dim(&self) -> usize {
        self.states.cols()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        self.states.row(k)
    }

    pub fn derivative(&self, k: usize) -> Option<&[f64]> {
        self.derivatives.as_ref().map(|d| d.row(k))
    }

    /// Common spacing of the time grid, if it is uniform to a relative `1e-9`.
    pub fn uniform_dt(&self) -> Option<f64> {
        if self.times.len() < 2 {
            return None;
        }
        let span = self.times[self.times.len() - 1] - self.times[0];
        let dt = span / (self.times.len() - 1) as f64;
        let uniform = self.times.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.abs().max(span.abs()));
        uniform.then_some(dt)
    }

    /// Keeps snapshots whose index lies in `range`.
    pub fn slice_time(&self, range: std::ops::Range<usize>) -> Result<SnapshotSet> {
        if range.end > self.len() || range.start > range.end {
            return Err(Error::dim("time slice", self.len(), format!("{range:?}")));
        }
        let pick = |m: &Matrix| {
            let data = range.clone().flat_map(|k| m.row(k).to_vec()).collect();
            Matrix::from_vec(range.len(), m.cols(), data)
        };
        Ok(SnapshotSet {
            mu: self.mu.clone(),
            times: self.times[range.clone()].to_vec(),
            states: pick(&self.states)?,
            derivatives: self.derivatives.as_ref().map(pick).transpose()?,
            grid: self.grid,
        })
    }
}
