use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fom::{
    burgers_residual, burgers_solve, fd_derivatives, heat_residual, heat_solve, subsample, BurgersParams, DifferenceScheme,
    GaussianIc, HeatParams, PdeGrid, SnapshotSet,
};
use crate::integrate::IntegratorSpec;
use crate::train::LatentModel;

use super::predict::rom_predict;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PdeKind {
    Burgers,
    Heat,
}

impl fmt::Display for PdeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PdeKind::Burgers => "burgers",
            PdeKind::Heat => "heat",
        })
    }
}

impl FromStr for PdeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "burgers" => Ok(PdeKind::Burgers),
            "heat" => Ok(PdeKind::Heat),
            _ => Err(Error::Config(format!("unknown PDE problem {s:?}"))),
        }
    }
}

/// A Gaussian-pulse PDE solved on `fom_grid` and learned on the coarser `grid`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PdeProblem {
    pub kind: PdeKind,
    pub fom_grid: PdeGrid,
    pub grid: PdeGrid,
    pub scheme: DifferenceScheme,
}

impl PdeProblem {
    /// Burgers uses backward differences for snapshot derivatives, heat central ones.
    pub fn new(kind: PdeKind, fom_grid: PdeGrid, grid: PdeGrid) -> Result<Self> {
        fom_grid.validate()?;
        grid.validate()?;
        let sx = fom_grid.nx - 1;
        let gx = grid.nx - 1;
        if sx % gx != 0 || fom_grid.nt % grid.nt != 0 || fom_grid.x_min != grid.x_min || fom_grid.x_max != grid.x_max || fom_grid.t_end != grid.t_end {
            return Err(Error::Config("learning grid must subsample the solver grid".into()));
        }
        let scheme = match kind {
            PdeKind::Burgers => DifferenceScheme::Backward,
            PdeKind::Heat => DifferenceScheme::Central,
        };
        Ok(PdeProblem { kind, fom_grid, grid, scheme })
    }

    /// Initial state on the learning grid, duplicated endpoint included.
    pub fn initial_state(&self, mu: &[f64]) -> Result<Vec<f64>> {
        let ic = GaussianIc::from_mu(mu)?;
        let mut u: Vec<f64> = self.grid.interior_points().into_iter().map(|x| ic.eval(x)).collect();
        u.push(u[0]);
        Ok(u)
    }

    /// Continuous-time residual of one implicit-Euler step on the learning grid.
    pub fn residual(&self, prev: &[f64], next: &[f64]) -> Vec<f64> {
        let (dt, dx) = (self.grid.dt(), self.grid.dx());
        match self.kind {
            PdeKind::Burgers => burgers_residual(prev, next, dt, dx),
            PdeKind::Heat => heat_residual(prev, next, dt, dx),
        }
    }

    /// Full-order solve, subsampled to the learning grid, with snapshot derivatives.
    pub fn solve(&self, mu: &[f64]) -> Result<SnapshotSet> {
        let ic = GaussianIc::from_mu(mu)?;
        let full = match self.kind {
            PdeKind::Burgers => burgers_solve(&BurgersParams::new(ic.amplitude, ic.width).with_grid(self.fom_grid))?,
            PdeKind::Heat => heat_solve(&HeatParams::new(ic.amplitude, ic.width).with_grid(self.fom_grid))?,
        };
        let coarse = subsample(&full, (self.fom_grid.nx - 1) / (self.grid.nx - 1), self.fom_grid.nt / self.grid.nt)?;
        fd_derivatives(&coarse, self.scheme)
    }
}

/// Mean squared discrete residual of a predicted trajectory. The first step measures the
/// mismatch to the exact initial state as `(x̃⁰ − u₀)/Δt`.
pub fn trajectory_residual(problem: &PdeProblem, u0: &[f64], states: &crate::autodiff::Matrix) -> Result<f64> {
    if states.rows() == 0 || states.cols() != u0.len() {
        return Err(Error::dim("predicted trajectory width", u0.len(), states.cols()));
    }
    let dt = problem.grid.dt();
    let m = u0.len() - 1;
    let mut sum: f64 = states.row(0)[..m].iter().zip(&u0[..m]).map(|(a, b)| ((a - b) / dt).powi(2)).sum();
    for k in 1..states.rows() {
        sum += problem.residual(states.row(k - 1), states.row(k)).iter().map(|r| r * r).sum::<f64>();
    }
    Ok(sum / (states.rows() * m) as f64)
}

/// Physics-informed error indicator at `mu`: rolls the model out from the analytic initial
/// state on the learning grid and scores it by [`trajectory_residual`]. No full-order solve.
pub fn residual_indicator(model: &LatentModel, mu: &[f64], problem: &PdeProblem, spec: &IntegratorSpec) -> Result<f64> {
    let u0 = problem.initial_state(mu)?;
    let pred = rom_predict(model, mu, &u0, &problem.grid.times(), spec)?;
    trajectory_residual(problem, &u0, &pred.states)
}
