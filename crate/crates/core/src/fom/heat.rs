use crate::error::{Error, Result};

use super::pde::{periodic_snapshots, unique_points, GaussianIc, PdeGrid};
use super::snapshot::SnapshotSet;
use super::tridiag::solve_cyclic_tridiagonal;

/// Gaussian initial profile and grid of one heat-equation run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeatParams {
    pub ic: GaussianIc,
    pub grid: PdeGrid,
}

impl HeatParams {
    pub fn new(amplitude: f64, width: f64) -> Self {
        HeatParams {
            ic: GaussianIc::new(amplitude, width),
            grid: PdeGrid::default(),
        }
    }

    pub fn with_grid(mut self, grid: PdeGrid) -> Self {
        self.grid = grid;
        self
    }
}

/// `(x^k − x^{k−1})/Δt − D₂x^k` for snapshots carrying the duplicated endpoint.
pub fn heat_residual(prev: &[f64], next: &[f64], dt: f64, dx: f64) -> Vec<f64> {
    let (u0, u) = (unique_points(prev), unique_points(next));
    let m = u.len();
    let h2 = dx * dx;
    (0..m)
        .map(|j| (u[j] - u0[j]) / dt - (u[(j + m - 1) % m] - 2.0 * u[j] + u[(j + 1) % m]) / h2)
        .collect()
}

/// Solves from an arbitrary periodic initial state on the unique grid points.
pub fn heat_solve_from(u0: &[f64], p: &HeatParams) -> Result<SnapshotSet> {
    p.grid.validate()?;
    let m = p.grid.nx - 1;
    if u0.len() != m {
        return Err(Error::dim("heat initial state", m, u0.len()));
    }
    let r = p.grid.dt() / (p.grid.dx() * p.grid.dx());
    let a = vec![-r; m];
    let b = vec![1.0 + 2.0 * r; m];
    let mut levels = Vec::with_capacity(p.grid.nt + 1);
    levels.push(u0.to_vec());
    for k in 0..p.grid.nt {
        let next = solve_cyclic_tridiagonal(&a, &b, &a, &levels[k])?;
        levels.push(next);
    }
    periodic_snapshots(vec![p.ic.amplitude, p.ic.width], &p.grid, levels)
}

/// Heat equation with periodic boundaries, implicit Euler and the central Laplacian.
pub fn heat_solve(p: &HeatParams) -> Result<SnapshotSet> {
    p.ic.validate()?;
    p.grid.validate()?;
    let u0: Vec<f64> = p.grid.interior_points().iter().map(|&x| p.ic.eval(x)).collect();
    heat_solve_from(&u0, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_profile_stays_constant() {
        let p = HeatParams::new(0.0, 1.0).with_grid(PdeGrid { nx: 201, nt: 100, ..PdeGrid::default() });
        let s = heat_solve_from(&vec![0.6; 200], &p).unwrap();
        let worst = (0..s.len()).flat_map(|k| s.state(k).to_vec()).fold(0.0f64, |a, v| a.max((v - 0.6).abs()));
        assert!(worst <= 1e-12, "{worst}");
    }

    #[test]
    fn mass_conserved_and_peak_decays() {
        let s = heat_solve(&HeatParams::new(0.75, 1.0)).unwrap();
        let mass = |k: usize| unique_points(s.state(k)).iter().sum::<f64>();
        let peak = |k: usize| s.state(k).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let m0 = mass(0);
        for k in 1..s.len() {
            assert!((mass(k) - mass(k - 1)).abs() <= 1e-13 * m0, "step {k}");
            assert!(peak(k) < peak(k - 1));
        }
    }

    #[test]
    fn residual_small_on_solver_output() {
        let p = HeatParams::new(0.7, 0.95).with_grid(PdeGrid { nx: 201, nt: 100, ..PdeGrid::default() });
        let s = heat_solve(&p).unwrap();
        for k in 1..s.len() {
            let r = heat_residual(s.state(k - 1), s.state(k), p.grid.dt(), p.grid.dx());
            assert!(r.iter().all(|v| v.abs() < 1e-9));
        }
    }
}
