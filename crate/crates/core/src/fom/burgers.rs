use crate::error::{Error, Result};

use super::pde::{periodic_snapshots, unique_points, GaussianIc, PdeGrid};
use super::snapshot::SnapshotSet;
use super::tridiag::solve_cyclic_tridiagonal;

/// Amplitude, width and grid of one inviscid Burgers run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BurgersParams {
    pub ic: GaussianIc,
    pub grid: PdeGrid,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub max_halvings: usize,
}

impl BurgersParams {
    pub fn new(amplitude: f64, width: f64) -> Self {
        BurgersParams {
            ic: GaussianIc::new(amplitude, width),
            grid: PdeGrid::default(),
            newton_tol: 1e-10,
            max_newton: 50,
            max_halvings: 8,
        }
    }

    pub fn with_grid(mut self, grid: PdeGrid) -> Self {
        self.grid = grid;
        self
    }
}

/// Upwind interface flux for `f(u) = u²/2` and its derivatives in the left and right states.
fn flux(ul: f64, ur: f64) -> (f64, f64, f64) {
    if ul + ur >= 0.0 {
        (0.5 * ul * ul, ul, 0.0)
    } else {
        (0.5 * ur * ur, 0.0, ur)
    }
}

/// Implicit Euler residual `u − u_prev + (Δt/Δx)(F_{j+1/2} − F_{j−1/2})` on periodic unknowns.
pub fn burgers_step_residual(prev: &[f64], u: &[f64], dt: f64, dx: f64) -> Vec<f64> {
    let m = u.len();
    let lam = dt / dx;
    (0..m)
        .map(|j| {
            let right = flux(u[j], u[(j + 1) % m]).0;
            let left = flux(u[(j + m - 1) % m], u[j]).0;
            u[j] - prev[j] + lam * (right - left)
        })
        .collect()
}

/// Continuous-time residual `(x^k − x^{k−1})/Δt + ∂ₓ(u²/2)` of a snapshot pair carrying the
/// duplicated endpoint.
pub fn burgers_residual(prev: &[f64], next: &[f64], dt: f64, dx: f64) -> Vec<f64> {
    burgers_step_residual(unique_points(prev), unique_points(next), dt, dx)
        .into_iter()
        .map(|r| r / dt)
        .collect()
}

fn newton_step(prev: &[f64], dt: f64, dx: f64, p: &BurgersParams) -> Option<Vec<f64>> {
    let m = prev.len();
    let lam = dt / dx;
    let mut u = prev.to_vec();
    for _ in 0..=p.max_newton {
        let r = burgers_step_residual(prev, &u, dt, dx);
        let rn = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if !rn.is_finite() {
            return None;
        }
        if rn <= p.newton_tol {
            return Some(u);
        }
        let (mut a, mut b, mut c) = (vec![0.0; m], vec![1.0; m], vec![0.0; m]);
        for j in 0..m {
            let (_, dl_r, dr_r) = flux(u[j], u[(j + 1) % m]);
            let (_, dl_l, dr_l) = flux(u[(j + m - 1) % m], u[j]);
            b[j] += lam * (dl_r - dr_l);
            c[j] = lam * dr_r;
            a[j] = -lam * dl_l;
        }
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let delta = solve_cyclic_tridiagonal(&a, &b, &c, &rhs).ok()?;
        u.iter_mut().zip(&delta).for_each(|(x, d)| *x += d);
    }
    None
}

/// Advances one output interval, splitting it when Newton stalls.
fn advance(prev: &[f64], dt: f64, dx: f64, p: &BurgersParams, depth: usize) -> Result<Vec<f64>> {
    if let Some(u) = newton_step(prev, dt, dx, p) {
        return Ok(u);
    }
    if depth >= p.max_halvings {
        return Err(Error::Solver(format!("Newton failed to converge with step {dt}")));
    }
    let mid = advance(prev, 0.5 * dt, dx, p, depth + 1)?;
    advance(&mid, 0.5 * dt, dx, p, depth + 1)
}

/// Solves from an arbitrary periodic initial state given on the unique grid points.
pub fn burgers_solve_from(u0: &[f64], p: &BurgersParams) -> Result<SnapshotSet> {
    p.grid.validate()?;
    if u0.len() != p.grid.nx - 1 {
        return Err(Error::dim("Burgers initial state", p.grid.nx - 1, u0.len()));
    }
    let (dt, dx) = (p.grid.dt(), p.grid.dx());
    let mut levels = Vec::with_capacity(p.grid.nt + 1);
    levels.push(u0.to_vec());
    for k in 0..p.grid.nt {
        let next = advance(&levels[k], dt, dx, p, 0)
            .map_err(|e| Error::Solver(format!("Burgers step {} at α = {}, ω = {}: {e}", k + 1, p.ic.amplitude, p.ic.width)))?;
        levels.push(next);
    }
    periodic_snapshots(vec![p.ic.amplitude, p.ic.width], &p.grid, levels)
}

/// Inviscid Burgers with periodic boundaries and a Gaussian initial profile.
pub fn burgers_solve(p: &BurgersParams) -> Result<SnapshotSet> {
    p.ic.validate()?;
    p.grid.validate()?;
    let u0: Vec<f64> = p.grid.interior_points().iter().map(|&x| p.ic.eval(x)).collect();
    burgers_solve_from(&u0, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(nx: usize, nt: usize) -> PdeGrid {
        PdeGrid { nx, nt, ..PdeGrid::default() }
    }

    #[test]
    fn constant_states_are_fixed_points() {
        for c in [0.0, 0.8, -0.5] {
            let p = BurgersParams::new(0.0, 1.0).with_grid(small(101, 50));
            let s = burgers_solve_from(&vec![c; 100], &p).unwrap();
            for k in 0..s.len() {
                assert!(s.state(k).iter().all(|v| (v - c).abs() <= 1e-12));
            }
        }
        let s = burgers_solve(&BurgersParams::new(0.0, 1.0).with_grid(small(101, 50))).unwrap();
        assert_eq!(s.states.max_abs(), 0.0);
    }

    #[test]
    fn default_grid_shapes_and_periodic_copy() {
        let s = burgers_solve(&BurgersParams::new(0.75, 1.0)).unwrap();
        assert_eq!(s.states.shape(), (1001, 1001));
        assert_eq!(s.mu, vec![0.75, 1.0]);
        for k in [0, 500, 1000] {
            assert_eq!(s.state(k)[0], s.state(k)[1000]);
        }
        assert!((s.times[1000] - 2.0).abs() < 1e-12);
        // the profile steepens and moves right
        let peak = |k: usize| (0..1000).max_by(|&a, &b| s.state(k)[a].total_cmp(&s.state(k)[b])).unwrap();
        assert!(peak(1000) > peak(0) + 100);
        let mass = |k: usize| s.state(k)[..1000].iter().sum::<f64>();
        assert!((mass(1000) - mass(0)).abs() < 1e-9 * mass(0));
    }

    #[test]
    fn first_order_grid_refinement() {
        let at = |nx: usize, nt: usize| {
            let s = burgers_solve(&BurgersParams::new(0.75, 1.0).with_grid(small(nx, nt))).unwrap();
            let stride = (nx - 1) / 200;
            (0..=200).map(|j| s.state(nt)[j * stride]).collect::<Vec<f64>>()
        };
        let (c, m, f) = (at(1001, 1000), at(2001, 2000), at(4001, 4000));
        // L1 distance; the max norm is still pre-asymptotic near the steepening front
        let l1 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() * 0.03;
        let ratio = l1(&c, &m) / l1(&m, &f);
        assert!((1.7..2.3).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn residual_vanishes_on_solver_output() {
        let p = BurgersParams::new(0.8, 0.9).with_grid(small(201, 100));
        let s = burgers_solve(&p).unwrap();
        let (dt, dx) = (p.grid.dt(), p.grid.dx());
        for k in 1..s.len() {
            let r = burgers_residual(s.state(k - 1), s.state(k), dt, dx);
            assert!(r.iter().all(|v| v.abs() <= 1e-10 / dt * 1.01));
        }
    }
}
