//! Explicit Runge–Kutta integrators, numeric and on the tape.

use std::fmt;
use std::str::FromStr;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Rk4,
    /// Fehlberg 4(5), 4th-order solution propagated.
    Rkf45,
    /// Bogacki–Shampine 3(2), 3rd-order solution propagated.
    Rk23,
}

impl Scheme {
    pub fn is_adaptive(self) -> bool {
        !matches!(self, Scheme::Rk4)
    }

    pub fn order(self) -> u32 {
        match self {
            Scheme::Rk4 | Scheme::Rkf45 => 4,
            Scheme::Rk23 => 3,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Rk4 => "rk4",
            Scheme::Rkf45 => "rkf45",
            Scheme::Rk23 => "rk23",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rk4" | "rk4_fixed" => Ok(Scheme::Rk4),
            "rkf45" | "rk45" | "rkf45_adaptive" => Ok(Scheme::Rkf45),
            "rk23" | "bs23" | "rk23_adaptive" => Ok(Scheme::Rk23),
            other => Err(Error::Config(format!("unknown integrator '{other}'"))),
        }
    }
}

/// Scheme plus step or tolerances.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorSpec {
    pub scheme: Scheme,
    /// Fixed step for rk4; initial step guess for adaptive schemes.
    pub dt: f64,
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl IntegratorSpec {
    pub fn rk4(dt: f64) -> Self {
        Self {
            scheme: Scheme::Rk4,
            dt,
            rtol: 1e-6,
            atol: 1e-9,
            max_steps: 1_000_000,
        }
    }

    pub fn adaptive(scheme: Scheme, rtol: f64, atol: f64) -> Self {
        Self {
            scheme,
            dt: 1e-2,
            rtol,
            atol,
            max_steps: 1_000_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("integrator step must be positive, got {}", self.dt)));
        }
        if self.scheme.is_adaptive() && !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::Config("integrator tolerances must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Sampled solution with the error estimate of every accepted adaptive step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `(error estimate, allowed error)` per accepted step; empty for rk4.
    pub step_errors: Vec<(f64, f64)>,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.states.last().expect("non-empty trajectory")
    }
}

fn axpy(z: &[f64], h: f64, terms: &[(f64, &[f64])]) -> Vec<f64> {
    let mut out = z.to_vec();
    for (c, k) in terms {
        if *c != 0.0 {
            for (o, v) in out.iter_mut().zip(k.iter()) {
                *o += h * c * v;
            }
        }
    }
    out
}

fn check(v: Vec<f64>, t: f64) -> Result<Vec<f64>> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(Error::BlowUp { t })
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// One step; for adaptive schemes also returns the embedded error vector.
fn step_with_error<F>(f: &mut F, z: &[f64], t: f64, h: f64, scheme: Scheme) -> Result<(Vec<f64>, Option<Vec<f64>>)>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let mut eval = |tt: f64, zz: &[f64]| -> Result<Vec<f64>> { check(f(tt, zz)?, tt) };
    match scheme {
        Scheme::Rk4 => {
            let k1 = eval(t, z)?;
            let k2 = eval(t + 0.5 * h, &axpy(z, h, &[(0.5, &k1)]))?;
            let k3 = eval(t + 0.5 * h, &axpy(z, h, &[(0.5, &k2)]))?;
            let k4 = eval(t + h, &axpy(z, h, &[(1.0, &k3)]))?;
            let next = axpy(z, h, &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)]);
            Ok((check(next, t + h)?, None))
        }
        Scheme::Rkf45 => {
            let k1 = eval(t, z)?;
            let k2 = eval(t + h / 4.0, &axpy(z, h, &[(1.0 / 4.0, &k1)]))?;
            let k3 = eval(t + 3.0 * h / 8.0, &axpy(z, h, &[(3.0 / 32.0, &k1), (9.0 / 32.0, &k2)]))?;
            let k4 = eval(
                t + 12.0 * h / 13.0,
                &axpy(z, h, &[(1932.0 / 2197.0, &k1), (-7200.0 / 2197.0, &k2), (7296.0 / 2197.0, &k3)]),
            )?;
            let k5 = eval(
                t + h,
                &axpy(z, h, &[(439.0 / 216.0, &k1), (-8.0, &k2), (3680.0 / 513.0, &k3), (-845.0 / 4104.0, &k4)]),
            )?;
            let k6 = eval(
                t + h / 2.0,
                &axpy(
                    z,
                    h,
                    &[
                        (-8.0 / 27.0, &k1),
                        (2.0, &k2),
                        (-3544.0 / 2565.0, &k3),
                        (1859.0 / 4104.0, &k4),
                        (-11.0 / 40.0, &k5),
                    ],
                ),
            )?;
            let fourth = axpy(
                z,
                h,
                &[(25.0 / 216.0, &k1), (1408.0 / 2565.0, &k3), (2197.0 / 4104.0, &k4), (-1.0 / 5.0, &k5)],
            );
            let fifth = axpy(
                z,
                h,
                &[
                    (16.0 / 135.0, &k1),
                    (6656.0 / 12825.0, &k3),
                    (28561.0 / 56430.0, &k4),
                    (-9.0 / 50.0, &k5),
                    (2.0 / 55.0, &k6),
                ],
            );
            let err = fourth.iter().zip(&fifth).map(|(a, b)| a - b).collect();
            Ok((check(fourth, t + h)?, Some(err)))
        }
        Scheme::Rk23 => {
            let k1 = eval(t, z)?;
            let k2 = eval(t + h / 2.0, &axpy(z, h, &[(0.5, &k1)]))?;
            let k3 = eval(t + 0.75 * h, &axpy(z, h, &[(0.75, &k2)]))?;
            let third = axpy(z, h, &[(2.0 / 9.0, &k1), (1.0 / 3.0, &k2), (4.0 / 9.0, &k3)]);
            let k4 = eval(t + h, &third)?;
            let second = axpy(z, h, &[(7.0 / 24.0, &k1), (0.25, &k2), (1.0 / 3.0, &k3), (0.125, &k4)]);
            let err = third.iter().zip(&second).map(|(a, b)| a - b).collect();
            Ok((check(third, t + h)?, Some(err)))
        }
    }
}

/// One explicit step of `scheme` (no error control).
pub fn step<F>(mut f: F, z: &[f64], t: f64, dt: f64, scheme: Scheme) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    Ok(step_with_error(&mut f, z, t, dt, scheme)?.0)
}

/// Integrates from `t0` to `t1`, recording every internal step.
pub fn integrate<F>(f: F, z0: &[f64], t0: f64, t1: f64, spec: &IntegratorSpec) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    if !(t1 > t0) {
        return Err(Error::Domain(format!("integration interval must satisfy t1 > t0, got [{t0}, {t1}]")));
    }
    integrate_impl(f, z0, &[t0, t1], spec, true)
}

/// Integrates through the increasing `times` and returns the state at each
/// of them (the first entry is `z0`).
pub fn integrate_at<F>(f: F, z0: &[f64], times: &[f64], spec: &IntegratorSpec) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    if times.is_empty() {
        return Err(Error::Domain("no output times".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("output times must be strictly increasing".into()));
    }
    integrate_impl(f, z0, times, spec, false)
}

fn integrate_impl<F>(mut f: F, z0: &[f64], times: &[f64], spec: &IntegratorSpec, dense: bool) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    spec.validate()?;
    let mut traj = Trajectory {
        times: vec![times[0]],
        states: vec![check(z0.to_vec(), times[0])?],
        step_errors: Vec::new(),
    };
    let mut z = z0.to_vec();
    let mut t = times[0];
    let mut h = spec.dt;
    let mut steps = 0usize;
    let t_end = *times.last().unwrap();
    for &target in &times[1..] {
        let span = target - t;
        if !spec.scheme.is_adaptive() {
            // fixed steps of at most dt that land exactly on the target
            let n = (span / spec.dt - 1e-9).ceil().max(1.0) as usize;
            let hh = span / n as f64;
            for i in 0..n {
                steps += 1;
                if steps > spec.max_steps {
                    return Err(Error::StepLimit { steps, t1: t_end });
                }
                let tt = t + i as f64 * hh;
                z = step_with_error(&mut f, &z, tt, hh, spec.scheme)?.0;
                if dense && i + 1 < n {
                    traj.times.push(tt + hh);
                    traj.states.push(z.clone());
                }
            }
            t = target;
        } else {
            while t < target {
                let remaining = target - t;
                let last = h >= remaining * (1.0 - 1e-12);
                let hh = if last { remaining } else { h };
                if hh <= 1e-14 * t.abs().max(1.0) {
                    return Err(Error::Solver(format!("step size underflow at t = {t}")));
                }
                steps += 1;
                if steps > spec.max_steps {
                    return Err(Error::StepLimit { steps, t1: t_end });
                }
                let (next, err) = step_with_error(&mut f, &z, t, hh, spec.scheme)?;
                let err = inf_norm(&err.expect("adaptive"));
                let allowed = (spec.rtol * inf_norm(&z)).max(spec.atol);
                let q = spec.scheme.order() as f64 + 1.0;
                if err <= allowed {
                    t = if last { target } else { t + hh };
                    z = next;
                    traj.step_errors.push((err, allowed));
                    if dense && t < target {
                        traj.times.push(t);
                        traj.states.push(z.clone());
                    }
                    let grow = if err == 0.0 { 5.0 } else { (0.9 * (allowed / err).powf(1.0 / q)).clamp(0.2, 5.0) };
                    // a truncated final step says nothing about the natural step
                    if !last || grow < 1.0 {
                        h = hh * grow;
                    }
                } else {
                    h = hh * (0.9 * (allowed / err).powf(1.0 / q)).clamp(0.1, 0.9);
                }
            }
        }
        traj.times.push(target);
        traj.states.push(z.clone());
    }
    Ok(traj)
}

/// Fixed-step rk4 from `z` over `dt` in `substeps` steps, recorded on the
/// tape so the result is differentiable. `rhs` must be autonomous.
pub fn rk4_on_tape<F>(tape: &mut Tape, mut rhs: F, z: Var, dt: f64, substeps: usize) -> Result<Var>
where
    F: FnMut(&mut Tape, Var) -> Result<Var>,
{
    if substeps == 0 {
        return Err(Error::Config("substeps must be positive".into()));
    }
    let h = dt / substeps as f64;
    let mut z = z;
    for _ in 0..substeps {
        let k1 = rhs(tape, z)?;
        let s = tape.scale(k1, 0.5 * h);
        let z2 = tape.add(z, s)?;
        let k2 = rhs(tape, z2)?;
        let s = tape.scale(k2, 0.5 * h);
        let z3 = tape.add(z, s)?;
        let k3 = rhs(tape, z3)?;
        let s = tape.scale(k3, h);
        let z4 = tape.add(z, s)?;
        let k4 = rhs(tape, z4)?;
        let a = tape.add(k1, k4)?;
        let b = tape.add(k2, k3)?;
        let b2 = tape.scale(b, 2.0);
        let sum = tape.add(a, b2)?;
        let inc = tape.scale(sum, h / 6.0);
        z = tape.add(z, inc)?;
    }
    Ok(z)
}

/// Stage coefficients `a` and propagated weights `b` of each scheme's explicit tableau.
fn tableau(scheme: Scheme) -> (Vec<Vec<f64>>, Vec<f64>) {
    match scheme {
        Scheme::Rk4 => (
            vec![vec![], vec![0.5], vec![0.0, 0.5], vec![0.0, 0.0, 1.0]],
            vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
        ),
        Scheme::Rkf45 => (
            vec![
                vec![],
                vec![1.0 / 4.0],
                vec![3.0 / 32.0, 9.0 / 32.0],
                vec![1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0],
                vec![439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0],
            ],
            vec![25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -1.0 / 5.0],
        ),
        Scheme::Rk23 => (
            vec![vec![], vec![0.5], vec![0.0, 0.75]],
            vec![2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0],
        ),
    }
}

/// Fixed-step version of any scheme on the tape: `substeps` steps of its propagated
/// solution, without error control. `rhs` must be autonomous.
pub fn rk_on_tape<F>(tape: &mut Tape, mut rhs: F, z: Var, dt: f64, scheme: Scheme, substeps: usize) -> Result<Var>
where
    F: FnMut(&mut Tape, Var) -> Result<Var>,
{
    if scheme == Scheme::Rk4 {
        return rk4_on_tape(tape, rhs, z, dt, substeps);
    }
    if substeps == 0 {
        return Err(Error::Config("substeps must be positive".into()));
    }
    let (a, b) = tableau(scheme);
    let h = dt / substeps as f64;
    let mut z = z;
    for _ in 0..substeps {
        let mut ks: Vec<Var> = Vec::with_capacity(a.len());
        for row in &a {
            let mut zi = z;
            for (&c, &k) in row.iter().zip(&ks) {
                if c != 0.0 {
                    let s = tape.scale(k, h * c);
                    zi = tape.add(zi, s)?;
                }
            }
            ks.push(rhs(tape, zi)?);
        }
        for (&w, &k) in b.iter().zip(&ks) {
            if w != 0.0 {
                let s = tape.scale(k, h * w);
                z = tape.add(z, s)?;
            }
        }
    }
    Ok(z)
}
