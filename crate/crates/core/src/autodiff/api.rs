//! Vector-level entry points over the tape.

use super::matrix::Matrix;
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// A map recorded on a tape, taking and returning row-batched nodes.
pub trait DiffMap {
    fn eval(&self, tape: &mut Tape, x: Var) -> Result<Var>;
}

impl<F> DiffMap for F
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    fn eval(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        self(tape, x)
    }
}

/// Evaluates `f` at the row vector `x` without differentiating.
pub fn eval(f: &impl DiffMap, x: &[f64]) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let xv = tape.leaf(Matrix::row_vector(x));
    let y = f.eval(&mut tape, xv)?;
    tape.check_finite()?;
    Ok(tape.value(y).as_slice().to_vec())
}

fn scalar_value(tape: &Tape, y: Var) -> Result<f64> {
    let (r, c) = tape.shape(y);
    if (r, c) != (1, 1) {
        return Err(Error::NonScalar { rows: r, cols: c });
    }
    tape.scalar(y)
}

/// Reverse-mode gradient of a scalar map at `theta`.
pub fn grad(f: &impl DiffMap, theta: &[f64]) -> Result<Vec<f64>> {
    value_and_grad(f, theta).map(|(_, g)| g)
}

pub fn value_and_grad(f: &impl DiffMap, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
    let mut tape = Tape::new();
    let t = tape.leaf(Matrix::row_vector(theta));
    let y = f.eval(&mut tape, t)?;
    let value = scalar_value(&tape, y)?;
    tape.check_finite()?;
    let g = tape.gradients(y, &[t])?[0];
    tape.check_finite()?;
    Ok((value, tape.value(g).as_slice().to_vec()))
}

/// Forward-mode Jacobian-vector product: returns `(f(x), J_f(x) v)`.
pub fn jvp(f: &impl DiffMap, x: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.len() != v.len() {
        return Err(Error::dim("jvp tangent", x.len(), v.len()));
    }
    let mut tape = Tape::new();
    let xv = tape.leaf(Matrix::row_vector(x));
    let vv = tape.leaf(Matrix::row_vector(v));
    let y = f.eval(&mut tape, xv)?;
    tape.check_finite()?;
    let t = tape.tangents(&[xv], &[vv], &[y])?[0];
    tape.check_finite()?;
    Ok((
        tape.value(y).as_slice().to_vec(),
        tape.value(t).as_slice().to_vec(),
    ))
}

/// Reverse-mode vector-Jacobian product `uᵀ J_f(x)`.
pub fn vjp(f: &impl DiffMap, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let xv = tape.leaf(Matrix::row_vector(x));
    let y = f.eval(&mut tape, xv)?;
    if tape.shape(y) != (1, u.len()) {
        return Err(Error::dim("vjp cotangent", tape.shape(y).1, u.len()));
    }
    let seed = tape.leaf(Matrix::row_vector(u));
    let g = tape.gradients_seeded(y, seed, &[xv])?[0];
    tape.check_finite()?;
    Ok(tape.value(g).as_slice().to_vec())
}

/// Full Jacobian assembled row by row from reverse-mode products.
pub fn jacobian(f: &impl DiffMap, x: &[f64]) -> Result<Matrix> {
    let m = eval(f, x)?.len();
    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let mut u = vec![0.0; m];
        u[i] = 1.0;
        rows.push(vjp(f, x, &u)?);
    }
    Matrix::from_rows(&rows)
}

/// In-graph input gradient of a batched scalar network.
///
/// `out` must be `B x 1` with row `b` depending only on row `b` of `z`.
/// The result is `B x n` and stays differentiable.
pub fn input_gradient(tape: &mut Tape, out: Var, z: Var) -> Result<Var> {
    let (_, c) = tape.shape(out);
    if c != 1 {
        return Err(Error::NonScalar {
            rows: tape.shape(out).0,
            cols: c,
        });
    }
    let total = tape.sum_all(out);
    Ok(tape.gradients(total, &[z])?[0])
}

/// `∇_z f(z)` for a scalar map evaluated at a single point.
pub fn input_grad(f: &impl DiffMap, z: &[f64]) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let zv = tape.leaf(Matrix::row_vector(z));
    let y = f.eval(&mut tape, zv)?;
    if tape.shape(y) != (1, 1) {
        let (r, c) = tape.shape(y);
        return Err(Error::NonScalar { rows: r, cols: c });
    }
    let g = input_gradient(&mut tape, y, zv)?;
    tape.check_finite()?;
    Ok(tape.value(g).as_slice().to_vec())
}

/// Outcome of comparing a reverse-mode gradient against central differences.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdReport {
    pub max_abs_error: f64,
    /// Componentwise error over `max(|analytic|, |fd|, 1e-3 · max|analytic|)`.
    pub max_rel_error: f64,
}

/// Relative discrepancy between two gradient vectors (see [`FdReport`]).
pub fn gradient_discrepancy(analytic: &[f64], numeric: &[f64]) -> FdReport {
    let scale = analytic.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = (1e-3 * scale).max(f64::MIN_POSITIVE);
    let mut report = FdReport {
        max_abs_error: 0.0,
        max_rel_error: 0.0,
    };
    for (a, b) in analytic.iter().zip(numeric) {
        let err = (a - b).abs();
        let denom = a.abs().max(b.abs()).max(floor);
        report.max_abs_error = report.max_abs_error.max(err);
        report.max_rel_error = report.max_rel_error.max(err / denom);
    }
    report
}

/// Central-difference gradient of an arbitrary scalar function.
pub fn central_difference(f: impl Fn(&[f64]) -> Result<f64>, point: &[f64], h: f64) -> Result<Vec<f64>> {
    if h <= 0.0 {
        return Err(Error::Domain(format!("finite-difference step must be positive, got {h}")));
    }
    let mut x = point.to_vec();
    let mut g = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        let x0 = x[i];
        x[i] = x0 + h;
        let fp = f(&x)?;
        x[i] = x0 - h;
        let fm = f(&x)?;
        x[i] = x0;
        g.push((fp - fm) / (2.0 * h));
    }
    Ok(g)
}

/// Checks the reverse-mode gradient of `f` at `point` against central
/// differences with step `h`.
pub fn fd_check(f: &impl DiffMap, point: &[f64], h: f64) -> Result<FdReport> {
    let analytic = grad(f, point)?;
    let numeric = central_difference(
        |x| {
            let y = eval(f, x)?;
            if y.len() != 1 {
                return Err(Error::NonScalar { rows: 1, cols: y.len() });
            }
            Ok(y[0])
        },
        point,
        h,
    )?;
    Ok(gradient_discrepancy(&analytic, &numeric))
}
