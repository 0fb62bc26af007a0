use crate::error::{Error, Result};

/// Thomas algorithm for `a_i x_{i−1} + b_i x_i + c_i x_{i+1} = d_i` (`a_0`, `c_{n−1}` ignored).
pub fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    if a.len() != n || c.len() != n || d.len() != n {
        return Err(Error::dim("tridiagonal system", n, format!("{}/{}/{}", a.len(), c.len(), d.len())));
    }
    if n == 0 {
        return Ok(vec![]);
    }
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    let mut denom = b[0];
    for i in 0..n {
        if i > 0 {
            denom = b[i] - a[i] * cp[i - 1];
        }
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::Solver(format!("singular tridiagonal pivot at row {i}")));
        }
        cp[i] = c[i] / denom;
        dp[i] = (d[i] - if i > 0 { a[i] * dp[i - 1] } else { 0.0 }) / denom;
    }
    let mut x = dp;
    for i in (0..n - 1).rev() {
        x[i] -= cp[i] * x[i + 1];
    }
    Ok(x)
}

/// Periodic variant: row 0 couples to `x_{n−1}` through `a_0`, row `n−1` to `x_0` through `c_{n−1}`.
/// Sherman–Morrison on top of the Thomas solve.
pub fn solve_cyclic_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    if n < 3 {
        return Err(Error::Config(format!("cyclic tridiagonal system needs n >= 3, got {n}")));
    }
    let (alpha, beta) = (c[n - 1], a[0]);
    let gamma = if b[0] != 0.0 { -b[0] } else { -1.0 };
    let mut bb = b.to_vec();
    bb[0] -= gamma;
    bb[n - 1] -= alpha * beta / gamma;
    let x = solve_tridiagonal(a, &bb, c, d)?;
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = solve_tridiagonal(a, &bb, c, &u)?;
    let fact_den = 1.0 + z[0] + beta * z[n - 1] / gamma;
    if fact_den == 0.0 || !fact_den.is_finite() {
        return Err(Error::Solver("singular cyclic tridiagonal system".into()));
    }
    let fact = (x[0] + beta * x[n - 1] / gamma) / fact_den;
    Ok(x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect())
}
