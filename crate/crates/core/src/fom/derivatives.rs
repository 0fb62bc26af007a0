use crate::autodiff::Matrix;
use crate::error::{Error, Result};

use super::snapshot::{GridMeta, SnapshotSet};

/// Finite-difference stencil used to estimate `ẋ^k` from snapshots.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DifferenceScheme {
    /// `(x^{k+1} − x^{k−1}) / 2Δt`, one-sided at both ends.
    #[default]
    Central,
    /// `(x^k − x^{k−1}) / Δt`, forward at `k = 0`.
    Backward,
}

impl std::str::FromStr for DifferenceScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "central" => Ok(DifferenceScheme::Central),
            "backward" => Ok(DifferenceScheme::Backward),
            other => Err(Error::Config(format!("unknown difference scheme '{other}'"))),
        }
    }
}

/// Attaches finite-difference time derivatives to `set`.
pub fn fd_derivatives(set: &SnapshotSet, scheme: DifferenceScheme) -> Result<SnapshotSet> {
    let nt = set.len();
    if nt < 3 {
        return Err(Error::Config(format!("finite differences need at least 3 snapshots, got {nt}")));
    }
    let dt = set
        .uniform_dt()
        .ok_or_else(|| Error::Config("finite differences need a uniform time grid".into()))?;
    let n = set.dim();
    let x = &set.states;
    let mut d = Matrix::zeros(nt, n);
    let diff = |out: &mut [f64], a: &[f64], b: &[f64], h: f64| {
        for ((o, &p), &q) in out.iter_mut().zip(a).zip(b) {
            *o = (p - q) / h;
        }
    };
    for k in 0..nt {
        let row = d.row_mut(k);
        match scheme {
            DifferenceScheme::Central if k == 0 => diff(row, x.row(1), x.row(0), dt),
            DifferenceScheme::Central if k == nt - 1 => diff(row, x.row(k), x.row(k - 1), dt),
            DifferenceScheme::Central => diff(row, x.row(k + 1), x.row(k - 1), 2.0 * dt),
            DifferenceScheme::Backward if k == 0 => diff(row, x.row(1), x.row(0), dt),
            DifferenceScheme::Backward => diff(row, x.row(k), x.row(k - 1), dt),
        }
    }
    set.clone().with_derivatives(d)
}

/// Strided selection in space and time. Strides must divide the interval counts.
pub fn subsample(set: &SnapshotSet, space_stride: usize, time_stride: usize) -> Result<SnapshotSet> {
    if space_stride == 0 || time_stride == 0 {
        return Err(Error::Config("strides must be positive".into()));
    }
    let (nt, n) = (set.len(), set.dim());
    if nt == 0 || (nt - 1) % time_stride != 0 {
        return Err(Error::Config(format!("time stride {time_stride} does not divide {} intervals", nt.saturating_sub(1))));
    }
    if n == 0 || (n - 1) % space_stride != 0 {
        return Err(Error::Config(format!("space stride {space_stride} does not divide {} intervals", n.saturating_sub(1))));
    }
    let rows: Vec<usize> = (0..nt).step_by(time_stride).collect();
    let cols: Vec<usize> = (0..n).step_by(space_stride).collect();
    let pick = |m: &Matrix| {
        let data = rows.iter().flat_map(|&r| cols.iter().map(move |&c| m.get(r, c))).collect();
        Matrix::from_vec(rows.len(), cols.len(), data)
    };
    Ok(SnapshotSet {
        mu: set.mu.clone(),
        times: rows.iter().map(|&r| set.times[r]).collect(),
        states: pick(&set.states)?,
        derivatives: set.derivatives.as_ref().map(pick).transpose()?,
        grid: set.grid.map(|g| GridMeta {
            dx: g.dx * space_stride as f64,
            dt: g.dt * time_stride as f64,
            ..g
        }),
    })
}
