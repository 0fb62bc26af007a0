use crate::autodiff::{norm2, Matrix, Tape};
use crate::dynamics::Dynamics;
use crate::error::{Error, Result};
use crate::fom::SnapshotSet;
use crate::integrate::IntegratorSpec;
use crate::nn::Autoencoder;
use crate::train::LatentModel;

use super::metrics::{extrap_error, max_rel_error};
use super::predict::rom_predict;

/// Error components along one trajectory. Every series is indexed like `times`;
/// `eps_jac` and `eps_mod` are absent when the truth carries no time derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub times: Vec<f64>,
    /// `‖x(t) − φ_d(z(t))‖`
    pub measured: Vec<f64>,
    pub eps_int: Vec<f64>,
    pub eps_rec: Vec<f64>,
    pub eps_jac: Option<Vec<f64>>,
    pub eps_mod: Option<Vec<f64>>,
    pub rel_l2: f64,
    pub max_rel_percent: f64,
}

impl ErrorReport {
    /// Sum of the available components at each time.
    pub fn bound(&self) -> Vec<f64> {
        (0..self.times.len())
            .map(|k| {
                self.eps_int[k]
                    + self.eps_rec[k]
                    + self.eps_jac.as_ref().map_or(0.0, |v| v[k])
                    + self.eps_mod.as_ref().map_or(0.0, |v| v[k])
            })
            .collect()
    }

    /// Smallest `C` with `measured ≤ C · bound` at every time where the bound is positive.
    pub fn constant(&self) -> f64 {
        self.measured
            .iter()
            .zip(self.bound())
            .filter(|(_, b)| *b > 0.0)
            .map(|(m, b)| m / b)
            .fold(0.0, f64::max)
    }
}

/// Cumulative trapezoid rule; the first entry is zero.
pub fn cumulative_trapezoid(times: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(f.len());
    let mut acc = 0.0;
    for k in 0..f.len() {
        if k > 0 {
            acc += 0.5 * (times[k] - times[k - 1]) * (f[k] + f[k - 1]);
        }
        out.push(acc);
    }
    out
}

fn row_norms(m: &Matrix) -> Vec<f64> {
    (0..m.rows()).map(|k| norm2(m.row(k))).collect()
}

/// Pointwise integrands at each snapshot.
struct Integrands {
    decoded: Matrix,
    int: Vec<f64>,
    rec: Vec<f64>,
    jac: Option<Vec<f64>>,
    model: Option<Vec<f64>>,
}

fn integrands(ae: &Autoencoder, dynamics: &Dynamics, states: &Matrix, derivatives: Option<&Matrix>, latent: &Matrix) -> Result<Integrands> {
    let mut tape = Tape::new();
    let enc = ae.bind(&mut tape)?;
    let x = tape.constant(states.clone());
    let zhat = enc.encode(&mut tape, x)?;
    let xhat = enc.decode(&mut tape, zhat)?;
    let z = tape.constant(latent.clone());
    let xz = enc.decode(&mut tape, z)?;

    let zdiff = tape.sub(zhat, z)?;
    let rdiff = tape.sub(x, xhat)?;
    let int = row_norms(tape.value(zdiff));
    let rec = row_norms(tape.value(rdiff));

    let (jac, model) = match derivatives {
        None => (None, None),
        Some(d) => {
            let xdot = tape.constant(d.clone());
            let je = tape.tangents(&[x], &[xdot], &[zhat])?[0];
            let jj = tape.tangents(&[zhat], &[je], &[xhat])?[0];
            let jres = tape.sub(xdot, jj)?;
            let bound = dynamics.bind(&mut tape)?;
            let f = bound.rhs(&mut tape, z)?;
            let jdf = tape.tangents(&[z], &[f], &[xz])?[0];
            let m1 = tape.sub(je, f)?;
            let m2 = tape.sub(xdot, jdf)?;
            let a = row_norms(tape.value(m1));
            let b = row_norms(tape.value(m2));
            (
                Some(row_norms(tape.value(jres))),
                Some(a.iter().zip(&b).map(|(p, q)| p + q).collect()),
            )
        }
    };
    tape.check_finite()?;
    Ok(Integrands {
        decoded: tape.value(xz).clone(),
        int,
        rec,
        jac,
        model,
    })
}

/// Error components for a given latent trajectory. `states`, `derivatives` and `latent`
/// share the row index of `times`.
pub fn error_components_from_parts(
    ae: &Autoencoder,
    dynamics: &Dynamics,
    times: &[f64],
    states: &Matrix,
    derivatives: Option<&Matrix>,
    latent: &Matrix,
) -> Result<ErrorReport> {
    let k = times.len();
    if k == 0 || states.rows() != k || latent.rows() != k {
        return Err(Error::dim("trajectory rows", k, states.rows().min(latent.rows())));
    }
    if let Some(d) = derivatives {
        if d.shape() != states.shape() {
            return Err(Error::dim("derivative rows", states.rows(), d.rows()));
        }
    }
    let it = integrands(ae, dynamics, states, derivatives, latent)?;
    let measured = row_norms(&states.sub(&it.decoded)?);
    let eps_rec = it.rec.iter().map(|r| it.rec[0] + r).collect();
    Ok(ErrorReport {
        times: times.to_vec(),
        measured,
        eps_int: cumulative_trapezoid(times, &it.int),
        eps_rec,
        eps_jac: it.jac.map(|v| cumulative_trapezoid(times, &v)),
        eps_mod: it.model.map(|v| cumulative_trapezoid(times, &v)),
        rel_l2: extrap_error(states, &it.decoded)?,
        max_rel_percent: max_rel_error(states, &it.decoded)?,
    })
}

/// Rolls the model out from the first snapshot of `truth` and evaluates every component.
pub fn error_components(model: &LatentModel, truth: &SnapshotSet, spec: &IntegratorSpec) -> Result<ErrorReport> {
    let pred = rom_predict(model, &truth.mu, truth.state(0), &truth.times, spec)?;
    let ae = model.ae.at(&truth.mu)?;
    error_components_from_parts(&ae, &model.dynamics, &truth.times, &truth.states, truth.derivatives.as_ref(), &pred.latent)
}
