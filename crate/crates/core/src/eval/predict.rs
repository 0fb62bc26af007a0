use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::integrate::{integrate_at, IntegratorSpec};
use crate::train::LatentModel;

/// Latent and decoded trajectories of one ROM rollout.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub times: Vec<f64>,
    pub latent: Matrix,
    pub states: Matrix,
}

/// Encodes `x0`, integrates the latent dynamics to every entry of `times` (the first one is
/// the initial time) and decodes each latent state.
pub fn rom_predict(model: &LatentModel, mu: &[f64], x0: &[f64], times: &[f64], spec: &IntegratorSpec) -> Result<Prediction> {
    if x0.len() != model.full_dim() {
        return Err(Error::dim("initial full state", model.full_dim(), x0.len()));
    }
    let ae = model.ae.at(mu)?;
    let z0 = ae.encode(x0)?;
    let tr = integrate_at(|_, z| model.dynamics.rhs(z), &z0, times, spec)?;
    let latent = Matrix::from_rows(&tr.states)?;
    let states = ae.decode_batch(&latent)?;
    Ok(Prediction { times: times.to_vec(), latent, states })
}
