use crate::autodiff::{Matrix, Tape};
use crate::error::{Error, Result};

use super::Dynamics;

/// `E`, `S`, `dE/dt = ∇E·F` and `dS/dt = ∇S·F` along a latent trajectory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ThermoTrace {
    pub energy: Vec<f64>,
    pub entropy: Vec<f64>,
    pub energy_rate: Vec<f64>,
    pub entropy_rate: Vec<f64>,
}

/// Evaluates the thermodynamic series at every row of `states`.
pub fn thermo_trace(dynamics: &Dynamics, states: &Matrix) -> Result<ThermoTrace> {
    if !dynamics.is_thermodynamic() {
        return Err(Error::Config("thermodynamic trace needs GFINN or SPNN dynamics".into()));
    }
    if states.cols() != dynamics.latent_dim() {
        return Err(Error::dim("latent trajectory", dynamics.latent_dim(), states.cols()));
    }
    if states.rows() == 0 {
        return Ok(ThermoTrace::default());
    }
    let mut tape = Tape::new();
    let b = dynamics.bind(&mut tape)?;
    let z = tape.constant(states.clone());
    let terms = b.eval(&mut tape, z)?;
    let p = terms.potentials.expect("thermodynamic model");
    let de = tape.row_dot(p.grad_energy, terms.rhs)?;
    let ds = tape.row_dot(p.grad_entropy, terms.rhs)?;
    tape.check_finite()?;
    Ok(ThermoTrace {
        energy: tape.value(p.energy).as_slice().to_vec(),
        entropy: tape.value(p.entropy).as_slice().to_vec(),
        energy_rate: tape.value(de).as_slice().to_vec(),
        entropy_rate: tape.value(ds).as_slice().to_vec(),
    })
}
