//! Latent right-hand sides: GFINN, SPNN and a plain feed-forward baseline.

mod gfinn;
mod spnn;
mod thermo;

use rand::Rng;

use crate::autodiff::{input_gradient, Activation, Matrix, Tape, Var};
use crate::error::{Error, Result};
use crate::nn::{Architecture, BoundMlp, Checkpoint, Mlp, Parametric};

pub use gfinn::{BoundGfinn, GfinnDynamics, SkewBasis};
pub use spnn::{BoundSpnn, SpnnDynamics};
pub use thermo::{thermo_trace, ThermoTrace};

/// Hidden widths and activation shared by every network of a dynamics model.
#[derive(Clone, Debug, PartialEq)]
pub struct NetShape {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl NetShape {
    pub fn new(hidden: Vec<usize>, activation: Activation) -> Self {
        Self { hidden, activation }
    }

    pub fn architecture(&self, input: usize, output: usize) -> Result<Architecture> {
        let mut w = vec![input];
        w.extend_from_slice(&self.hidden);
        w.push(output);
        Architecture::uniform(w, self.activation)
    }
}

/// Energy, entropy and their input gradients for a batch of latent states.
#[derive(Clone, Copy, Debug)]
pub struct Potentials {
    pub energy: Var,
    pub entropy: Var,
    pub grad_energy: Var,
    pub grad_entropy: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct RhsTerms {
    pub rhs: Var,
    pub potentials: Option<Potentials>,
}

pub(crate) fn scalar_with_gradient(tape: &mut Tape, net: &BoundMlp, z: Var) -> Result<(Var, Var)> {
    let v = net.forward(tape, z)?;
    let g = input_gradient(tape, v, z)?;
    Ok((v, g))
}

/// Unconstrained `ż = f(z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FnnDynamics {
    net: Mlp,
}

impl FnnDynamics {
    pub fn new(net: Mlp) -> Result<Self> {
        if net.input_dim() != net.output_dim() {
            return Err(Error::dim("latent FNN output", net.input_dim(), net.output_dim()));
        }
        Ok(Self { net })
    }

    pub fn random(n: usize, shape: &NetShape, rng: &mut impl Rng) -> Result<Self> {
        Self::new(Mlp::random(shape.architecture(n, n)?, rng))
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }
}

/// Any of the supported latent models.
#[derive(Clone, Debug, PartialEq)]
pub enum Dynamics {
    Gfinn(GfinnDynamics),
    Spnn(SpnnDynamics),
    Fnn(FnnDynamics),
}

impl Dynamics {
    pub fn kind(&self) -> &'static str {
        match self {
            Dynamics::Gfinn(_) => "gfinn",
            Dynamics::Spnn(_) => "spnn",
            Dynamics::Fnn(_) => "fnn",
        }
    }

    pub fn latent_dim(&self) -> usize {
        match self {
            Dynamics::Gfinn(g) => g.latent_dim(),
            Dynamics::Spnn(s) => s.latent_dim(),
            Dynamics::Fnn(f) => f.net.input_dim(),
        }
    }

    pub fn is_thermodynamic(&self) -> bool {
        !matches!(self, Dynamics::Fnn(_))
    }

    pub fn bind(&self, tape: &mut Tape) -> Result<BoundDynamics> {
        Ok(match self {
            Dynamics::Gfinn(g) => BoundDynamics::Gfinn(g.bind(tape)?),
            Dynamics::Spnn(s) => BoundDynamics::Spnn(s.bind(tape)?),
            Dynamics::Fnn(f) => BoundDynamics::Fnn(f.net.bind(tape)?),
        })
    }

    /// `F^r` at every row of `z`.
    pub fn rhs_batch(&self, z: &Matrix) -> Result<Matrix> {
        if z.cols() != self.latent_dim() {
            return Err(Error::dim("latent state", self.latent_dim(), z.cols()));
        }
        let mut tape = Tape::new();
        let b = self.bind(&mut tape)?;
        let zv = tape.constant(z.clone());
        let r = b.eval(&mut tape, zv)?.rhs;
        tape.check_finite()?;
        Ok(tape.value(r).clone())
    }

    pub fn rhs(&self, z: &[f64]) -> Result<Vec<f64>> {
        Ok(self.rhs_batch(&Matrix::row_vector(z))?.into_vec())
    }

    pub fn save(&self, ck: &mut Checkpoint, prefix: &str) {
        ck.put_text(&format!("{prefix}.kind"), self.kind());
        match self {
            Dynamics::Gfinn(g) => g.save(ck, prefix),
            Dynamics::Spnn(s) => s.save(ck, prefix),
            Dynamics::Fnn(f) => ck.put_network(&format!("{prefix}.net"), &f.net),
        }
    }

    pub fn load(ck: &Checkpoint, prefix: &str) -> Result<Self> {
        match ck.text(&format!("{prefix}.kind"))? {
            "gfinn" => Ok(Dynamics::Gfinn(GfinnDynamics::load(ck, prefix)?)),
            "spnn" => Ok(Dynamics::Spnn(SpnnDynamics::load(ck, prefix)?)),
            "fnn" => Ok(Dynamics::Fnn(FnnDynamics::new(ck.network(&format!("{prefix}.net"))?.clone())?)),
            other => Err(Error::Format(format!("unknown dynamics kind '{other}'"))),
        }
    }
}

impl Parametric for Dynamics {
    fn num_params(&self) -> usize {
        match self {
            Dynamics::Gfinn(g) => g.num_params(),
            Dynamics::Spnn(s) => s.num_params(),
            Dynamics::Fnn(f) => f.net.num_params(),
        }
    }

    fn write_params(&self, out: &mut Vec<f64>) {
        match self {
            Dynamics::Gfinn(g) => g.write_params(out),
            Dynamics::Spnn(s) => s.write_params(out),
            Dynamics::Fnn(f) => f.net.write_params(out),
        }
    }

    fn read_params(&mut self, src: &[f64]) -> Result<()> {
        match self {
            Dynamics::Gfinn(g) => g.read_params(src),
            Dynamics::Spnn(s) => s.read_params(src),
            Dynamics::Fnn(f) => f.net.read_params(src),
        }
    }
}

#[derive(Clone, Debug)]
pub enum BoundDynamics {
    Gfinn(BoundGfinn),
    Spnn(BoundSpnn),
    Fnn(BoundMlp),
}

impl BoundDynamics {
    pub fn param_nodes(&self) -> Vec<Var> {
        match self {
            BoundDynamics::Gfinn(g) => g.param_nodes(),
            BoundDynamics::Spnn(s) => s.param_nodes(),
            BoundDynamics::Fnn(f) => f.param_nodes(),
        }
    }

    pub fn eval(&self, tape: &mut Tape, z: Var) -> Result<RhsTerms> {
        match self {
            BoundDynamics::Gfinn(g) => g.eval(tape, z),
            BoundDynamics::Spnn(s) => s.eval(tape, z),
            BoundDynamics::Fnn(f) => Ok(RhsTerms {
                rhs: f.forward(tape, z)?,
                potentials: None,
            }),
        }
    }

    pub fn rhs(&self, tape: &mut Tape, z: Var) -> Result<Var> {
        Ok(self.eval(tape, z)?.rhs)
    }

    /// `(L∇S, M∇E)` for thermodynamic models.
    pub fn degeneracy(&self, tape: &mut Tape, z: Var) -> Result<(Var, Var)> {
        match self {
            BoundDynamics::Gfinn(g) => g.degeneracy(tape, z),
            BoundDynamics::Spnn(s) => s.degeneracy(tape, z),
            BoundDynamics::Fnn(_) => Err(Error::Config("plain FNN dynamics have no L, M structure".into())),
        }
    }
}

#[cfg(test)]
mod tests;
