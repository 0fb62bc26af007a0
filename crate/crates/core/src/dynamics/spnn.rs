use rand::Rng;

use crate::autodiff::{Matrix, Tape, Var};
use crate::error::{Error, Result};
use crate::nn::{BoundMlp, Checkpoint, Mlp, Parametric};

use super::{scalar_with_gradient, NetShape, Potentials, RhsTerms};

/// GENERIC-form dynamics with `L = R − Rᵀ` and `M = D Dᵀ` taken straight
/// from matrix networks. The degeneracy conditions hold only as far as a
/// penalty term enforces them.
#[derive(Clone, Debug, PartialEq)]
pub struct SpnnDynamics {
    n: usize,
    energy: Mlp,
    entropy: Mlp,
    poisson_net: Mlp,
    friction_net: Mlp,
}

impl SpnnDynamics {
    pub fn new(energy: Mlp, entropy: Mlp, poisson_net: Mlp, friction_net: Mlp) -> Result<Self> {
        let n = energy.input_dim();
        for (net, out, what) in [
            (&energy, 1, "energy net"),
            (&entropy, 1, "entropy net"),
            (&poisson_net, n * n, "L net"),
            (&friction_net, n * n, "M net"),
        ] {
            if net.input_dim() != n {
                return Err(Error::dim(what, n, net.input_dim()));
            }
            if net.output_dim() != out {
                return Err(Error::dim(what, out, net.output_dim()));
            }
        }
        Ok(Self {
            n,
            energy,
            entropy,
            poisson_net,
            friction_net,
        })
    }

    pub fn random(n: usize, shape: &NetShape, rng: &mut impl Rng) -> Result<Self> {
        Self::new(
            Mlp::random(shape.architecture(n, 1)?, rng),
            Mlp::random(shape.architecture(n, 1)?, rng),
            Mlp::random(shape.architecture(n, n * n)?, rng),
            Mlp::random(shape.architecture(n, n * n)?, rng),
        )
    }

    pub fn latent_dim(&self) -> usize {
        self.n
    }

    pub fn energy_net_mut(&mut self) -> &mut Mlp {
        &mut self.energy
    }

    pub fn entropy_net_mut(&mut self) -> &mut Mlp {
        &mut self.entropy
    }

    pub fn poisson_net_mut(&mut self) -> &mut Mlp {
        &mut self.poisson_net
    }

    pub fn friction_net_mut(&mut self) -> &mut Mlp {
        &mut self.friction_net
    }

    pub fn bind(&self, tape: &mut Tape) -> Result<BoundSpnn> {
        Ok(BoundSpnn {
            n: self.n,
            energy: self.energy.bind(tape)?,
            entropy: self.entropy.bind(tape)?,
            poisson_net: self.poisson_net.bind(tape)?,
            friction_net: self.friction_net.bind(tape)?,
        })
    }

    /// `(L(z), M(z))`.
    pub fn matrices(&self, z: &[f64]) -> Result<(Matrix, Matrix)> {
        if z.len() != self.n {
            return Err(Error::dim("latent state", self.n, z.len()));
        }
        let n = self.n;
        let r = Matrix::from_vec(n, n, self.poisson_net.forward(z)?)?;
        let d = Matrix::from_vec(n, n, self.friction_net.forward(z)?)?;
        Ok((r.sub(&r.transpose())?, d.gemm(false, &d, true)?))
    }

    pub(crate) fn save(&self, ck: &mut Checkpoint, prefix: &str) {
        ck.put_network(&format!("{prefix}.energy"), &self.energy);
        ck.put_network(&format!("{prefix}.entropy"), &self.entropy);
        ck.put_network(&format!("{prefix}.poisson_net"), &self.poisson_net);
        ck.put_network(&format!("{prefix}.friction_net"), &self.friction_net);
    }

    pub(crate) fn load(ck: &Checkpoint, prefix: &str) -> Result<Self> {
        Self::new(
            ck.network(&format!("{prefix}.energy"))?.clone(),
            ck.network(&format!("{prefix}.entropy"))?.clone(),
            ck.network(&format!("{prefix}.poisson_net"))?.clone(),
            ck.network(&format!("{prefix}.friction_net"))?.clone(),
        )
    }
}

impl Parametric for SpnnDynamics {
    fn num_params(&self) -> usize {
        self.energy.num_params()
            + self.entropy.num_params()
            + self.poisson_net.num_params()
            + self.friction_net.num_params()
    }

    fn write_params(&self, out: &mut Vec<f64>) {
        self.energy.write_params(out);
        self.entropy.write_params(out);
        self.poisson_net.write_params(out);
        self.friction_net.write_params(out);
    }

    fn read_params(&mut self, src: &[f64]) -> Result<()> {
        let total = self.num_params().min(src.len());
        crate::nn::read_all(
            &mut [
                &mut self.energy,
                &mut self.entropy,
                &mut self.poisson_net,
                &mut self.friction_net,
            ],
            &src[..total],
        )
    }
}

#[derive(Clone, Debug)]
pub struct BoundSpnn {
    n: usize,
    pub energy: BoundMlp,
    pub entropy: BoundMlp,
    pub poisson_net: BoundMlp,
    pub friction_net: BoundMlp,
}

impl BoundSpnn {
    pub fn param_nodes(&self) -> Vec<Var> {
        let mut v = self.energy.param_nodes();
        v.extend(self.entropy.param_nodes());
        v.extend(self.poisson_net.param_nodes());
        v.extend(self.friction_net.param_nodes());
        v
    }

    pub fn potentials(&self, tape: &mut Tape, z: Var) -> Result<Potentials> {
        let (energy, grad_energy) = scalar_with_gradient(tape, &self.energy, z)?;
        let (entropy, grad_entropy) = scalar_with_gradient(tape, &self.entropy, z)?;
        Ok(Potentials {
            energy,
            entropy,
            grad_energy,
            grad_entropy,
        })
    }

    fn apply(&self, tape: &mut Tape, z: Var, ge: Var, gs: Var) -> Result<(Var, Var)> {
        let n = self.n;
        let r = self.poisson_net.forward(tape, z)?;
        let rt = tape.row_transpose(r, n, n)?;
        let l = tape.sub(r, rt)?;
        let d = self.friction_net.forward(tape, z)?;
        let l_ge = tape.row_matvec(l, ge, n, n)?;
        let y = tape.row_mat_tvec(d, gs, n, n)?;
        let m_gs = tape.row_matvec(d, y, n, n)?;
        Ok((l_ge, m_gs))
    }

    pub fn eval(&self, tape: &mut Tape, z: Var) -> Result<RhsTerms> {
        let p = self.potentials(tape, z)?;
        let (l_ge, m_gs) = self.apply(tape, z, p.grad_energy, p.grad_entropy)?;
        let rhs = tape.add(l_ge, m_gs)?;
        Ok(RhsTerms {
            rhs,
            potentials: Some(p),
        })
    }

    /// `(L∇S, M∇E)` per sample.
    pub fn degeneracy(&self, tape: &mut Tape, z: Var) -> Result<(Var, Var)> {
        let p = self.potentials(tape, z)?;
        // swapping the gradients gives L∇S and M∇E
        self.apply(tape, z, p.grad_entropy, p.grad_energy)
    }
}
