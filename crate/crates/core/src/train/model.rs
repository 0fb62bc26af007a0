use crate::autodiff::{Matrix, Tape, Var};
use crate::dynamics::{BoundDynamics, Dynamics};
use crate::error::{Error, Result};
use crate::nn::{
    Autoencoder, BoundAutoencoder, BoundHyperAutoencoder, Checkpoint, HyperAutoencoder, Mlp, ParamBox, Parametric,
};

/// Fixed autoencoder, or hypernetworks generating one per parameter value.
#[derive(Clone, Debug, PartialEq)]
pub enum AeModel {
    Plain(Autoencoder),
    Hyper(HyperAutoencoder),
}

impl AeModel {
    pub fn full_dim(&self) -> usize {
        match self {
            AeModel::Plain(a) => a.full_dim(),
            AeModel::Hyper(h) => h.full_dim(),
        }
    }

    pub fn latent_dim(&self) -> usize {
        match self {
            AeModel::Plain(a) => a.latent_dim(),
            AeModel::Hyper(h) => h.latent_dim(),
        }
    }

    pub fn is_parametric(&self) -> bool {
        matches!(self, AeModel::Hyper(_))
    }

    /// The concrete autoencoder used at `mu` (ignored for a plain autoencoder).
    pub fn at(&self, mu: &[f64]) -> Result<Autoencoder> {
        match self {
            AeModel::Plain(a) => Ok(a.clone()),
            AeModel::Hyper(h) => h.instantiate(mu),
        }
    }

    fn networks(&self) -> [&Mlp; 2] {
        match self {
            AeModel::Plain(a) => [a.encoder(), a.decoder()],
            AeModel::Hyper(h) => [h.hyper_encoder(), h.hyper_decoder()],
        }
    }

    fn networks_mut(&mut self) -> [&mut Mlp; 2] {
        let (e, d) = match self {
            AeModel::Plain(a) => a.networks_mut(),
            AeModel::Hyper(h) => h.hypernetworks_mut(),
        };
        [e, d]
    }
}

/// Autoencoder (or hyper-autoencoder) plus latent dynamics, trained jointly.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentModel {
    pub ae: AeModel,
    pub dynamics: Dynamics,
}

impl LatentModel {
    pub fn new(ae: AeModel, dynamics: Dynamics) -> Result<Self> {
        if ae.latent_dim() != dynamics.latent_dim() {
            return Err(Error::dim("latent dimension", ae.latent_dim(), dynamics.latent_dim()));
        }
        Ok(LatentModel { ae, dynamics })
    }

    pub fn full_dim(&self) -> usize {
        self.ae.full_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.ae.latent_dim()
    }

    /// Number of autoencoder (or hypernetwork) parameters, which come first in the flat vector.
    pub fn num_ae_params(&self) -> usize {
        self.ae.networks().iter().map(|n| n.num_params()).sum()
    }

    pub fn encode(&self, mu: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.ae.at(mu)?.encode(x)
    }

    pub fn decode(&self, mu: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        self.ae.at(mu)?.decode(z)
    }

    pub fn bind(&self, tape: &mut Tape) -> Result<BoundModel> {
        let ae = match &self.ae {
            AeModel::Plain(a) => BoundAe::Plain(a.bind(tape)?),
            AeModel::Hyper(h) => BoundAe::Hyper(h.bind(tape)?),
        };
        let dynamics = self.dynamics.bind(tape)?;
        Ok(BoundModel { ae, dynamics })
    }

    pub fn save(&self, ck: &mut Checkpoint) {
        match &self.ae {
            AeModel::Plain(a) => {
                ck.put_text("ae.kind", "plain");
                ck.put_network("ae.encoder", a.encoder());
                ck.put_network("ae.decoder", a.decoder());
            }
            AeModel::Hyper(h) => {
                ck.put_text("ae.kind", "hyper");
                ck.put_network("ae.hyper_encoder", h.hyper_encoder());
                ck.put_network("ae.hyper_decoder", h.hyper_decoder());
                // templates carry only their architectures
                ck.put_network("ae.encoder_template", &Mlp::zeros(h.encoder_arch().clone()));
                ck.put_network("ae.decoder_template", &Mlp::zeros(h.decoder_arch().clone()));
                let b = h.param_box();
                ck.put_array("ae.mu_lower", &Matrix::row_vector(&b.lower));
                ck.put_array("ae.mu_upper", &Matrix::row_vector(&b.upper));
            }
        }
        self.dynamics.save(ck, "dynamics");
    }

    pub fn load(ck: &Checkpoint) -> Result<Self> {
        let ae = match ck.text("ae.kind")? {
            "plain" => AeModel::Plain(Autoencoder::full_rank(
                ck.network("ae.encoder")?.clone(),
                ck.network("ae.decoder")?.clone(),
            )?),
            "hyper" => {
                let bx = ParamBox::new(
                    ck.array("ae.mu_lower")?.as_slice().to_vec(),
                    ck.array("ae.mu_upper")?.as_slice().to_vec(),
                )?;
                AeModel::Hyper(HyperAutoencoder::new(
                    ck.network("ae.hyper_encoder")?.clone(),
                    ck.network("ae.hyper_decoder")?.clone(),
                    ck.network("ae.encoder_template")?.architecture().clone(),
                    ck.network("ae.decoder_template")?.architecture().clone(),
                    bx,
                )?)
            }
            other => return Err(Error::Format(format!("unknown autoencoder kind '{other}'"))),
        };
        LatentModel::new(ae, Dynamics::load(ck, "dynamics")?)
    }
}

/// Order: encoder (or hyper-encoder), decoder (or hyper-decoder), dynamics.
impl Parametric for LatentModel {
    fn num_params(&self) -> usize {
        self.num_ae_params() + self.dynamics.num_params()
    }

    fn write_params(&self, out: &mut Vec<f64>) {
        for n in self.ae.networks() {
            n.write_params(out);
        }
        self.dynamics.write_params(out);
    }

    fn read_params(&mut self, src: &[f64]) -> Result<()> {
        let total = self.num_params();
        if src.len() < total {
            return Err(Error::dim("model parameters", total, src.len()));
        }
        let mut offset = 0;
        for n in self.ae.networks_mut() {
            let k = n.num_params();
            n.read_params(&src[offset..offset + k])?;
            offset += k;
        }
        self.dynamics.read_params(&src[offset..])
    }
}

#[derive(Clone, Debug)]
pub enum BoundAe {
    Plain(BoundAutoencoder),
    Hyper(BoundHyperAutoencoder),
}

impl BoundAe {
    /// Autoencoder nodes for `mu`; the hyper variant records the hypernetwork passes.
    pub fn at(&self, tape: &mut Tape, mu: &[f64]) -> Result<BoundAutoencoder> {
        match self {
            BoundAe::Plain(a) => Ok(a.clone()),
            BoundAe::Hyper(h) => h.autoencoder_for(tape, mu),
        }
    }

    pub fn param_nodes(&self) -> Vec<Var> {
        match self {
            BoundAe::Plain(a) => [a.encoder.param_nodes(), a.decoder.param_nodes()].concat(),
            BoundAe::Hyper(h) => [h.hyper_encoder.param_nodes(), h.hyper_decoder.param_nodes()].concat(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BoundModel {
    pub ae: BoundAe,
    pub dynamics: BoundDynamics,
}

impl BoundModel {
    /// All parameter leaves in [`Parametric`] order.
    pub fn param_nodes(&self) -> Vec<Var> {
        [self.ae.param_nodes(), self.dynamics.param_nodes()].concat()
    }
}
