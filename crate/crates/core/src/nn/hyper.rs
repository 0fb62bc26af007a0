use rand::Rng;

use crate::autodiff::{Activation, Matrix, Tape, Var};
use crate::error::{Error, Result};

use super::autoencoder::{check_pair, Autoencoder, BoundAutoencoder};
use super::mlp::{Architecture, BoundMlp, Mlp};

/// Affine map of a parameter box onto `[-1, 1]^p`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ParamBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::dim("parameter box", lower.len(), upper.len()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::Config(format!("empty parameter box {lower:?}..{upper:?}")));
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn normalize(&self, mu: &[f64]) -> Result<Vec<f64>> {
        if mu.len() != self.dim() {
            return Err(Error::dim("parameter vector", self.dim(), mu.len()));
        }
        Ok(mu
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(m, (l, u))| {
                if u > l {
                    2.0 * (m - l) / (u - l) - 1.0
                } else {
                    0.0
                }
            })
            .collect())
    }
}

/// Two hypernetworks emitting the flat encoder and decoder parameters of a
/// template autoencoder as functions of the problem parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperAutoencoder {
    hyper_encoder: Mlp,
    hyper_decoder: Mlp,
    encoder_arch: Architecture,
    decoder_arch: Architecture,
    param_box: ParamBox,
}

impl HyperAutoencoder {
    pub fn new(
        hyper_encoder: Mlp,
        hyper_decoder: Mlp,
        encoder_arch: Architecture,
        decoder_arch: Architecture,
        param_box: ParamBox,
    ) -> Result<Self> {
        check_pair(
            encoder_arch.input_dim(),
            encoder_arch.output_dim(),
            decoder_arch.input_dim(),
            decoder_arch.output_dim(),
        )?;
        let p = param_box.dim();
        for (h, target, what) in [
            (&hyper_encoder, &encoder_arch, "hyper-encoder"),
            (&hyper_decoder, &decoder_arch, "hyper-decoder"),
        ] {
            if h.input_dim() != p {
                return Err(Error::dim("hypernetwork input", p, h.input_dim()));
            }
            if h.output_dim() != target.param_count() {
                return Err(Error::Config(format!(
                    "{what} emits {} values but the template needs {}",
                    h.output_dim(),
                    target.param_count()
                )));
            }
        }
        Ok(Self {
            hyper_encoder,
            hyper_decoder,
            encoder_arch,
            decoder_arch,
            param_box,
        })
    }

    /// Random hypernetworks with `hidden` widths and activation `act`.
    ///
    /// The output bias starts at a regular template initialization and the
    /// output weights are scaled per template entry, so the generated
    /// networks start out like freshly initialized ones with a small
    /// parameter dependence.
    pub fn random(
        encoder_arch: Architecture,
        decoder_arch: Architecture,
        hidden: &[usize],
        act: Activation,
        param_box: ParamBox,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let p = param_box.dim();
        fn make(target: &Architecture, p: usize, hidden: &[usize], act: Activation, rng: &mut impl Rng) -> Result<Mlp> {
            let mut widths = vec![p];
            widths.extend_from_slice(hidden);
            widths.push(target.param_count());
            let arch = Architecture::uniform(widths, act)?;
            let mut net = Mlp::random(arch, rng);
            let last = net.architecture().num_layers();
            let fan_in = *hidden.last().unwrap_or(&p) as f64;
            let scales = target.init_scales();
            let base = target.init_params(rng);
            let (w, b) = net.layer_mut(last);
            let cols = w.len() / scales.len();
            for (i, s) in scales.iter().enumerate() {
                for v in &mut w[i * cols..(i + 1) * cols] {
                    *v = rng.random_range(-1.0f64..1.0) * s / fan_in.sqrt();
                }
            }
            b.copy_from_slice(&base);
            Ok(net)
        }
        let he = make(&encoder_arch, p, hidden, act, rng)?;
        let hd = make(&decoder_arch, p, hidden, act, rng)?;
        Self::new(he, hd, encoder_arch, decoder_arch, param_box)
    }

    pub fn hyper_encoder(&self) -> &Mlp {
        &self.hyper_encoder
    }

    pub fn hyper_decoder(&self) -> &Mlp {
        &self.hyper_decoder
    }

    pub fn hyper_encoder_mut(&mut self) -> &mut Mlp {
        &mut self.hyper_encoder
    }

    pub fn hyper_decoder_mut(&mut self) -> &mut Mlp {
        &mut self.hyper_decoder
    }

    pub fn hypernetworks_mut(&mut self) -> (&mut Mlp, &mut Mlp) {
        (&mut self.hyper_encoder, &mut self.hyper_decoder)
    }

    pub fn encoder_arch(&self) -> &Architecture {
        &self.encoder_arch
    }

    pub fn decoder_arch(&self) -> &Architecture {
        &self.decoder_arch
    }

    pub fn param_box(&self) -> &ParamBox {
        &self.param_box
    }

    pub fn full_dim(&self) -> usize {
        self.encoder_arch.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder_arch.output_dim()
    }

    /// `(θ_e(μ), θ_d(μ))`.
    pub fn hyper_params(&self, mu: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = self.param_box.normalize(mu)?;
        Ok((self.hyper_encoder.forward(&m)?, self.hyper_decoder.forward(&m)?))
    }

    /// The template autoencoder populated with the parameters for `mu`.
    pub fn instantiate(&self, mu: &[f64]) -> Result<Autoencoder> {
        let (pe, pd) = self.hyper_params(mu)?;
        Autoencoder::full_rank(
            Mlp::new(self.encoder_arch.clone(), pe)?,
            Mlp::new(self.decoder_arch.clone(), pd)?,
        )
    }

    pub fn bind(&self, tape: &mut Tape) -> Result<BoundHyperAutoencoder> {
        Ok(BoundHyperAutoencoder {
            hyper_encoder: self.hyper_encoder.bind(tape)?,
            hyper_decoder: self.hyper_decoder.bind(tape)?,
            encoder_arch: self.encoder_arch.clone(),
            decoder_arch: self.decoder_arch.clone(),
            param_box: self.param_box.clone(),
        })
    }
}

/// Hypernetworks bound to tape nodes.
#[derive(Clone, Debug)]
pub struct BoundHyperAutoencoder {
    pub hyper_encoder: BoundMlp,
    pub hyper_decoder: BoundMlp,
    encoder_arch: Architecture,
    decoder_arch: Architecture,
    param_box: ParamBox,
}

impl BoundHyperAutoencoder {
    /// Records the hypernetwork passes for `mu` and returns the generated
    /// autoencoder, differentiable with respect to the hypernetwork weights.
    pub fn autoencoder_for(&self, tape: &mut Tape, mu: &[f64]) -> Result<BoundAutoencoder> {
        let m = self.param_box.normalize(mu)?;
        let mv: Var = tape.constant(Matrix::row_vector(&m));
        let pe = self.hyper_encoder.forward(tape, mv)?;
        let pd = self.hyper_decoder.forward(tape, mv)?;
        Ok(BoundAutoencoder {
            encoder: self.encoder_arch.bind_flat(tape, pe)?,
            decoder: self.decoder_arch.bind_flat(tape, pd)?,
        })
    }
}
