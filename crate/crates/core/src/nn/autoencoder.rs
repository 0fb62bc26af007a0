use crate::autodiff::{Matrix, Tape, Var};
use crate::error::{Error, Result};

use super::mlp::{BoundMlp, Mlp};

/// Encoder `R^N -> R^n` and decoder `R^n -> R^N`.
#[derive(Clone, Debug, PartialEq)]
pub struct Autoencoder {
    encoder: Mlp,
    decoder: Mlp,
}

impl Autoencoder {
    /// Requires `n < N`.
    pub fn new(encoder: Mlp, decoder: Mlp) -> Result<Self> {
        let ae = Self::full_rank(encoder, decoder)?;
        if ae.latent_dim() >= ae.full_dim() {
            return Err(Error::Config(format!(
                "latent dimension {} must be smaller than full dimension {}",
                ae.latent_dim(),
                ae.full_dim()
            )));
        }
        Ok(ae)
    }

    /// Like [`Self::new`] but also accepts `n == N` (test configurations).
    pub fn full_rank(encoder: Mlp, decoder: Mlp) -> Result<Self> {
        check_pair(encoder.input_dim(), encoder.output_dim(), decoder.input_dim(), decoder.output_dim())?;
        Ok(Self { encoder, decoder })
    }

    pub fn encoder(&self) -> &Mlp {
        &self.encoder
    }

    pub fn decoder(&self) -> &Mlp {
        &self.decoder
    }

    pub fn encoder_mut(&mut self) -> &mut Mlp {
        &mut self.encoder
    }

    pub fn decoder_mut(&mut self) -> &mut Mlp {
        &mut self.decoder
    }

    pub fn networks_mut(&mut self) -> (&mut Mlp, &mut Mlp) {
        (&mut self.encoder, &mut self.decoder)
    }

    pub fn full_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.encoder.forward(x)
    }

    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.decoder.forward(z)
    }

    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.decode(&self.encode(x)?)
    }

    pub fn encode_batch(&self, x: &Matrix) -> Result<Matrix> {
        self.encoder.forward_batch(x)
    }

    pub fn decode_batch(&self, z: &Matrix) -> Result<Matrix> {
        self.decoder.forward_batch(z)
    }

    pub fn bind(&self, tape: &mut Tape) -> Result<BoundAutoencoder> {
        Ok(BoundAutoencoder {
            encoder: self.encoder.bind(tape)?,
            decoder: self.decoder.bind(tape)?,
        })
    }
}

pub(crate) fn check_pair(n_in: usize, n_lat: usize, d_in: usize, d_out: usize) -> Result<()> {
    if d_out != n_in {
        return Err(Error::dim("decoder output vs encoder input", n_in, d_out));
    }
    if d_in != n_lat {
        return Err(Error::dim("decoder input vs encoder output", n_lat, d_in));
    }
    Ok(())
}

/// Encoder and decoder bound to tape nodes.
#[derive(Clone, Debug)]
pub struct BoundAutoencoder {
    pub encoder: BoundMlp,
    pub decoder: BoundMlp,
}

impl BoundAutoencoder {
    pub fn encode(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        self.encoder.forward(tape, x)
    }

    pub fn decode(&self, tape: &mut Tape, z: Var) -> Result<Var> {
        self.decoder.forward(tape, z)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::autodiff::{norm2, sub_vec, Activation};
    use crate::nn::Architecture;

    fn identity_net(n: usize) -> Mlp {
        let arch = Architecture::uniform(vec![n, n], Activation::Identity).unwrap();
        let mut net = Mlp::zeros(arch);
        let (w, _) = net.layer_mut(1);
        for i in 0..n {
            w[i * n + i] = 1.0;
        }
        net
    }

    #[test]
    fn full_rank_identity_reconstructs_exactly() {
        let ae = Autoencoder::full_rank(identity_net(3), identity_net(3)).unwrap();
        let x = [0.1, -2.5, 7.0];
        let r = ae.reconstruct(&x).unwrap();
        assert!(norm2(&sub_vec(&r, &x)) <= 1e-14);
        assert!(Autoencoder::new(identity_net(3), identity_net(3)).is_err());
    }

    #[test]
    fn full_scale_encoder_shape_is_accepted() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let enc = Mlp::random(
            Architecture::uniform(vec![400, 160, 160, 8], Activation::Relu).unwrap(),
            &mut rng,
        );
        let dec = Mlp::random(
            Architecture::uniform(vec![8, 160, 160, 400], Activation::Relu).unwrap(),
            &mut rng,
        );
        let ae = Autoencoder::new(enc, dec).unwrap();
        assert_eq!((ae.full_dim(), ae.latent_dim()), (400, 8));
    }

    #[test]
    fn mismatched_pair_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let enc = Mlp::random(Architecture::uniform(vec![5, 2], Activation::Tanh).unwrap(), &mut rng);
        let dec = Mlp::random(Architecture::uniform(vec![3, 5], Activation::Tanh).unwrap(), &mut rng);
        assert!(Autoencoder::new(enc, dec).is_err());
    }

    #[test]
    fn reconstruction_matches_composed_forward_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let enc = Mlp::random(
            Architecture::uniform(vec![6, 5, 2], Activation::Tanh).unwrap(),
            &mut rng,
        );
        let dec = Mlp::random(
            Architecture::uniform(vec![2, 5, 6], Activation::Tanh).unwrap(),
            &mut rng,
        );
        let ae = Autoencoder::new(enc.clone(), dec.clone()).unwrap();
        let x = [0.3, -0.2, 0.9, 1.1, -1.4, 0.05];
        let direct = dec.forward(&enc.forward(&x).unwrap()).unwrap();
        assert_eq!(ae.reconstruct(&x).unwrap(), direct);
    }
}
