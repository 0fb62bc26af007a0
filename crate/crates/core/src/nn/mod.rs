//! Feed-forward networks, autoencoders and hypernetworks.

mod autoencoder;
pub mod checkpoint;
mod hyper;
mod mlp;
mod parametric;

pub use crate::autodiff::Activation;
pub use autoencoder::{Autoencoder, BoundAutoencoder};
pub use checkpoint::Checkpoint;
pub use hyper::{BoundHyperAutoencoder, HyperAutoencoder, ParamBox};
pub use mlp::{Architecture, BoundMlp, Mlp};
pub use parametric::{flatten_nodes, read_all, Parametric};
