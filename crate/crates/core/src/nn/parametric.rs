use crate::autodiff::{Matrix, Tape, Var};
use crate::error::{Error, Result};

use super::mlp::Mlp;

/// Anything that owns trainable values in a fixed order.
///
/// The order of [`Parametric::write_params`] must match the order of the
/// tape nodes returned by the corresponding bound object, so gradients can be
/// concatenated and applied index by index.
pub trait Parametric {
    fn num_params(&self) -> usize;
    fn write_params(&self, out: &mut Vec<f64>);
    /// Reads `num_params()` values from the front of `src`.
    fn read_params(&mut self, src: &[f64]) -> Result<()>;

    fn flat_params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        self.write_params(&mut v);
        v
    }
}

impl Parametric for Mlp {
    fn num_params(&self) -> usize {
        self.params().len()
    }

    fn write_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.params());
    }

    fn read_params(&mut self, src: &[f64]) -> Result<()> {
        let n = self.params().len();
        if src.len() < n {
            return Err(Error::dim("network parameters", n, src.len()));
        }
        self.params_mut().copy_from_slice(&src[..n]);
        Ok(())
    }
}

impl Parametric for Matrix {
    fn num_params(&self) -> usize {
        self.len()
    }

    fn write_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.as_slice());
    }

    fn read_params(&mut self, src: &[f64]) -> Result<()> {
        let n = self.len();
        if src.len() < n {
            return Err(Error::dim("array parameters", n, src.len()));
        }
        self.as_mut_slice().copy_from_slice(&src[..n]);
        Ok(())
    }
}

/// Reads consecutive blocks of `src` into `parts`; errors unless every value
/// is consumed.
pub fn read_all(parts: &mut [&mut dyn Parametric], src: &[f64]) -> Result<()> {
    let total: usize = parts.iter().map(|p| p.num_params()).sum();
    if src.len() != total {
        return Err(Error::dim("parameter vector", total, src.len()));
    }
    let mut offset = 0;
    for p in parts.iter_mut() {
        let n = p.num_params();
        p.read_params(&src[offset..offset + n])?;
        offset += n;
    }
    Ok(())
}

/// Concatenates the values of gradient nodes into one flat vector.
pub fn flatten_nodes(tape: &Tape, nodes: &[Var]) -> Vec<f64> {
    let mut out = Vec::new();
    for &v in nodes {
        out.extend_from_slice(tape.value(v).as_slice());
    }
    out
}
