use rand::Rng;

use crate::autodiff::{Activation, Matrix, ParamGroup, ParamLayout, Tape, Var};
use crate::error::{Error, Result};

/// Layer widths and hidden activations of a feed-forward network.
///
/// `activations[l]` is applied to the output of layer `l + 1` before it
/// enters layer `l + 2`; the first layer is affine in the input and the last
/// layer has no output activation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Architecture {
    widths: Vec<usize>,
    activations: Vec<Activation>,
}

impl Architecture {
    pub fn new(widths: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Config(format!(
                "a network needs at least input and output widths, got {widths:?}"
            )));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::Config(format!("zero layer width in {widths:?}")));
        }
        if activations.len() != widths.len() - 2 {
            return Err(Error::dim(
                "hidden activations",
                widths.len() - 2,
                activations.len(),
            ));
        }
        Ok(Self {
            widths,
            activations,
        })
    }

    /// Same activation on every hidden layer.
    pub fn uniform(widths: Vec<usize>, activation: Activation) -> Result<Self> {
        let n = widths.len().saturating_sub(2);
        Self::new(widths, vec![activation; n])
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("at least two widths")
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    /// `Σ_l (n_l n_{l-1} + n_l)`.
    pub fn param_count(&self) -> usize {
        self.widths
            .windows(2)
            .map(|w| w[1] * w[0] + w[1])
            .sum()
    }

    /// Appends `W^l` (`n_l x n_{l-1}`) and `b^l` (`1 x n_l`) for every layer.
    pub fn extend_layout(&self, layout: &mut ParamLayout, prefix: &str, group: ParamGroup) {
        for (l, w) in self.widths.windows(2).enumerate() {
            layout.push(format!("{prefix}.w{}", l + 1), group, w[1], w[0]);
            layout.push(format!("{prefix}.b{}", l + 1), group, 1, w[1]);
        }
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, zero biases.
    pub fn init_params(&self, rng: &mut impl Rng) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for w in self.widths.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..w[0] * w[1] {
                out.push(rng.random_range(-bound..bound));
            }
            out.extend(std::iter::repeat_n(0.0, w[1]));
        }
        out
    }

    /// Per-parameter init scale: `1/sqrt(fan_in)` for weights, 0 for biases.
    pub fn init_scales(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for w in self.widths.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            out.extend(std::iter::repeat_n(bound, w[0] * w[1]));
            out.extend(std::iter::repeat_n(0.0, w[1]));
        }
        out
    }

    /// Binds a network whose parameters are the columns of the `1 x P` node
    /// `flat` (for instance the output of a hypernetwork).
    pub fn bind_flat(&self, tape: &mut Tape, flat: Var) -> Result<BoundMlp> {
        let (r, c) = tape.shape(flat);
        if r != 1 || c != self.param_count() {
            return Err(Error::dim(
                "flat network parameters",
                format!("1x{}", self.param_count()),
                format!("{r}x{c}"),
            ));
        }
        let mut layers = Vec::with_capacity(self.num_layers());
        let mut offset = 0;
        for w in self.widths.windows(2) {
            let wlen = w[0] * w[1];
            let ws = tape.slice_cols(flat, offset, wlen)?;
            let wm = tape.reshape(ws, w[1], w[0])?;
            offset += wlen;
            let b = tape.slice_cols(flat, offset, w[1])?;
            offset += w[1];
            layers.push((wm, b));
        }
        Ok(BoundMlp {
            layers,
            activations: self.activations.clone(),
        })
    }

    /// Binds from per-segment nodes laid out as by [`Self::extend_layout`].
    pub fn bind_segments(&self, segments: &[Var]) -> Result<BoundMlp> {
        if segments.len() != 2 * self.num_layers() {
            return Err(Error::dim("network segments", 2 * self.num_layers(), segments.len()));
        }
        Ok(BoundMlp {
            layers: segments.chunks(2).map(|c| (c[0], c[1])).collect(),
            activations: self.activations.clone(),
        })
    }

    /// Records `params` as leaves (layer by layer) and binds them.
    pub fn bind_params(&self, tape: &mut Tape, params: &[f64]) -> Result<BoundMlp> {
        if params.len() != self.param_count() {
            return Err(Error::dim("network parameters", self.param_count(), params.len()));
        }
        let mut layers = Vec::with_capacity(self.num_layers());
        let mut offset = 0;
        for w in self.widths.windows(2) {
            let wlen = w[0] * w[1];
            let wm = Matrix::from_vec(w[1], w[0], params[offset..offset + wlen].to_vec())?;
            offset += wlen;
            let b = Matrix::row_vector(&params[offset..offset + w[1]]);
            offset += w[1];
            let wv = tape.leaf(wm);
            let bv = tape.leaf(b);
            layers.push((wv, bv));
        }
        Ok(BoundMlp {
            layers,
            activations: self.activations.clone(),
        })
    }
}

/// A network whose weights are nodes on a tape.
#[derive(Clone, Debug)]
pub struct BoundMlp {
    layers: Vec<(Var, Var)>,
    activations: Vec<Activation>,
}

impl BoundMlp {
    /// Batched forward pass; `x` is `B x n_0`.
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let mut h = x;
        for (l, &(w, b)) in self.layers.iter().enumerate() {
            if l > 0 {
                h = tape.act(h, self.activations[l - 1], 0)?;
            }
            let (_, hc) = tape.shape(h);
            let (_, wc) = tape.shape(w);
            if hc != wc {
                return Err(Error::dim("layer input", wc, hc));
            }
            h = tape.matmul_nt(h, w)?;
            h = tape.add_row(h, b)?;
        }
        Ok(h)
    }

    /// Leaf/parameter nodes in layout order (`w1, b1, w2, b2, ...`).
    pub fn param_nodes(&self) -> Vec<Var> {
        self.layers.iter().flat_map(|&(w, b)| [w, b]).collect()
    }
}

/// Feed-forward network: architecture plus its flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    arch: Architecture,
    params: Vec<f64>,
}

impl Mlp {
    pub fn new(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        if params.len() != arch.param_count() {
            return Err(Error::dim("Mlp parameters", arch.param_count(), params.len()));
        }
        Ok(Self { arch, params })
    }

    pub fn random(arch: Architecture, rng: &mut impl Rng) -> Self {
        let params = arch.init_params(rng);
        Self { arch, params }
    }

    pub fn zeros(arch: Architecture) -> Self {
        let params = vec![0.0; arch.param_count()];
        Self { arch, params }
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn input_dim(&self) -> usize {
        self.arch.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.arch.output_dim()
    }

    /// Weight matrix and bias of layer `l` (1-based), as slices of the
    /// flat parameter vector.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let mut offset = 0;
        for (i, w) in self.arch.widths.windows(2).enumerate() {
            let wlen = w[0] * w[1];
            if i + 1 == l {
                return (
                    &self.params[offset..offset + wlen],
                    &self.params[offset + wlen..offset + wlen + w[1]],
                );
            }
            offset += wlen + w[1];
        }
        panic!("layer {l} out of range");
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let mut offset = 0;
        for (i, w) in self.arch.widths.clone().windows(2).enumerate() {
            let wlen = w[0] * w[1];
            if i + 1 == l {
                let (a, b) = self.params[offset..offset + wlen + w[1]].split_at_mut(wlen);
                return (a, b);
            }
            offset += wlen + w[1];
        }
        panic!("layer {l} out of range");
    }

    pub fn bind(&self, tape: &mut Tape) -> Result<BoundMlp> {
        self.arch.bind_params(tape, &self.params)
    }

    /// Evaluates the network on one input vector.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_batch(&Matrix::row_vector(x))?.into_vec())
    }

    /// Evaluates the network on each row of `x`.
    pub fn forward_batch(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim() {
            return Err(Error::dim("network input", self.input_dim(), x.cols()));
        }
        let mut tape = Tape::new();
        let net = self.bind(&mut tape)?;
        let xv = tape.leaf(x.clone());
        let y = net.forward(&mut tape, xv)?;
        Ok(tape.value(y).clone())
    }
}
