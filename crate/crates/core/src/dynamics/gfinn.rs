use rand::Rng;

use crate::autodiff::{Matrix, Tape, Var};
use crate::error::{Error, Result};
use crate::nn::{BoundMlp, Checkpoint, Mlp, Parametric};

use super::{scalar_with_gradient, NetShape, Potentials, RhsTerms};

/// `K` skew-symmetric `n x n` matrices `A_j = B_j − B_jᵀ`, stored as the
/// unconstrained `B_j` flattened into the rows of a `K x n²` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SkewBasis {
    n: usize,
    raw: Matrix,
}

impl SkewBasis {
    pub fn new(n: usize, raw: Matrix) -> Result<Self> {
        if raw.cols() != n * n || raw.rows() == 0 {
            return Err(Error::dim("skew basis", format!("K x {}", n * n), format!("{:?}", raw.shape())));
        }
        Ok(Self { n, raw })
    }

    /// From explicit `A_j`; each must be skew-symmetric. Stores `B_j = A_j / 2`.
    pub fn from_skew(mats: &[Matrix]) -> Result<Self> {
        let n = mats.first().map(|m| m.rows()).unwrap_or(0);
        let mut rows = Vec::with_capacity(mats.len());
        for a in mats {
            if a.shape() != (n, n) {
                return Err(Error::dim("skew basis matrix", format!("{n}x{n}"), format!("{:?}", a.shape())));
            }
            rows.push(a.as_slice().iter().map(|v| 0.5 * v).collect());
        }
        Self::new(n, Matrix::from_rows(&rows)?)
    }

    pub fn random(n: usize, k: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (n as f64).sqrt();
        let data = (0..k * n * n).map(|_| rng.random_range(-bound..bound)).collect();
        Self {
            n,
            raw: Matrix::from_vec(k, n * n, data).expect("sized"),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.raw.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.rows() == 0
    }

    pub fn raw(&self) -> &Matrix {
        &self.raw
    }

    pub fn raw_mut(&mut self) -> &mut Matrix {
        &mut self.raw
    }

    /// The realized `A_j`.
    pub fn matrices(&self) -> Vec<Matrix> {
        let n = self.n;
        (0..self.len())
            .map(|j| {
                let b = self.raw.row(j);
                let mut a = Matrix::zeros(n, n);
                for r in 0..n {
                    for c in 0..n {
                        a.set(r, c, b[r * n + c] - b[c * n + r]);
                    }
                }
                a
            })
            .collect()
    }

    /// `K x n` matrix whose row `j` is `(A_j g)ᵀ`.
    pub fn q_matrix(&self, g: &[f64]) -> Result<Matrix> {
        if g.len() != self.n {
            return Err(Error::dim("q_matrix gradient", self.n, g.len()));
        }
        let rows = self
            .matrices()
            .iter()
            .map(|a| a.matvec(g))
            .collect::<Result<Vec<_>>>()?;
        Matrix::from_rows(&rows)
    }

    /// Records `A` reshaped to `(K n) x n` so that `g · Aᵀ` gives the
    /// per-sample flattened Q-matrix.
    fn bind_stacked(tape: &mut Tape, raw: Var, n: usize) -> Result<Var> {
        let k = tape.shape(raw).0;
        let t = tape.row_transpose(raw, n, n)?;
        let a = tape.sub(raw, t)?;
        tape.reshape(a, k * n, n)
    }
}

/// Dynamics `ż = L(z)∇E(z) + M(z)∇S(z)` with
/// `L = Q_Sᵀ U Q_S` and `M = Q_Eᵀ D Dᵀ Q_E`.
#[derive(Clone, Debug, PartialEq)]
pub struct GfinnDynamics {
    n: usize,
    k: usize,
    energy: Mlp,
    entropy: Mlp,
    poisson_net: Mlp,
    friction_net: Mlp,
    poisson_basis: SkewBasis,
    friction_basis: Option<SkewBasis>,
}

impl GfinnDynamics {
    pub fn new(
        energy: Mlp,
        entropy: Mlp,
        poisson_net: Mlp,
        friction_net: Mlp,
        poisson_basis: SkewBasis,
        friction_basis: Option<SkewBasis>,
    ) -> Result<Self> {
        let n = poisson_basis.dim();
        let k = poisson_basis.len();
        for (net, out, what) in [
            (&energy, 1, "energy net"),
            (&entropy, 1, "entropy net"),
            (&poisson_net, k * k, "U net"),
            (&friction_net, k * k, "D net"),
        ] {
            if net.input_dim() != n {
                return Err(Error::dim(what, n, net.input_dim()));
            }
            if net.output_dim() != out {
                return Err(Error::dim(what, out, net.output_dim()));
            }
        }
        if let Some(fb) = &friction_basis {
            if fb.dim() != n || fb.len() != k {
                return Err(Error::dim("friction basis", format!("{k} x {n}"), format!("{} x {}", fb.len(), fb.dim())));
            }
        }
        Ok(Self {
            n,
            k,
            energy,
            entropy,
            poisson_net,
            friction_net,
            poisson_basis,
            friction_basis,
        })
    }

    /// Random instance; `shared_basis` reuses the L-branch basis for M.
    pub fn random(n: usize, k: usize, shape: &NetShape, shared_basis: bool, rng: &mut impl Rng) -> Result<Self> {
        let energy = Mlp::random(shape.architecture(n, 1)?, rng);
        let entropy = Mlp::random(shape.architecture(n, 1)?, rng);
        let poisson_net = Mlp::random(shape.architecture(n, k * k)?, rng);
        let friction_net = Mlp::random(shape.architecture(n, k * k)?, rng);
        let poisson_basis = SkewBasis::random(n, k, rng);
        let friction_basis = (!shared_basis).then(|| SkewBasis::random(n, k, rng));
        Self::new(energy, entropy, poisson_net, friction_net, poisson_basis, friction_basis)
    }

    pub fn latent_dim(&self) -> usize {
        self.n
    }

    pub fn basis_len(&self) -> usize {
        self.k
    }

    pub fn shares_basis(&self) -> bool {
        self.friction_basis.is_none()
    }

    pub fn energy_net(&self) -> &Mlp {
        &self.energy
    }

    pub fn entropy_net(&self) -> &Mlp {
        &self.entropy
    }

    pub fn energy_net_mut(&mut self) -> &mut Mlp {
        &mut self.energy
    }

    pub fn entropy_net_mut(&mut self) -> &mut Mlp {
        &mut self.entropy
    }

    /// Energy, entropy, U and D networks.
    pub fn networks_mut(&mut self) -> [&mut Mlp; 4] {
        [&mut self.energy, &mut self.entropy, &mut self.poisson_net, &mut self.friction_net]
    }

    pub fn poisson_net_mut(&mut self) -> &mut Mlp {
        &mut self.poisson_net
    }

    pub fn friction_net_mut(&mut self) -> &mut Mlp {
        &mut self.friction_net
    }

    pub fn poisson_basis(&self) -> &SkewBasis {
        &self.poisson_basis
    }

    pub fn friction_basis(&self) -> &SkewBasis {
        self.friction_basis.as_ref().unwrap_or(&self.poisson_basis)
    }

    pub fn bind(&self, tape: &mut Tape) -> Result<BoundGfinn> {
        let energy = self.energy.bind(tape)?;
        let entropy = self.entropy.bind(tape)?;
        let poisson_net = self.poisson_net.bind(tape)?;
        let friction_net = self.friction_net.bind(tape)?;
        let poisson_basis = tape.leaf(self.poisson_basis.raw.clone());
        let friction_basis = self.friction_basis.as_ref().map(|b| tape.leaf(b.raw.clone()));
        Ok(BoundGfinn {
            n: self.n,
            k: self.k,
            energy,
            entropy,
            poisson_net,
            friction_net,
            poisson_basis,
            friction_basis,
        })
    }

    fn with_grads<T>(&self, z: &[f64], f: impl FnOnce(&[f64], &[f64], &Matrix, &Matrix) -> Result<T>) -> Result<T> {
        if z.len() != self.n {
            return Err(Error::dim("latent state", self.n, z.len()));
        }
        let mut tape = Tape::new();
        let b = self.bind(&mut tape)?;
        let zv = tape.constant(Matrix::row_vector(z));
        let p = b.potentials(&mut tape, zv)?;
        let u = b.poisson_net.forward(&mut tape, zv)?;
        let d = b.friction_net.forward(&mut tape, zv)?;
        tape.check_finite()?;
        let ge = tape.value(p.grad_energy).as_slice().to_vec();
        let gs = tape.value(p.grad_entropy).as_slice().to_vec();
        let k = self.k;
        let uraw = Matrix::from_vec(k, k, tape.value(u).as_slice().to_vec())?;
        let umat = uraw.sub(&uraw.transpose())?;
        let dmat = Matrix::from_vec(k, k, tape.value(d).as_slice().to_vec())?;
        f(&ge, &gs, &umat, &dmat)
    }

    /// `L(z)`, assembled explicitly.
    pub fn poisson_matrix(&self, z: &[f64]) -> Result<Matrix> {
        self.with_grads(z, |_, gs, u, _| {
            let q = self.poisson_basis.q_matrix(gs)?;
            let l = q.gemm(true, &u.matmul(&q)?, false)?;
            finite(l, "poisson matrix")
        })
    }

    /// `M(z)`, assembled explicitly.
    pub fn friction_matrix(&self, z: &[f64]) -> Result<Matrix> {
        self.with_grads(z, |ge, _, _, d| {
            let q = self.friction_basis().q_matrix(ge)?;
            let ddt = d.gemm(false, d, true)?;
            let m = q.gemm(true, &ddt.matmul(&q)?, false)?;
            finite(m, "friction matrix")
        })
    }

    pub fn grad_energy(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.with_grads(z, |ge, _, _, _| Ok(ge.to_vec()))
    }

    pub fn grad_entropy(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.with_grads(z, |_, gs, _, _| Ok(gs.to_vec()))
    }

    pub(crate) fn save(&self, ck: &mut Checkpoint, prefix: &str) {
        ck.put_network(&format!("{prefix}.energy"), &self.energy);
        ck.put_network(&format!("{prefix}.entropy"), &self.entropy);
        ck.put_network(&format!("{prefix}.poisson_net"), &self.poisson_net);
        ck.put_network(&format!("{prefix}.friction_net"), &self.friction_net);
        ck.put_array(&format!("{prefix}.poisson_basis"), &self.poisson_basis.raw);
        if let Some(fb) = &self.friction_basis {
            ck.put_array(&format!("{prefix}.friction_basis"), &fb.raw);
        }
    }

    pub(crate) fn load(ck: &Checkpoint, prefix: &str) -> Result<Self> {
        let pb = ck.array(&format!("{prefix}.poisson_basis"))?.clone();
        let n = (pb.cols() as f64).sqrt().round() as usize;
        let fb_name = format!("{prefix}.friction_basis");
        let fb = if ck.contains(&fb_name) {
            Some(SkewBasis::new(n, ck.array(&fb_name)?.clone())?)
        } else {
            None
        };
        Self::new(
            ck.network(&format!("{prefix}.energy"))?.clone(),
            ck.network(&format!("{prefix}.entropy"))?.clone(),
            ck.network(&format!("{prefix}.poisson_net"))?.clone(),
            ck.network(&format!("{prefix}.friction_net"))?.clone(),
            SkewBasis::new(n, pb)?,
            fb,
        )
    }
}

fn finite(m: Matrix, what: &'static str) -> Result<Matrix> {
    if m.is_finite() {
        Ok(m)
    } else {
        Err(Error::NonFinite { node: 0, op: what })
    }
}

impl Parametric for GfinnDynamics {
    fn num_params(&self) -> usize {
        self.energy.num_params()
            + self.entropy.num_params()
            + self.poisson_net.num_params()
            + self.friction_net.num_params()
            + self.poisson_basis.raw.len()
            + self.friction_basis.as_ref().map_or(0, |b| b.raw.len())
    }

    fn write_params(&self, out: &mut Vec<f64>) {
        self.energy.write_params(out);
        self.entropy.write_params(out);
        self.poisson_net.write_params(out);
        self.friction_net.write_params(out);
        self.poisson_basis.raw.write_params(out);
        if let Some(b) = &self.friction_basis {
            b.raw.write_params(out);
        }
    }

    fn read_params(&mut self, src: &[f64]) -> Result<()> {
        let mut parts: Vec<&mut dyn Parametric> = vec![
            &mut self.energy,
            &mut self.entropy,
            &mut self.poisson_net,
            &mut self.friction_net,
            &mut self.poisson_basis.raw,
        ];
        if let Some(b) = &mut self.friction_basis {
            parts.push(&mut b.raw);
        }
        let total: usize = parts.iter().map(|p| p.num_params()).sum();
        crate::nn::read_all(&mut parts, &src[..total.min(src.len())])
    }
}

/// A [`GfinnDynamics`] bound to tape nodes.
#[derive(Clone, Debug)]
pub struct BoundGfinn {
    n: usize,
    k: usize,
    pub energy: BoundMlp,
    pub entropy: BoundMlp,
    pub poisson_net: BoundMlp,
    pub friction_net: BoundMlp,
    pub poisson_basis: Var,
    pub friction_basis: Option<Var>,
}

impl BoundGfinn {
    pub fn param_nodes(&self) -> Vec<Var> {
        let mut v = self.energy.param_nodes();
        v.extend(self.entropy.param_nodes());
        v.extend(self.poisson_net.param_nodes());
        v.extend(self.friction_net.param_nodes());
        v.push(self.poisson_basis);
        v.extend(self.friction_basis);
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

    /// Per-sample flattened `K x n` Q-matrices for gradients `g` (`B x n`).
    fn q_rows(&self, tape: &mut Tape, g: Var, basis: Var) -> Result<Var> {
        let stacked = SkewBasis::bind_stacked(tape, basis, self.n)?;
        tape.matmul_nt(g, stacked)
    }

    pub fn eval(&self, tape: &mut Tape, z: Var) -> Result<RhsTerms> {
        let (n, k) = (self.n, self.k);
        let p = self.potentials(tape, z)?;

        // L ∇E = Q_Sᵀ U (Q_S ∇E)
        let qs = self.q_rows(tape, p.grad_entropy, self.poisson_basis)?;
        let v = tape.row_matvec(qs, p.grad_energy, k, n)?;
        let uraw = self.poisson_net.forward(tape, z)?;
        let ut = tape.row_transpose(uraw, k, k)?;
        let u = tape.sub(uraw, ut)?;
        let w = tape.row_matvec(u, v, k, k)?;
        let reversible = tape.row_mat_tvec(qs, w, k, n)?;

        // M ∇S = Q_Eᵀ D Dᵀ (Q_E ∇S)
        let fb = self.friction_basis.unwrap_or(self.poisson_basis);
        let qe = self.q_rows(tape, p.grad_energy, fb)?;
        let v2 = tape.row_matvec(qe, p.grad_entropy, k, n)?;
        let d = self.friction_net.forward(tape, z)?;
        let y = tape.row_mat_tvec(d, v2, k, k)?;
        let w2 = tape.row_matvec(d, y, k, k)?;
        let irreversible = tape.row_mat_tvec(qe, w2, k, n)?;

        let rhs = tape.add(reversible, irreversible)?;
        Ok(RhsTerms {
            rhs,
            potentials: Some(p),
        })
    }

    /// `(L∇S, M∇E)` per sample; zero up to rounding by construction.
    pub fn degeneracy(&self, tape: &mut Tape, z: Var) -> Result<(Var, Var)> {
        let (n, k) = (self.n, self.k);
        let p = self.potentials(tape, z)?;
        let qs = self.q_rows(tape, p.grad_entropy, self.poisson_basis)?;
        let v = tape.row_matvec(qs, p.grad_entropy, k, n)?;
        let uraw = self.poisson_net.forward(tape, z)?;
        let ut = tape.row_transpose(uraw, k, k)?;
        let u = tape.sub(uraw, ut)?;
        let w = tape.row_matvec(u, v, k, k)?;
        let l_grad_s = tape.row_mat_tvec(qs, w, k, n)?;

        let fb = self.friction_basis.unwrap_or(self.poisson_basis);
        let qe = self.q_rows(tape, p.grad_energy, fb)?;
        let v2 = tape.row_matvec(qe, p.grad_energy, k, n)?;
        let d = self.friction_net.forward(tape, z)?;
        let y = tape.row_mat_tvec(d, v2, k, k)?;
        let w2 = tape.row_matvec(d, y, k, k)?;
        let m_grad_e = tape.row_mat_tvec(qe, w2, k, n)?;
        Ok((l_grad_s, m_grad_e))
    }
}
