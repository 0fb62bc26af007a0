use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::autodiff::{norm2, Activation, Matrix, Tape};
use crate::dynamics::{Dynamics, FnnDynamics};
use crate::error::{Error, Result};
use crate::nn::{Architecture, Autoencoder, Mlp};

use super::error_bound::{cumulative_trapezoid, error_components_from_parts, ErrorReport};

/// Random symmetric matrix `(A + Aᵀ)/2` with `A_ij ~ U(−1, 1)`.
pub fn random_symmetric(n: usize, rng: &mut impl Rng) -> Matrix {
    let a: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let a = Matrix::from_vec(n, n, a).expect("square");
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s.set(i, j, 0.5 * (a.get(i, j) + a.get(j, i)));
        }
    }
    s
}

/// Eigendecomposition of a symmetric `M` split into the `n` largest eigenpairs (`Q`, `Σ`)
/// and the rest (`Q̃`, `Σ̃`).
#[derive(Clone, Debug)]
pub struct SpectralRom {
    m: Matrix,
    eigenvalues: Vec<f64>,
    /// Columns are eigenvectors, ordered like `eigenvalues` (descending).
    eigenvectors: Matrix,
    n: usize,
}

impl SpectralRom {
    pub fn new(m: &Matrix, n: usize) -> Result<Self> {
        let size = m.rows();
        if m.cols() != size {
            return Err(Error::dim("square matrix", size, m.cols()));
        }
        if n == 0 || n > size {
            return Err(Error::Config(format!("latent dimension {n} must lie in 1..={size}")));
        }
        let scale = m.max_abs().max(1.0);
        for i in 0..size {
            for j in 0..i {
                if (m.get(i, j) - m.get(j, i)).abs() > 1e-12 * scale {
                    return Err(Error::Domain(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        let dm = DMatrix::from_row_slice(size, size, m.as_slice());
        let eig = SymmetricEigen::try_new(dm, f64::EPSILON, 10_000)
            .ok_or_else(|| Error::Solver("symmetric eigensolver did not converge".into()))?;
        let mut order: Vec<usize> = (0..size).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut vecs = Matrix::zeros(size, size);
        for (c, &j) in order.iter().enumerate() {
            for i in 0..size {
                vecs.set(i, c, eig.eigenvectors[(i, j)]);
            }
        }
        Ok(Self {
            m: m.clone(),
            eigenvalues: order.iter().map(|&j| eig.eigenvalues[j]).collect(),
            eigenvectors: vecs,
            n,
        })
    }

    pub fn full_dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.n
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    fn columns(&self, start: usize, len: usize) -> Matrix {
        let mut out = Matrix::zeros(self.full_dim(), len);
        for i in 0..self.full_dim() {
            for c in 0..len {
                out.set(i, c, self.eigenvectors.get(i, start + c));
            }
        }
        out
    }

    /// `Q`, `N × n`.
    pub fn q(&self) -> Matrix {
        self.columns(0, self.n)
    }

    /// `Q̃`, `N × (N − n)`.
    pub fn q_rest(&self) -> Matrix {
        self.columns(self.n, self.full_dim() - self.n)
    }

    /// Linear autoencoder `φ_e = Qᵀ·`, `φ_d = Q·`.
    pub fn autoencoder(&self) -> Result<Autoencoder> {
        let (big, n) = (self.full_dim(), self.n);
        let q = self.q();
        let mut enc = q.transpose().into_vec();
        enc.extend(std::iter::repeat_n(0.0, n));
        let mut dec = q.into_vec();
        dec.extend(std::iter::repeat_n(0.0, big));
        Autoencoder::full_rank(
            Mlp::new(Architecture::uniform(vec![big, n], Activation::Identity)?, enc)?,
            Mlp::new(Architecture::uniform(vec![n, big], Activation::Identity)?, dec)?,
        )
    }

    /// Latent dynamics `F^r(z) = Σz`.
    pub fn dynamics(&self) -> Result<Dynamics> {
        let n = self.n;
        let mut w = vec![0.0; n * n + n];
        for i in 0..n {
            w[i * n + i] = self.eigenvalues[i];
        }
        Ok(Dynamics::Fnn(FnnDynamics::new(Mlp::new(Architecture::uniform(vec![n, n], Activation::Identity)?, w)?)?))
    }

    /// `e^{Mt} x0`.
    pub fn flow(&self, x0: &[f64], t: f64) -> Vec<f64> {
        let c = self.eigenvectors.transpose().matvec(x0).expect("dimension");
        let scaled: Vec<f64> = c.iter().zip(&self.eigenvalues).map(|(v, l)| v * (l * t).exp()).collect();
        self.eigenvectors.matvec(&scaled).expect("dimension")
    }

    /// `e^{Σt} Qᵀ x0`.
    pub fn latent_flow(&self, x0: &[f64], t: f64) -> Vec<f64> {
        let c = self.q().transpose().matvec(x0).expect("dimension");
        c.iter().zip(&self.eigenvalues).map(|(v, l)| v * (l * t).exp()).collect()
    }

    /// `Q̃ diag(d) Q̃ᵀ x` for the trailing eigenpairs.
    fn rest_map(&self, x: &[f64], d: impl Fn(f64) -> f64) -> Vec<f64> {
        let qr = self.q_rest();
        let c = qr.transpose().matvec(x).expect("dimension");
        let s: Vec<f64> = c.iter().zip(&self.eigenvalues[self.n..]).map(|(v, l)| v * d(*l)).collect();
        qr.matvec(&s).expect("dimension")
    }
}

/// Largest absolute discrepancy of each of the four linear-case identities.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IdentityCheck {
    /// `φ_e(x) − z = Qᵀx − z`
    pub encoder_gap: f64,
    /// `(I − J)ẋ = Q̃Σ̃Q̃ᵀx`
    pub projection: f64,
    /// `F(x) − J_d F^r(z) = QΣ(Qᵀx − z) + Q̃Σ̃Q̃ᵀx`
    pub decoder_model: f64,
    /// `J_e F(x) − F^r(z) = Σ(Qᵀx − z)`
    pub encoder_model: f64,
}

impl IdentityCheck {
    pub fn max(&self) -> f64 {
        self.encoder_gap.max(self.projection).max(self.decoder_model).max(self.encoder_model)
    }
}

fn max_diff(a: &Matrix, b: &[Vec<f64>]) -> f64 {
    b.iter()
        .enumerate()
        .flat_map(|(k, row)| a.row(k).iter().zip(row).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

/// Evaluates the left-hand sides through the generic autoencoder/jvp machinery and the
/// right-hand sides from the spectral factors, at the row pairs of `xs` and `zs`.
pub fn check_identities(rom: &SpectralRom, xs: &Matrix, zs: &Matrix) -> Result<IdentityCheck> {
    let ae = rom.autoencoder()?;
    let dynamics = rom.dynamics()?;
    let xdot = xs.matmul(&rom.m.transpose())?;
    let mut tape = Tape::new();
    let b = ae.bind(&mut tape)?;
    let d = dynamics.bind(&mut tape)?;
    let x = tape.constant(xs.clone());
    let z = tape.constant(zs.clone());
    let fx = tape.constant(xdot.clone());
    let zhat = b.encode(&mut tape, x)?;
    let xhat = b.decode(&mut tape, zhat)?;
    let xz = b.decode(&mut tape, z)?;
    let fr = d.rhs(&mut tape, z)?;
    let gap = tape.sub(zhat, z)?;
    let je = tape.tangents(&[x], &[fx], &[zhat])?[0];
    let jj = tape.tangents(&[zhat], &[je], &[xhat])?[0];
    let proj = tape.sub(fx, jj)?;
    let jdf = tape.tangents(&[z], &[fr], &[xz])?[0];
    let dm = tape.sub(fx, jdf)?;
    let em = tape.sub(je, fr)?;

    let q = rom.q();
    let mut rhs_gap = Vec::new();
    let mut rhs_proj = Vec::new();
    let mut rhs_dm = Vec::new();
    let mut rhs_em = Vec::new();
    for k in 0..xs.rows() {
        let x = xs.row(k);
        let g: Vec<f64> = q.transpose().matvec(x)?.iter().zip(zs.row(k)).map(|(a, b)| a - b).collect();
        let sg: Vec<f64> = g.iter().zip(rom.eigenvalues()).map(|(v, l)| v * l).collect();
        let tail = rom.rest_map(x, |l| l);
        let qsg = q.matvec(&sg)?;
        rhs_dm.push(qsg.iter().zip(&tail).map(|(a, b)| a + b).collect());
        rhs_proj.push(tail);
        rhs_em.push(sg);
        rhs_gap.push(g);
    }
    Ok(IdentityCheck {
        encoder_gap: max_diff(tape.value(gap), &rhs_gap),
        projection: max_diff(tape.value(proj), &rhs_proj),
        decoder_model: max_diff(tape.value(dm), &rhs_dm),
        encoder_model: max_diff(tape.value(em), &rhs_em),
    })
}

/// Measured error and bounds of the spectral ROM along the exact trajectory.
#[derive(Clone, Debug)]
pub struct LinearCase {
    pub times: Vec<f64>,
    /// `‖x(t) − Q z(t)‖` with the exact latent flow.
    pub measured: Vec<f64>,
    /// `‖Q̃Q̃ᵀx(t₀)‖ + ∫ ‖Q̃Σ̃Q̃ᵀx‖ ds` by the trapezoid rule.
    pub bound: Vec<f64>,
    /// Generic error components of the same rollout.
    pub report: ErrorReport,
    pub identities: IdentityCheck,
}

impl LinearCase {
    /// `bound / measured` where the measured error is positive.
    pub fn ratio(&self) -> Vec<Option<f64>> {
        self.measured.iter().zip(&self.bound).map(|(m, b)| (*m > 0.0).then(|| b / m)).collect()
    }

    /// Smallest `C` with `measured ≤ C · bound`.
    pub fn constant(&self) -> f64 {
        self.measured
            .iter()
            .zip(&self.bound)
            .filter(|(_, b)| **b > 0.0)
            .map(|(m, b)| m / b)
            .fold(0.0, f64::max)
    }
}

/// Builds the rank-`n` spectral ROM of `ẋ = Mx`, checks the identities on perturbed
/// trajectory points and evaluates errors on `steps + 1` uniform times in `[0, t_end]`.
pub fn linear_rom_case(m: &Matrix, n: usize, x0: &[f64], t_end: f64, steps: usize) -> Result<LinearCase> {
    let rom = SpectralRom::new(m, n)?;
    if x0.len() != rom.full_dim() {
        return Err(Error::dim("initial state", rom.full_dim(), x0.len()));
    }
    if steps == 0 || !(t_end > 0.0) {
        return Err(Error::Config("linear case needs a positive horizon and at least one step".into()));
    }
    let times: Vec<f64> = (0..=steps).map(|k| t_end * k as f64 / steps as f64).collect();
    let states = Matrix::from_rows(&times.iter().map(|&t| rom.flow(x0, t)).collect::<Vec<_>>())?;
    let latent = Matrix::from_rows(&times.iter().map(|&t| rom.latent_flow(x0, t)).collect::<Vec<_>>())?;
    let derivatives = states.matmul(&m.transpose())?;
    let ae = rom.autoencoder()?;
    let report = error_components_from_parts(&ae, &rom.dynamics()?, &times, &states, Some(&derivatives), &latent)?;

    let decoded = ae.decode_batch(&latent)?;
    let measured = (0..times.len()).map(|k| norm2(&crate::autodiff::sub_vec(states.row(k), decoded.row(k)))).collect();
    let tail: Vec<f64> = (0..times.len()).map(|k| norm2(&rom.rest_map(states.row(k), |l| l))).collect();
    let start = norm2(&rom.rest_map(x0, |_| 1.0));
    let bound = cumulative_trapezoid(&times, &tail).into_iter().map(|v| start + v).collect();

    let mut perturbed = latent.clone();
    for k in 0..perturbed.rows() {
        for i in 0..n {
            let v = perturbed.get(k, i) + 0.25 * (1.0 + k as f64 + 3.0 * i as f64).sin();
            perturbed.set(k, i, v);
        }
    }
    let identities = check_identities(&rom, &states, &perturbed)?;
    Ok(LinearCase { times, measured, bound, report, identities })
}
