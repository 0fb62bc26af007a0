use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Matrix, Tape, Var};
use crate::dynamics::BoundDynamics;
use crate::error::{Error, Result};
use crate::fom::SnapshotSet;
use crate::integrate::{rk_on_tape, Scheme};
use crate::nn::{BoundAutoencoder, Parametric};

use super::batch::Batch;
use super::model::{BoundModel, LatentModel};

/// Weights of the loss components. `deg` only acts on SPNN dynamics, `reg` is an ℓ2
/// penalty on the dynamics parameters.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossWeights {
    pub int: f64,
    pub rec: f64,
    pub jac: f64,
    pub model: f64,
    pub deg: f64,
    pub reg: f64,
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.named() {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("loss weight {name} must be a finite nonnegative number, got {v}")));
            }
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("int", self.int),
            ("rec", self.rec),
            ("jac", self.jac),
            ("mod", self.model),
            ("deg", self.deg),
            ("reg", self.reg),
        ]
    }
}

/// How the Jacobian term is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum JacobianVariant {
    /// Derivative form when the data carry derivatives, Frobenius form otherwise.
    #[default]
    Auto,
    /// `Σ‖(I − J)ẋ‖²`.
    Derivative,
    /// `Σ‖I − J‖_F²`.
    Frobenius,
}

impl std::str::FromStr for JacobianVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(JacobianVariant::Auto),
            "derivative" => Ok(JacobianVariant::Derivative),
            "frobenius" => Ok(JacobianVariant::Frobenius),
            other => Err(Error::Config(format!("unknown Jacobian loss variant '{other}'"))),
        }
    }
}

/// Evaluation settings shared by every loss term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossOptions {
    pub jacobian: JacobianVariant,
    /// One-step scheme for the integral in the integration loss.
    pub scheme: Scheme,
    pub substeps: usize,
    /// Largest `N` for which `‖I − J‖_F²` is assembled column by column.
    pub exact_frobenius_max: usize,
    pub hutchinson_probes: usize,
    pub probe_seed: u64,
}

impl Default for LossOptions {
    fn default() -> Self {
        LossOptions {
            jacobian: JacobianVariant::Auto,
            scheme: Scheme::Rk4,
            substeps: 1,
            exact_frobenius_max: 512,
            hutchinson_probes: 32,
            probe_seed: 0,
        }
    }
}

/// Loss component values. Components that were not evaluated are zero.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossValues {
    pub int: f64,
    pub rec: f64,
    pub jac: f64,
    pub model: f64,
    pub deg: f64,
    pub reg: f64,
    pub total: f64,
}

/// Tape nodes of each evaluated component and the weighted total.
#[derive(Clone, Copy, Debug)]
pub struct LossNodes {
    pub int: Option<Var>,
    pub rec: Option<Var>,
    pub jac: Option<Var>,
    pub model: Option<Var>,
    pub deg: Option<Var>,
    pub reg: Option<Var>,
    pub total: Var,
}

impl LossNodes {
    pub fn values(&self, tape: &Tape) -> Result<LossValues> {
        let v = |n: Option<Var>| n.map(|n| tape.scalar(n)).transpose().map(|x| x.unwrap_or(0.0));
        Ok(LossValues {
            int: v(self.int)?,
            rec: v(self.rec)?,
            jac: v(self.jac)?,
            model: v(self.model)?,
            deg: v(self.deg)?,
            reg: v(self.reg)?,
            total: tape.scalar(self.total)?,
        })
    }
}

/// Which components to record. Derived from the weights, or forced on for reporting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Active {
    pub int: bool,
    pub rec: bool,
    pub jac: bool,
    pub model: bool,
    pub deg: bool,
    pub reg: bool,
}

impl Active {
    pub fn from_weights(w: &LossWeights) -> Self {
        Active {
            int: w.int > 0.0,
            rec: w.rec > 0.0,
            jac: w.jac > 0.0,
            model: w.model > 0.0,
            deg: w.deg > 0.0,
            reg: w.reg > 0.0,
        }
    }

    pub fn only(component: &str) -> Result<Self> {
        let mut a = Active { int: false, rec: false, jac: false, model: false, deg: false, reg: false };
        match component {
            "int" => a.int = true,
            "rec" => a.rec = true,
            "jac" => a.jac = true,
            "mod" => a.model = true,
            "deg" => a.deg = true,
            "reg" => a.reg = true,
            other => return Err(Error::Config(format!("unknown loss component '{other}'"))),
        }
        Ok(a)
    }
}

fn rows_of(m: &Matrix, idx: &[usize]) -> Result<Matrix> {
    let data = idx.iter().flat_map(|&k| m.row(k).iter().copied()).collect();
    Matrix::from_vec(idx.len(), m.cols(), data)
}

fn accumulate(tape: &mut Tape, acc: &mut Option<Var>, term: Var) -> Result<()> {
    *acc = Some(match *acc {
        Some(a) => tape.add(a, term)?,
        None => term,
    });
    Ok(())
}

/// `J_d(φ_e(x)) J_e(x) v` for each row, by two chained forward-mode passes.
fn ae_jvp(tape: &mut Tape, x: Var, z: Var, xhat: Var, v: Var) -> Result<(Var, Var)> {
    let je = tape.tangents(&[x], &[v], &[z])?[0];
    let j = tape.tangents(&[z], &[je], &[xhat])?[0];
    Ok((je, j))
}

/// `Σ_rows ‖I − J‖_F²`, exact or by Rademacher probes.
fn frobenius_term(tape: &mut Tape, x: Var, z: Var, xhat: Var, opts: &LossOptions, salt: u64) -> Result<Var> {
    let (b, n) = tape.shape(x);
    let mut acc = None;
    if n <= opts.exact_frobenius_max {
        for j in 0..n {
            let mut e = Matrix::zeros(b, n);
            (0..b).for_each(|r| e.set(r, j, 1.0));
            let v = tape.constant(e);
            let (_, jv) = ae_jvp(tape, x, z, xhat, v)?;
            let r = tape.sub(v, jv)?;
            let s = tape.sum_squares(r)?;
            accumulate(tape, &mut acc, s)?;
        }
        return Ok(acc.expect("n >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.probe_seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let probes = opts.hutchinson_probes.max(1);
    for _ in 0..probes {
        let data = (0..b * n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        let v = tape.constant(Matrix::from_vec(b, n, data)?);
        let (_, jv) = ae_jvp(tape, x, z, xhat, v)?;
        let r = tape.sub(v, jv)?;
        let s = tape.sum_squares(r)?;
        accumulate(tape, &mut acc, s)?;
    }
    Ok(tape.scale(acc.expect("probes >= 1"), 1.0 / probes as f64))
}

struct SetTerms {
    int: Option<Var>,
    rec: Option<Var>,
    jac: Option<Var>,
    model: Option<Var>,
    deg: Option<Var>,
}

#[allow(clippy::too_many_arguments)]
fn set_terms(
    tape: &mut Tape,
    ae: &BoundAutoencoder,
    dynamics: &BoundDynamics,
    set: &SnapshotSet,
    idx: &[usize],
    active: &Active,
    opts: &LossOptions,
    salt: u64,
) -> Result<SetTerms> {
    let mut out = SetTerms { int: None, rec: None, jac: None, model: None, deg: None };
    if idx.is_empty() {
        return Ok(out);
    }
    let x = tape.constant(rows_of(&set.states, idx)?);
    let z = ae.encode(tape, x)?;
    if active.int {
        let pos: Vec<usize> = (0..idx.len()).filter(|&i| idx[i] + 1 < set.len()).collect();
        if !pos.is_empty() {
            let dt = set
                .uniform_dt()
                .ok_or_else(|| Error::Config("integration loss needs a uniform time grid".into()))?;
            let next: Vec<usize> = pos.iter().map(|&i| idx[i] + 1).collect();
            let xn = tape.constant(rows_of(&set.states, &next)?);
            let zn = ae.encode(tape, xn)?;
            let zk = if pos.len() == idx.len() { z } else { tape.gather_rows(z, pos)? };
            let stepped = rk_on_tape(tape, |t, v| dynamics.rhs(t, v), zk, dt, opts.scheme, opts.substeps)?;
            let r = tape.sub(zn, stepped)?;
            out.int = Some(tape.sum_squares(r)?);
        }
    }
    let need_xhat = active.rec || active.jac || active.model;
    let xhat = if need_xhat { Some(ae.decode(tape, z)?) } else { None };
    if active.rec {
        let r = tape.sub(x, xhat.unwrap())?;
        out.rec = Some(tape.sum_squares(r)?);
    }
    let frobenius = match opts.jacobian {
        JacobianVariant::Frobenius => true,
        JacobianVariant::Derivative => false,
        JacobianVariant::Auto => set.derivatives.is_none(),
    };
    let xdot = if (active.jac && !frobenius) || active.model {
        let d = set
            .derivatives
            .as_ref()
            .ok_or(Error::MissingDerivatives("Jacobian and model losses need time derivatives"))?;
        Some(tape.constant(rows_of(d, idx)?))
    } else {
        None
    };
    let mut je_xdot = None;
    if active.jac {
        let xhat = xhat.unwrap();
        out.jac = Some(if frobenius {
            frobenius_term(tape, x, z, xhat, opts, salt)?
        } else {
            let xd = xdot.unwrap();
            let (je, jx) = ae_jvp(tape, x, z, xhat, xd)?;
            je_xdot = Some(je);
            let r = tape.sub(xd, jx)?;
            tape.sum_squares(r)?
        });
    }
    if active.model {
        let xd = xdot.unwrap();
        let je = match je_xdot {
            Some(je) => je,
            None => tape.tangents(&[x], &[xd], &[z])?[0],
        };
        let f = dynamics.rhs(tape, z)?;
        let r1 = tape.sub(je, f)?;
        let jdf = tape.tangents(&[z], &[f], &[xhat.unwrap()])?[0];
        let r2 = tape.sub(xd, jdf)?;
        let a = tape.sum_squares(r1)?;
        let b = tape.sum_squares(r2)?;
        out.model = Some(tape.add(a, b)?);
    }
    if active.deg {
        let (ls, me) = dynamics.degeneracy(tape, z)?;
        let a = tape.sum_squares(ls)?;
        let b = tape.sum_squares(me)?;
        out.deg = Some(tape.add(a, b)?);
    }
    Ok(out)
}

/// Records the selected loss components over `batch` and their weighted sum.
///
/// Without derivatives in the data, `JacobianVariant::Auto` switches the Jacobian term to
/// the Frobenius form and the model term is skipped.
pub fn record_losses(
    tape: &mut Tape,
    bound: &BoundModel,
    data: &[SnapshotSet],
    batch: &Batch,
    weights: &LossWeights,
    active: &Active,
    opts: &LossOptions,
) -> Result<LossNodes> {
    weights.validate()?;
    if active.deg && matches!(bound.dynamics, BoundDynamics::Fnn(_)) {
        return Err(Error::Config("degeneracy loss needs GFINN or SPNN dynamics".into()));
    }
    let mut active = *active;
    if opts.jacobian == JacobianVariant::Auto && active.model && data.iter().any(|d| d.derivatives.is_none()) {
        log::debug!("data without derivatives: model loss dropped");
        active.model = false;
    }
    let mut acc = SetTerms { int: None, rec: None, jac: None, model: None, deg: None };
    for item in &batch.items {
        let set = data.get(item.set).ok_or_else(|| Error::dim("batch set index", data.len(), item.set))?;
        let ae = bound.ae.at(tape, &set.mu)?;
        let t = set_terms(tape, &ae, &bound.dynamics, set, &item.indices, &active, opts, item.set as u64)?;
        for (a, v) in [
            (&mut acc.int, t.int),
            (&mut acc.rec, t.rec),
            (&mut acc.jac, t.jac),
            (&mut acc.model, t.model),
            (&mut acc.deg, t.deg),
        ] {
            if let Some(v) = v {
                accumulate(tape, a, v)?;
            }
        }
    }
    let mut reg = None;
    if active.reg {
        for node in bound.dynamics.param_nodes() {
            let s = tape.sum_squares(node)?;
            accumulate(tape, &mut reg, s)?;
        }
    }
    let zero = || Matrix::scalar(0.0);
    let mut total = tape.constant(zero());
    for (node, w, on) in [
        (acc.int, weights.int, active.int),
        (acc.rec, weights.rec, active.rec),
        (acc.jac, weights.jac, active.jac),
        (acc.model, weights.model, active.model),
        (acc.deg, weights.deg, active.deg),
        (reg, weights.reg, active.reg),
    ] {
        if let (Some(n), true) = (node, on && w != 0.0) {
            let s = tape.scale(n, w);
            total = tape.add(total, s)?;
        }
    }
    // components switched on but empty over this batch read as zero
    let fill = |tape: &mut Tape, n: Option<Var>, on: bool| if on { Some(n.unwrap_or_else(|| tape.constant(zero()))) } else { None };
    Ok(LossNodes {
        int: fill(tape, acc.int, active.int),
        rec: fill(tape, acc.rec, active.rec),
        jac: fill(tape, acc.jac, active.jac),
        model: fill(tape, acc.model, active.model),
        deg: fill(tape, acc.deg, active.deg),
        reg: fill(tape, reg, active.reg),
        total,
    })
}

/// Component values and the weighted total, without gradients.
pub fn evaluate_losses(
    model: &LatentModel,
    data: &[SnapshotSet],
    batch: &Batch,
    weights: &LossWeights,
    active: &Active,
    opts: &LossOptions,
) -> Result<LossValues> {
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape)?;
    let nodes = record_losses(&mut tape, &bound, data, batch, weights, active, opts)?;
    nodes.values(&tape)
}

/// Loss values and the gradient of the weighted total in [`Parametric`] order.
pub fn loss_and_gradient(
    model: &LatentModel,
    data: &[SnapshotSet],
    batch: &Batch,
    weights: &LossWeights,
    opts: &LossOptions,
) -> Result<(LossValues, Vec<f64>)> {
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape)?;
    let active = Active::from_weights(weights);
    let nodes = record_losses(&mut tape, &bound, data, batch, weights, &active, opts)?;
    let values = nodes.values(&tape)?;
    if !values.total.is_finite() {
        return Err(Error::NonFinite { node: nodes.total.index(), op: "loss" });
    }
    let params = bound.param_nodes();
    let grads = tape.gradients(nodes.total, &params)?;
    let mut g = Vec::with_capacity(model.num_params());
    for v in grads {
        g.extend_from_slice(tape.value(v).as_slice());
    }
    debug_assert_eq!(g.len(), model.num_params());
    Ok((values, g))
}

fn single(model: &LatentModel, data: &[SnapshotSet], batch: &Batch, name: &str, opts: &LossOptions) -> Result<f64> {
    let w = LossWeights { int: 1.0, rec: 1.0, jac: 1.0, model: 1.0, deg: 1.0, reg: 1.0 };
    let v = evaluate_losses(model, data, batch, &w, &Active::only(name)?, opts)?;
    Ok(v.total)
}

/// `Σ‖φ_e(x^{k+1}) − φ_e(x^k) − ∫F‖²` over the pairs in `batch`.
pub fn loss_int(model: &LatentModel, data: &[SnapshotSet], batch: &Batch, opts: &LossOptions) -> Result<f64> {
    single(model, data, batch, "int", opts)
}

/// `Σ‖x^k − φ_d(φ_e(x^k))‖²`.
pub fn loss_rec(model: &LatentModel, data: &[SnapshotSet], batch: &Batch, opts: &LossOptions) -> Result<f64> {
    single(model, data, batch, "rec", opts)
}

/// `Σ‖(I − J)ẋ^k‖²`, or `Σ‖I − J‖_F²` in the Frobenius variant.
pub fn loss_jac(model: &LatentModel, data: &[SnapshotSet], batch: &Batch, opts: &LossOptions) -> Result<f64> {
    if opts.jacobian == JacobianVariant::Derivative && data.iter().any(|d| d.derivatives.is_none()) {
        return Err(Error::MissingDerivatives("derivative Jacobian loss"));
    }
    single(model, data, batch, "jac", opts)
}

/// `Σ‖J_e ẋ − F(φ_e(x))‖² + ‖ẋ − J_d F(φ_e(x))‖²`.
pub fn loss_mod(model: &LatentModel, data: &[SnapshotSet], batch: &Batch, opts: &LossOptions) -> Result<f64> {
    if data.iter().any(|d| d.derivatives.is_none()) {
        return Err(Error::MissingDerivatives("model loss"));
    }
    let strict = LossOptions { jacobian: JacobianVariant::Derivative, ..*opts };
    single(model, data, batch, "mod", &strict)
}

/// `Σ‖L∇S‖² + ‖M∇E‖²` at the encoded snapshots. Only meaningful for SPNN dynamics;
/// GFINN models satisfy it by construction and are rejected.
pub fn loss_deg(model: &LatentModel, data: &[SnapshotSet], batch: &Batch, opts: &LossOptions) -> Result<f64> {
    match model.dynamics {
        crate::dynamics::Dynamics::Spnn(_) => degeneracy_penalty(model, data, batch, opts),
        _ => Err(Error::Config("degeneracy loss applies to SPNN dynamics only".into())),
    }
}

/// The degeneracy sum for any thermodynamic model, GFINN included.
pub fn degeneracy_penalty(model: &LatentModel, data: &[SnapshotSet], batch: &Batch, opts: &LossOptions) -> Result<f64> {
    single(model, data, batch, "deg", opts)
}

/// `‖θ_dyn‖²` as used by the weight-decay term.
pub fn dynamics_norm_squared(model: &LatentModel) -> f64 {
    model.dynamics.flat_params().iter().map(|v| v * v).sum()
}
