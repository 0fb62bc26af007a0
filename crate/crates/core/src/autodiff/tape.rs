//! Matrix-level Wengert tape.
//!
//! Every kernel records its inputs and its eagerly computed value. Gradients
//! ([`Tape::gradients`]) and tangents ([`Tape::tangents`]) are produced by
//! appending new nodes to the same tape, so the results are themselves
//! differentiable. A loss that contains `∇_z E(z)` or an encoder JVP can then
//! be differentiated with respect to the network parameters by a second
//! gradient sweep.
//!
//! Values are batched: row `b` of an operand is sample `b`. The `Row*`
//! kernels treat each row as a small flattened matrix.

use std::rc::Rc;

use super::activation::Activation;
use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul { a: Var, b: Var, ta: bool, tb: bool },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    MulScalar(Var, Var),
    AddRow(Var, Var),
    SumRows(Var),
    BroadcastRows(Var, usize),
    SumAll(Var),
    Fill(Var, usize, usize),
    Act(Var, Activation, u8),
    Transpose(Var),
    Reshape(Var),
    SliceCols(Var, usize),
    PadCols(Var, usize, usize),
    GatherRows(Var, Rc<[usize]>),
    ScatterRows(Var, Rc<[usize]>, usize),
    RowMatVec { m: Var, v: Var, p: usize, q: usize },
    RowMatTVec { m: Var, w: Var, p: usize, q: usize },
    RowOuter(Var, Var),
    RowTranspose { a: Var, p: usize, q: usize },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul { .. } => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::MulScalar(..) => "mul_scalar",
            Op::AddRow(..) => "add_row",
            Op::SumRows(..) => "sum_rows",
            Op::BroadcastRows(..) => "broadcast_rows",
            Op::SumAll(..) => "sum_all",
            Op::Fill(..) => "fill",
            Op::Act(..) => "activation",
            Op::Transpose(..) => "transpose",
            Op::Reshape(..) => "reshape",
            Op::SliceCols(..) => "slice_cols",
            Op::PadCols(..) => "pad_cols",
            Op::GatherRows(..) => "gather_rows",
            Op::ScatterRows(..) => "scatter_rows",
            Op::RowMatVec { .. } => "row_matvec",
            Op::RowMatTVec { .. } => "row_mat_tvec",
            Op::RowOuter(..) => "row_outer",
            Op::RowTranspose { .. } => "row_transpose",
        }
    }

    fn inputs(&self) -> [Option<Var>; 2] {
        match *self {
            Op::Leaf => [None, None],
            Op::MatMul { a, b, .. }
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::MulScalar(a, b)
            | Op::AddRow(a, b)
            | Op::RowOuter(a, b)
            | Op::RowMatVec { m: a, v: b, .. }
            | Op::RowMatTVec { m: a, w: b, .. } => [Some(a), Some(b)],
            Op::Scale(a, _)
            | Op::SumRows(a)
            | Op::BroadcastRows(a, _)
            | Op::SumAll(a)
            | Op::Fill(a, _, _)
            | Op::Act(a, _, _)
            | Op::Transpose(a)
            | Op::Reshape(a)
            | Op::SliceCols(a, _)
            | Op::PadCols(a, _, _)
            | Op::RowTranspose { a, .. } => [Some(a), None],
            Op::GatherRows(a, _) | Op::ScatterRows(a, _, _) => [Some(a), None],
        }
    }
}

struct Node {
    op: Op,
    value: Matrix,
}

/// Recording context for one differentiable computation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    first_nonfinite: Option<(usize, &'static str)>,
}

fn shape_err(context: &'static str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::dim(context, format!("{a:?}"), format!("{b:?}"))
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Scalar value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> Result<f64> {
        self.value(v).item()
    }

    /// First node whose value contained NaN or infinity, if any.
    pub fn check_finite(&self) -> Result<()> {
        match self.first_nonfinite {
            Some((node, op)) => Err(Error::NonFinite { node, op }),
            None => Ok(()),
        }
    }

    fn push(&mut self, op: Op, value: Matrix) -> Var {
        let idx = self.nodes.len();
        if self.first_nonfinite.is_none() && !value.is_finite() {
            self.first_nonfinite = Some((idx, op.name()));
        }
        self.nodes.push(Node { op, value });
        Var(idx)
    }

    /// Inputs, parameters and constants are all leaves.
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.leaf(value)
    }

    pub fn zeros(&mut self, rows: usize, cols: usize) -> Var {
        self.leaf(Matrix::zeros(rows, cols))
    }

    // ---- kernels -------------------------------------------------------

    /// `op(a) * op(b)` where `op` optionally transposes.
    pub fn matmul_t(&mut self, a: Var, ta: bool, b: Var, tb: bool) -> Result<Var> {
        let value = self.value(a).gemm(ta, self.value(b), tb)?;
        Ok(self.push(Op::MatMul { a, b, ta, tb }, value))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_t(a, false, b, false)
    }

    /// `a * bᵀ`; the layer kernel `X Wᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_t(a, false, b, true)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(Op::Add(a, b), value))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        Ok(self.push(Op::Sub(a, b), value))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        Ok(self.push(Op::Mul(a, b), value))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).scaled(c);
        self.push(Op::Scale(a, c), value)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    /// `s * a` for a `1 x 1` node `s`.
    pub fn mul_scalar(&mut self, a: Var, s: Var) -> Result<Var> {
        let c = self.value(s).item()?;
        let value = self.value(a).scaled(c);
        Ok(self.push(Op::MulScalar(a, s), value))
    }

    /// Adds the `1 x n` row `r` to every row of `a`.
    pub fn add_row(&mut self, a: Var, r: Var) -> Result<Var> {
        let (ar, ac) = self.shape(a);
        if self.shape(r) != (1, ac) {
            return Err(shape_err("add_row", (1, ac), self.shape(r)));
        }
        let mut value = self.value(a).clone();
        let row = self.value(r).as_slice();
        for i in 0..ar {
            for (x, b) in value.row_mut(i).iter_mut().zip(row) {
                *x += b;
            }
        }
        Ok(self.push(Op::AddRow(a, r), value))
    }

    pub fn sum_rows(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let mut value = Matrix::zeros(1, m.cols());
        for i in 0..m.rows() {
            for (x, v) in value.as_mut_slice().iter_mut().zip(m.row(i)) {
                *x += v;
            }
        }
        self.push(Op::SumRows(a), value)
    }

    pub fn broadcast_rows(&mut self, r: Var, rows: usize) -> Result<Var> {
        let src = self.value(r);
        if src.rows() != 1 {
            return Err(shape_err("broadcast_rows", (1, src.cols()), src.shape()));
        }
        let mut value = Matrix::zeros(rows, src.cols());
        for i in 0..rows {
            value.row_mut(i).copy_from_slice(src.as_slice());
        }
        Ok(self.push(Op::BroadcastRows(r, rows), value))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).sum());
        self.push(Op::SumAll(a), value)
    }

    /// Broadcasts a `1 x 1` node to `rows x cols`.
    pub fn fill(&mut self, s: Var, rows: usize, cols: usize) -> Result<Var> {
        let c = self.value(s).item()?;
        Ok(self.push(Op::Fill(s, rows, cols), Matrix::filled(rows, cols, c)))
    }

    /// `order`-th derivative of `act`, elementwise.
    pub fn act(&mut self, a: Var, act: Activation, order: u8) -> Result<Var> {
        if !act.supports_order(order) {
            return Err(Error::NonDifferentiable(format!(
                "derivative of order {order} of {act}"
            )));
        }
        let value = self.value(a).map(|x| act.eval(order, x));
        Ok(self.push(Op::Act(a, act, order), value))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        self.push(Op::Transpose(a), value)
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let value = self.value(a).clone().reshaped(rows, cols)?;
        Ok(self.push(Op::Reshape(a), value))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let m = self.value(a);
        if start + len > m.cols() {
            return Err(Error::dim("slice_cols", m.cols(), start + len));
        }
        let mut value = Matrix::zeros(m.rows(), len);
        for i in 0..m.rows() {
            value
                .row_mut(i)
                .copy_from_slice(&m.row(i)[start..start + len]);
        }
        Ok(self.push(Op::SliceCols(a, start), value))
    }

    /// Places `a` into columns `start..start + a.cols` of a zero matrix.
    pub fn pad_cols(&mut self, a: Var, start: usize, total: usize) -> Result<Var> {
        let m = self.value(a);
        if start + m.cols() > total {
            return Err(Error::dim("pad_cols", total, start + m.cols()));
        }
        let mut value = Matrix::zeros(m.rows(), total);
        for i in 0..m.rows() {
            value.row_mut(i)[start..start + m.cols()].copy_from_slice(m.row(i));
        }
        Ok(self.push(Op::PadCols(a, start, total), value))
    }

    /// Row `r` of the result is row `idx[r]` of `a`.
    pub fn gather_rows(&mut self, a: Var, idx: impl Into<Rc<[usize]>>) -> Result<Var> {
        let idx: Rc<[usize]> = idx.into();
        let m = self.value(a);
        let mut value = Matrix::zeros(idx.len(), m.cols());
        for (r, &i) in idx.iter().enumerate() {
            if i >= m.rows() {
                return Err(Error::dim("gather_rows", m.rows(), i + 1));
            }
            value.row_mut(r).copy_from_slice(m.row(i));
        }
        Ok(self.push(Op::GatherRows(a, idx), value))
    }

    /// Adjoint of [`Tape::gather_rows`]: accumulates row `r` into row `idx[r]`.
    pub fn scatter_rows(&mut self, a: Var, idx: impl Into<Rc<[usize]>>, rows: usize) -> Result<Var> {
        let idx: Rc<[usize]> = idx.into();
        let m = self.value(a);
        if idx.len() != m.rows() {
            return Err(Error::dim("scatter_rows", m.rows(), idx.len()));
        }
        let mut value = Matrix::zeros(rows, m.cols());
        for (r, &i) in idx.iter().enumerate() {
            if i >= rows {
                return Err(Error::dim("scatter_rows", rows, i + 1));
            }
            for (x, v) in value.row_mut(i).iter_mut().zip(m.row(r)) {
                *x += v;
            }
        }
        Ok(self.push(Op::ScatterRows(a, idx, rows), value))
    }

    /// Per-row matrix-vector product: row `b` of `m` is a flattened `p x q`
    /// matrix, row `b` of `v` a length-`q` vector; the result is `B x p`.
    pub fn row_matvec(&mut self, m: Var, v: Var, p: usize, q: usize) -> Result<Var> {
        let (mm, vv) = (self.value(m), self.value(v));
        if mm.cols() != p * q || vv.cols() != q || mm.rows() != vv.rows() {
            return Err(shape_err("row_matvec", mm.shape(), vv.shape()));
        }
        let mut value = Matrix::zeros(mm.rows(), p);
        for b in 0..mm.rows() {
            let (mr, vr) = (mm.row(b), vv.row(b));
            let out = value.row_mut(b);
            for i in 0..p {
                out[i] = mr[i * q..(i + 1) * q]
                    .iter()
                    .zip(vr)
                    .map(|(x, y)| x * y)
                    .sum();
            }
        }
        Ok(self.push(Op::RowMatVec { m, v, p, q }, value))
    }

    /// Per-row transposed product `Mᵀ w` with `M` flattened `p x q`; `B x q`.
    pub fn row_mat_tvec(&mut self, m: Var, w: Var, p: usize, q: usize) -> Result<Var> {
        let (mm, ww) = (self.value(m), self.value(w));
        if mm.cols() != p * q || ww.cols() != p || mm.rows() != ww.rows() {
            return Err(shape_err("row_mat_tvec", mm.shape(), ww.shape()));
        }
        let mut value = Matrix::zeros(mm.rows(), q);
        for b in 0..mm.rows() {
            let (mr, wr) = (mm.row(b), ww.row(b));
            let out = value.row_mut(b);
            for i in 0..p {
                let wi = wr[i];
                for (o, x) in out.iter_mut().zip(&mr[i * q..(i + 1) * q]) {
                    *o += x * wi;
                }
            }
        }
        Ok(self.push(Op::RowMatTVec { m, w, p, q }, value))
    }

    /// Per-row outer product `a cᵀ`, flattened row-major to `B x (p q)`.
    pub fn row_outer(&mut self, a: Var, c: Var) -> Result<Var> {
        let (am, cm) = (self.value(a), self.value(c));
        if am.rows() != cm.rows() {
            return Err(shape_err("row_outer", am.shape(), cm.shape()));
        }
        let (p, q) = (am.cols(), cm.cols());
        let mut value = Matrix::zeros(am.rows(), p * q);
        for b in 0..am.rows() {
            let (ar, cr) = (am.row(b), cm.row(b));
            let out = value.row_mut(b);
            for i in 0..p {
                for j in 0..q {
                    out[i * q + j] = ar[i] * cr[j];
                }
            }
        }
        Ok(self.push(Op::RowOuter(a, c), value))
    }

    /// Transposes each row viewed as a flattened `p x q` matrix.
    pub fn row_transpose(&mut self, a: Var, p: usize, q: usize) -> Result<Var> {
        let am = self.value(a);
        if am.cols() != p * q {
            return Err(Error::dim("row_transpose", p * q, am.cols()));
        }
        let mut value = Matrix::zeros(am.rows(), p * q);
        for b in 0..am.rows() {
            let (src, dst) = (am.row(b), value.row_mut(b));
            for i in 0..p {
                for j in 0..q {
                    dst[j * p + i] = src[i * q + j];
                }
            }
        }
        Ok(self.push(Op::RowTranspose { a, p, q }, value))
    }

    // ---- composites ----------------------------------------------------

    pub fn sum_squares(&mut self, a: Var) -> Result<Var> {
        let sq = self.mul(a, a)?;
        Ok(self.sum_all(sq))
    }

    /// Per-row inner products, `B x 1`.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let q = self.shape(a).1;
        self.row_matvec(a, b, 1, q)
    }

    fn add_opt(&mut self, a: Option<Var>, b: Option<Var>) -> Result<Option<Var>> {
        Ok(match (a, b) {
            (Some(x), Some(y)) => Some(self.add(x, y)?),
            (x, None) => x,
            (None, y) => y,
        })
    }

    fn accumulate(&mut self, slot: &mut Option<Var>, contrib: Var) -> Result<()> {
        *slot = Some(match *slot {
            Some(prev) => self.add(prev, contrib)?,
            None => contrib,
        });
        Ok(())
    }

    // ---- reverse sweep -------------------------------------------------

    /// Adjoint contributions `(input, adjoint)` for node `i` given its adjoint `g`.
    fn vjp(&mut self, i: usize, g: Var, needs: &[bool]) -> Result<Vec<(Var, Var)>> {
        let op = self.nodes[i].op.clone();
        let need = |v: Var| needs[v.0];
        let mut out = Vec::with_capacity(2);
        match op {
            Op::Leaf => {}
            Op::MatMul { a, b, ta, tb } => {
                if need(a) {
                    let da = if ta {
                        self.matmul_t(b, tb, g, true)?
                    } else {
                        self.matmul_t(g, false, b, !tb)?
                    };
                    out.push((a, da));
                }
                if need(b) {
                    let db = if tb {
                        self.matmul_t(g, true, a, ta)?
                    } else {
                        self.matmul_t(a, !ta, g, false)?
                    };
                    out.push((b, db));
                }
            }
            Op::Add(a, b) => {
                if need(a) {
                    out.push((a, g));
                }
                if need(b) {
                    out.push((b, g));
                }
            }
            Op::Sub(a, b) => {
                if need(a) {
                    out.push((a, g));
                }
                if need(b) {
                    let nb = self.neg(g);
                    out.push((b, nb));
                }
            }
            Op::Mul(a, b) => {
                if need(a) {
                    let da = self.mul(g, b)?;
                    out.push((a, da));
                }
                if need(b) {
                    let db = self.mul(g, a)?;
                    out.push((b, db));
                }
            }
            Op::Scale(a, c) => {
                if need(a) {
                    let da = self.scale(g, c);
                    out.push((a, da));
                }
            }
            Op::MulScalar(a, s) => {
                if need(a) {
                    let da = self.mul_scalar(g, s)?;
                    out.push((a, da));
                }
                if need(s) {
                    let prod = self.mul(g, a)?;
                    let ds = self.sum_all(prod);
                    out.push((s, ds));
                }
            }
            Op::AddRow(a, r) => {
                if need(a) {
                    out.push((a, g));
                }
                if need(r) {
                    let dr = self.sum_rows(g);
                    out.push((r, dr));
                }
            }
            Op::SumRows(a) => {
                let rows = self.shape(a).0;
                let da = self.broadcast_rows(g, rows)?;
                out.push((a, da));
            }
            Op::BroadcastRows(r, _) => {
                let dr = self.sum_rows(g);
                out.push((r, dr));
            }
            Op::SumAll(a) => {
                let (r, c) = self.shape(a);
                let da = self.fill(g, r, c)?;
                out.push((a, da));
            }
            Op::Fill(s, _, _) => {
                let ds = self.sum_all(g);
                out.push((s, ds));
            }
            Op::Act(a, act, order) => {
                let d = self.act(a, act, order + 1)?;
                let da = self.mul(g, d)?;
                out.push((a, da));
            }
            Op::Transpose(a) => {
                let da = self.transpose(g);
                out.push((a, da));
            }
            Op::Reshape(a) => {
                let (r, c) = self.shape(a);
                let da = self.reshape(g, r, c)?;
                out.push((a, da));
            }
            Op::SliceCols(a, start) => {
                let total = self.shape(a).1;
                let da = self.pad_cols(g, start, total)?;
                out.push((a, da));
            }
            Op::PadCols(a, start, _) => {
                let len = self.shape(a).1;
                let da = self.slice_cols(g, start, len)?;
                out.push((a, da));
            }
            Op::GatherRows(a, idx) => {
                let rows = self.shape(a).0;
                let da = self.scatter_rows(g, idx, rows)?;
                out.push((a, da));
            }
            Op::ScatterRows(a, idx, _) => {
                let da = self.gather_rows(g, idx)?;
                out.push((a, da));
            }
            Op::RowMatVec { m, v, p, q } => {
                if need(m) {
                    let dm = self.row_outer(g, v)?;
                    out.push((m, dm));
                }
                if need(v) {
                    let dv = self.row_mat_tvec(m, g, p, q)?;
                    out.push((v, dv));
                }
            }
            Op::RowMatTVec { m, w, p, q } => {
                if need(m) {
                    let dm = self.row_outer(w, g)?;
                    out.push((m, dm));
                }
                if need(w) {
                    let dw = self.row_matvec(m, g, p, q)?;
                    out.push((w, dw));
                }
            }
            Op::RowOuter(a, c) => {
                let (p, q) = (self.shape(a).1, self.shape(c).1);
                if need(a) {
                    let da = self.row_matvec(g, c, p, q)?;
                    out.push((a, da));
                }
                if need(c) {
                    let dc = self.row_mat_tvec(g, a, p, q)?;
                    out.push((c, dc));
                }
            }
            Op::RowTranspose { a, p, q } => {
                let da = self.row_transpose(g, q, p)?;
                out.push((a, da));
            }
        }
        Ok(out)
    }

    /// Marks nodes at or after the earliest of `roots` that depend on any root.
    fn dependents(&self, roots: &[Var], upto: usize) -> Vec<bool> {
        let mut dep = vec![false; upto + 1];
        let Some(start) = roots.iter().map(|v| v.0).min() else {
            return dep;
        };
        for r in roots {
            if r.0 <= upto {
                dep[r.0] = true;
            }
        }
        for i in start..=upto {
            if dep[i] {
                continue;
            }
            dep[i] = self.nodes[i]
                .op
                .inputs()
                .iter()
                .flatten()
                .any(|v| dep[v.0]);
        }
        dep
    }

    /// Gradients of the scalar `output` with respect to each of `wrt`.
    ///
    /// The returned nodes live on this tape and may be differentiated again.
    /// A `wrt` entry that does not influence `output` gets a zero node.
    pub fn gradients(&mut self, output: Var, wrt: &[Var]) -> Result<Vec<Var>> {
        let (r, c) = self.shape(output);
        if (r, c) != (1, 1) {
            return Err(Error::NonScalar { rows: r, cols: c });
        }
        let seed = self.leaf(Matrix::scalar(1.0));
        self.gradients_seeded(output, seed, wrt)
    }

    /// Vector-Jacobian product: adjoint `seed` (same shape as `output`)
    /// pulled back to each of `wrt`.
    pub fn gradients_seeded(&mut self, output: Var, seed: Var, wrt: &[Var]) -> Result<Vec<Var>> {
        if self.shape(seed) != self.shape(output) {
            return Err(shape_err("vjp seed", self.shape(output), self.shape(seed)));
        }
        let top = output.0;
        let needs = self.dependents(wrt, top);
        let mut adj: Vec<Option<Var>> = vec![None; top + 1];
        if needs[top] {
            adj[top] = Some(seed);
        }
        let start = wrt.iter().map(|v| v.0).min().unwrap_or(top);
        for i in (start..=top).rev() {
            let Some(g) = adj[i] else { continue };
            if !needs[i] {
                continue;
            }
            for (input, contrib) in self.vjp(i, g, &needs)? {
                let mut slot = adj[input.0];
                self.accumulate(&mut slot, contrib)?;
                adj[input.0] = slot;
            }
        }
        let mut out = Vec::with_capacity(wrt.len());
        for w in wrt {
            let g = match adj.get(w.0).copied().flatten() {
                Some(g) => g,
                None => {
                    let (r, c) = self.shape(*w);
                    self.zeros(r, c)
                }
            };
            out.push(g);
        }
        Ok(out)
    }

    // ---- forward tangent sweep ----------------------------------------

    fn jvp(&mut self, i: usize, tan: &[Option<Var>]) -> Result<Option<Var>> {
        let op = self.nodes[i].op.clone();
        let t = |v: Var| tan[v.0];
        Ok(match op {
            Op::Leaf => None,
            Op::MatMul { a, b, ta, tb } => {
                let x = match t(a) {
                    Some(da) => Some(self.matmul_t(da, ta, b, tb)?),
                    None => None,
                };
                let y = match t(b) {
                    Some(db) => Some(self.matmul_t(a, ta, db, tb)?),
                    None => None,
                };
                self.add_opt(x, y)?
            }
            Op::Add(a, b) => self.add_opt(t(a), t(b))?,
            Op::Sub(a, b) => match (t(a), t(b)) {
                (Some(x), Some(y)) => Some(self.sub(x, y)?),
                (x, None) => x,
                (None, Some(y)) => Some(self.neg(y)),
            },
            Op::Mul(a, b) => {
                let x = match t(a) {
                    Some(da) => Some(self.mul(da, b)?),
                    None => None,
                };
                let y = match t(b) {
                    Some(db) => Some(self.mul(a, db)?),
                    None => None,
                };
                self.add_opt(x, y)?
            }
            Op::Scale(a, c) => t(a).map(|da| self.scale(da, c)),
            Op::MulScalar(a, s) => {
                let x = match t(a) {
                    Some(da) => Some(self.mul_scalar(da, s)?),
                    None => None,
                };
                let y = match t(s) {
                    Some(ds) => Some(self.mul_scalar(a, ds)?),
                    None => None,
                };
                self.add_opt(x, y)?
            }
            Op::AddRow(a, r) => match (t(a), t(r)) {
                (Some(da), Some(dr)) => Some(self.add_row(da, dr)?),
                (Some(da), None) => Some(da),
                (None, Some(dr)) => {
                    let rows = self.shape(a).0;
                    Some(self.broadcast_rows(dr, rows)?)
                }
                (None, None) => None,
            },
            Op::SumRows(a) => t(a).map(|da| self.sum_rows(da)),
            Op::BroadcastRows(r, rows) => match t(r) {
                Some(dr) => Some(self.broadcast_rows(dr, rows)?),
                None => None,
            },
            Op::SumAll(a) => t(a).map(|da| self.sum_all(da)),
            Op::Fill(s, r, c) => match t(s) {
                Some(ds) => Some(self.fill(ds, r, c)?),
                None => None,
            },
            Op::Act(a, act, order) => match t(a) {
                Some(da) => {
                    let d = self.act(a, act, order + 1)?;
                    Some(self.mul(da, d)?)
                }
                None => None,
            },
            Op::Transpose(a) => t(a).map(|da| self.transpose(da)),
            Op::Reshape(a) => match t(a) {
                Some(da) => {
                    let (r, c) = self.shape(Var(i));
                    Some(self.reshape(da, r, c)?)
                }
                None => None,
            },
            Op::SliceCols(a, start) => match t(a) {
                Some(da) => {
                    let len = self.shape(Var(i)).1;
                    Some(self.slice_cols(da, start, len)?)
                }
                None => None,
            },
            Op::PadCols(a, start, total) => match t(a) {
                Some(da) => Some(self.pad_cols(da, start, total)?),
                None => None,
            },
            Op::GatherRows(a, idx) => match t(a) {
                Some(da) => Some(self.gather_rows(da, idx)?),
                None => None,
            },
            Op::ScatterRows(a, idx, rows) => match t(a) {
                Some(da) => Some(self.scatter_rows(da, idx, rows)?),
                None => None,
            },
            Op::RowMatVec { m, v, p, q } => {
                let x = match t(m) {
                    Some(dm) => Some(self.row_matvec(dm, v, p, q)?),
                    None => None,
                };
                let y = match t(v) {
                    Some(dv) => Some(self.row_matvec(m, dv, p, q)?),
                    None => None,
                };
                self.add_opt(x, y)?
            }
            Op::RowMatTVec { m, w, p, q } => {
                let x = match t(m) {
                    Some(dm) => Some(self.row_mat_tvec(dm, w, p, q)?),
                    None => None,
                };
                let y = match t(w) {
                    Some(dw) => Some(self.row_mat_tvec(m, dw, p, q)?),
                    None => None,
                };
                self.add_opt(x, y)?
            }
            Op::RowOuter(a, c) => {
                let x = match t(a) {
                    Some(da) => Some(self.row_outer(da, c)?),
                    None => None,
                };
                let y = match t(c) {
                    Some(dc) => Some(self.row_outer(a, dc)?),
                    None => None,
                };
                self.add_opt(x, y)?
            }
            Op::RowTranspose { a, p, q } => match t(a) {
                Some(da) => Some(self.row_transpose(da, p, q)?),
                None => None,
            },
        })
    }

    /// Forward-mode directional derivatives of `outputs` along `tangents`
    /// seeded at `inputs`. Outputs independent of the inputs get zero nodes.
    pub fn tangents(&mut self, inputs: &[Var], tangents: &[Var], outputs: &[Var]) -> Result<Vec<Var>> {
        if inputs.len() != tangents.len() {
            return Err(Error::dim("tangents", inputs.len(), tangents.len()));
        }
        for (x, v) in inputs.iter().zip(tangents) {
            if self.shape(*x) != self.shape(*v) {
                return Err(shape_err("tangent seed", self.shape(*x), self.shape(*v)));
            }
        }
        let Some(top) = outputs.iter().map(|v| v.0).max() else {
            return Ok(Vec::new());
        };
        let dep = self.dependents(inputs, top.max(inputs.iter().map(|v| v.0).max().unwrap_or(0)));
        // restrict to nodes feeding some output
        let mut needed = vec![false; top + 1];
        for o in outputs {
            needed[o.0] = true;
        }
        for i in (0..=top).rev() {
            if needed[i] {
                for v in self.nodes[i].op.inputs().iter().flatten() {
                    needed[v.0] = true;
                }
            }
        }
        let mut tan: Vec<Option<Var>> = vec![None; top + 1];
        for (x, v) in inputs.iter().zip(tangents) {
            if x.0 <= top {
                tan[x.0] = Some(*v);
            }
        }
        let start = inputs.iter().map(|v| v.0).min().unwrap_or(top);
        for i in start..=top {
            if tan[i].is_some() || !needed[i] || !dep[i] {
                continue;
            }
            tan[i] = self.jvp(i, &tan)?;
        }
        let mut out = Vec::with_capacity(outputs.len());
        for o in outputs {
            let t = match tan[o.0] {
                Some(t) => t,
                None => {
                    let (r, c) = self.shape(*o);
                    self.zeros(r, c)
                }
            };
            out.push(t);
        }
        Ok(out)
    }
}
