//! Tape-based reverse-mode differentiation.
//!
//! Every operation appends a node to the tape and computes its value
//! eagerly; values are checked for NaN/Inf at creation. The backward pass
//! does not write raw gradient buffers: it *records the gradient
//! computation as new tape nodes*. Because every primitive's
//! vector-Jacobian product is expressed in terms of the same primitive
//! vocabulary, gradients are themselves differentiable, which is what
//! lets the meta-learning loop take exact gradients through a chain of
//! inner SGD updates.
//!
//! The vocabulary is closed and intentionally small: it covers the GCN
//! forward pass, the prototype head, and the SGD update arithmetic, with
//! no general broadcasting.

use crate::autodiff::tensor::{matmul, Tensor};
use crate::error::{Error, Result};

pub type NodeId = usize;

/// Primitive operations. Inputs are node ids on the same tape.
#[derive(Debug, Clone)]
pub enum Op {
    /// Leaf holding a fixed value; never receives a gradient.
    Constant,
    /// Leaf holding a differentiable value (model weights, probe inputs).
    Param,
    /// `opA(a) * opB(b)` with optional transposes.
    MatMul {
        a: NodeId,
        b: NodeId,
        ta: bool,
        tb: bool,
    },
    /// Elementwise sum of two same-shape tensors.
    Add { a: NodeId, b: NodeId },
    /// Elementwise (Hadamard) product.
    Mul { a: NodeId, b: NodeId },
    /// `sum_i coeff_i * x_i` over same-shape tensors; also the scalar
    /// loss combiner and the SGD update rule.
    Lincomb { terms: Vec<(f64, NodeId)> },
    /// Elementwise `max(x, 0)`.
    Relu { a: NodeId },
    /// `g .* 1[a > 0]`: the ReLU backward as a first-class op, so that
    /// recorded backward passes can be differentiated once more.
    ReluGrad { a: NodeId, g: NodeId },
    /// Scale each row to sum to one; zero rows pass through. Restricted
    /// to constant inputs (adjacency normalization).
    RowNormalize { a: NodeId },
    /// Select rows by index; duplicates allowed.
    GatherRows { a: NodeId, idx: Vec<usize> },
    /// Adjoint of `GatherRows`: place row i of the input at `idx[i]` in a
    /// `rows x cols` zero tensor, accumulating duplicates.
    ScatterRows {
        a: NodeId,
        idx: Vec<usize>,
        rows: usize,
    },
    /// Column means: n x d -> 1 x d.
    MeanRows { a: NodeId },
    /// Repeat a 1 x d row n times.
    BroadcastRows { a: NodeId, rows: usize },
    /// Sum of all entries -> 1 x 1.
    SumAll { a: NodeId },
    /// Fill an r x c tensor with a scalar node's value.
    BroadcastScalar {
        a: NodeId,
        rows: usize,
        cols: usize,
    },
    /// Multiply a tensor elementwise by a 1 x 1 node.
    ScaleByScalar { x: NodeId, s: NodeId },
    /// Row of squared Euclidean distances from a 1 x d query to each row
    /// of an N x d matrix -> 1 x N.
    SquaredDistance { h: NodeId, c: NodeId },
    /// Elementwise power with fixed exponent. Guarded at zero: `0^p = 0`
    /// for negative p, which realizes the zero subgradient of `sqrt` at
    /// the origin (exact-zero prototype distances in 1-shot episodes).
    Pow { a: NodeId, p: f64 },
    Exp { a: NodeId },
    Log { a: NodeId },
    /// Max-shifted log(sum(exp(row))) : 1 x N -> 1 x 1.
    LogSumExpRow { a: NodeId },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

/// The recording tape. Single-writer; one tape per episode.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn guarded_pow(x: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else if x == 0.0 {
        0.0
    } else if x > 0.0 {
        x.powf(p)
    } else if p.fract() == 0.0 {
        x.powi(p as i32)
    } else {
        f64::NAN
    }
}

/// Evaluate one op against already-computed input values.
fn eval(op: &Op, values: &[Node]) -> Result<Tensor> {
    let val = |id: NodeId| -> &Tensor { &values[id].value };
    match op {
        Op::Constant | Op::Param => unreachable!("leaves carry their value"),
        Op::MatMul { a, b, ta, tb } => matmul(val(*a), *ta, val(*b), *tb),
        Op::Add { a, b } => {
            let (x, y) = (val(*a), val(*b));
            if x.shape() != y.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "add {:?} vs {:?}",
                    x.shape(),
                    y.shape()
                )));
            }
            let mut out = x.clone();
            out.axpy(1.0, y);
            Ok(out)
        }
        Op::Mul { a, b } => {
            let (x, y) = (val(*a), val(*b));
            if x.shape() != y.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "mul {:?} vs {:?}",
                    x.shape(),
                    y.shape()
                )));
            }
            let mut out = x.clone();
            for (o, v) in out.data_mut().iter_mut().zip(y.data()) {
                *o *= v;
            }
            Ok(out)
        }
        Op::Lincomb { terms } => {
            let first = terms
                .first()
                .ok_or_else(|| Error::Tape("empty lincomb".into()))?;
            let shape = val(first.1).shape();
            let mut out = Tensor::zeros(shape.0, shape.1);
            for (c, id) in terms {
                let x = val(*id);
                if x.shape() != shape {
                    return Err(Error::ShapeMismatch(format!(
                        "lincomb {:?} vs {:?}",
                        x.shape(),
                        shape
                    )));
                }
                out.axpy(*c, x);
            }
            Ok(out)
        }
        Op::Relu { a } => {
            let mut out = val(*a).clone();
            for v in out.data_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            Ok(out)
        }
        Op::ReluGrad { a, g } => {
            let (x, gr) = (val(*a), val(*g));
            if x.shape() != gr.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "relu_grad {:?} vs {:?}",
                    x.shape(),
                    gr.shape()
                )));
            }
            let mut out = gr.clone();
            for (o, v) in out.data_mut().iter_mut().zip(x.data()) {
                if *v <= 0.0 {
                    *o = 0.0;
                }
            }
            Ok(out)
        }
        Op::RowNormalize { a } => {
            let x = val(*a);
            let mut out = x.clone();
            for r in 0..x.rows() {
                let sum: f64 = x.row(r).iter().sum();
                if sum != 0.0 {
                    for c in 0..x.cols() {
                        out.set(r, c, x.at(r, c) / sum);
                    }
                }
            }
            Ok(out)
        }
        Op::GatherRows { a, idx } => {
            let x = val(*a);
            let mut out = Tensor::zeros(idx.len(), x.cols());
            for (i, &r) in idx.iter().enumerate() {
                if r >= x.rows() {
                    return Err(Error::Tape(format!(
                        "gather index {} out of {} rows",
                        r,
                        x.rows()
                    )));
                }
                for c in 0..x.cols() {
                    out.set(i, c, x.at(r, c));
                }
            }
            Ok(out)
        }
        Op::ScatterRows { a, idx, rows } => {
            let x = val(*a);
            if x.rows() != idx.len() {
                return Err(Error::ShapeMismatch(format!(
                    "scatter of {} rows with {} indices",
                    x.rows(),
                    idx.len()
                )));
            }
            let mut out = Tensor::zeros(*rows, x.cols());
            for (i, &r) in idx.iter().enumerate() {
                if r >= *rows {
                    return Err(Error::Tape(format!(
                        "scatter index {} out of {} rows",
                        r, rows
                    )));
                }
                for c in 0..x.cols() {
                    let v = out.at(r, c) + x.at(i, c);
                    out.set(r, c, v);
                }
            }
            Ok(out)
        }
        Op::MeanRows { a } => {
            let x = val(*a);
            if x.rows() == 0 {
                return Err(Error::Tape("mean_rows of empty tensor".into()));
            }
            let mut out = Tensor::zeros(1, x.cols());
            for r in 0..x.rows() {
                for c in 0..x.cols() {
                    let v = out.at(0, c) + x.at(r, c);
                    out.set(0, c, v);
                }
            }
            out.scale(1.0 / x.rows() as f64);
            Ok(out)
        }
        Op::BroadcastRows { a, rows } => {
            let x = val(*a);
            if x.rows() != 1 {
                return Err(Error::ShapeMismatch(
                    "broadcast_rows expects a 1 x d row".into(),
                ));
            }
            let mut out = Tensor::zeros(*rows, x.cols());
            for r in 0..*rows {
                for c in 0..x.cols() {
                    out.set(r, c, x.at(0, c));
                }
            }
            Ok(out)
        }
        Op::SumAll { a } => Ok(Tensor::scalar(val(*a).data().iter().sum())),
        Op::BroadcastScalar { a, rows, cols } => {
            let x = val(*a);
            if !x.is_scalar() {
                return Err(Error::ShapeMismatch(
                    "broadcast_scalar expects a 1 x 1 input".into(),
                ));
            }
            Ok(Tensor::filled(*rows, *cols, x.scalar_value()))
        }
        Op::ScaleByScalar { x, s } => {
            let sv = val(*s);
            if !sv.is_scalar() {
                return Err(Error::ShapeMismatch(
                    "scale_by_scalar expects a 1 x 1 scale".into(),
                ));
            }
            let mut out = val(*x).clone();
            out.scale(sv.scalar_value());
            Ok(out)
        }
        Op::SquaredDistance { h, c } => {
            let (hq, cm) = (val(*h), val(*c));
            if hq.rows() != 1 || hq.cols() != cm.cols() {
                return Err(Error::ShapeMismatch(format!(
                    "squared_distance {:?} vs {:?}",
                    hq.shape(),
                    cm.shape()
                )));
            }
            let mut out = Tensor::zeros(1, cm.rows());
            for j in 0..cm.rows() {
                let mut acc = 0.0;
                for k in 0..cm.cols() {
                    let d = hq.at(0, k) - cm.at(j, k);
                    acc += d * d;
                }
                out.set(0, j, acc);
            }
            Ok(out)
        }
        Op::Pow { a, p } => {
            let mut out = val(*a).clone();
            for v in out.data_mut() {
                *v = guarded_pow(*v, *p);
            }
            Ok(out)
        }
        Op::Exp { a } => {
            let mut out = val(*a).clone();
            for v in out.data_mut() {
                *v = v.exp();
            }
            Ok(out)
        }
        Op::Log { a } => {
            let mut out = val(*a).clone();
            for v in out.data_mut() {
                *v = v.ln();
            }
            Ok(out)
        }
        Op::LogSumExpRow { a } => {
            let x = val(*a);
            if x.rows() != 1 {
                return Err(Error::ShapeMismatch(
                    "log_sum_exp_row expects a 1 x N row".into(),
                ));
            }
            let m = x.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = x.data().iter().map(|v| (v - m).exp()).sum();
            Ok(Tensor::scalar(m + s.ln()))
        }
    }
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Constant => "constant",
        Op::Param => "param",
        Op::MatMul { .. } => "matmul",
        Op::Add { .. } => "add",
        Op::Mul { .. } => "mul",
        Op::Lincomb { .. } => "lincomb",
        Op::Relu { .. } => "relu",
        Op::ReluGrad { .. } => "relu_grad",
        Op::RowNormalize { .. } => "row_normalize",
        Op::GatherRows { .. } => "gather_rows",
        Op::ScatterRows { .. } => "scatter_rows",
        Op::MeanRows { .. } => "mean_rows",
        Op::BroadcastRows { .. } => "broadcast_rows",
        Op::SumAll { .. } => "sum_all",
        Op::BroadcastScalar { .. } => "broadcast_scalar",
        Op::ScaleByScalar { .. } => "scale_by_scalar",
        Op::SquaredDistance { .. } => "squared_distance",
        Op::Pow { .. } => "pow",
        Op::Exp { .. } => "exp",
        Op::Log { .. } => "log",
        Op::LogSumExpRow { .. } => "log_sum_exp_row",
    }
}

fn op_inputs(op: &Op) -> Vec<NodeId> {
    match op {
        Op::Constant | Op::Param => vec![],
        Op::MatMul { a, b, .. } | Op::Add { a, b } | Op::Mul { a, b } => vec![*a, *b],
        Op::Lincomb { terms } => terms.iter().map(|(_, id)| *id).collect(),
        Op::Relu { a }
        | Op::RowNormalize { a }
        | Op::GatherRows { a, .. }
        | Op::ScatterRows { a, .. }
        | Op::MeanRows { a }
        | Op::BroadcastRows { a, .. }
        | Op::SumAll { a }
        | Op::BroadcastScalar { a, .. }
        | Op::Pow { a, .. }
        | Op::Exp { a }
        | Op::Log { a }
        | Op::LogSumExpRow { a } => vec![*a],
        Op::ReluGrad { a, g } => vec![*a, *g],
        Op::ScaleByScalar { x, s } => vec![*x, *s],
        Op::SquaredDistance { h, c } => vec![*h, *c],
    }
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

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id].value
    }

    pub fn requires_grad(&self, id: NodeId) -> bool {
        self.nodes[id].requires_grad
    }

    fn push_leaf(&mut self, value: Tensor, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        self.nodes.len() - 1
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push_leaf(value, Op::Constant, false)
    }

    pub fn param(&mut self, value: Tensor) -> NodeId {
        self.push_leaf(value, Op::Param, true)
    }

    fn push(&mut self, op: Op) -> Result<NodeId> {
        let value = eval(&op, &self.nodes)?;
        let id = self.nodes.len();
        if !value.all_finite() {
            return Err(Error::NonFinite {
                op: op_name(&op),
                node: id,
            });
        }
        let requires_grad = match &op {
            // The ReLU mask is piecewise constant: no gradient flows to `a`.
            Op::ReluGrad { g, .. } => self.nodes[*g].requires_grad,
            _ => op_inputs(&op)
                .iter()
                .any(|&i| self.nodes[i].requires_grad),
        };
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Ok(id)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::MatMul {
            a,
            b,
            ta: false,
            tb: false,
        })
    }

    pub fn matmul_flags(&mut self, a: NodeId, ta: bool, b: NodeId, tb: bool) -> Result<NodeId> {
        self.push(Op::MatMul { a, b, ta, tb })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::Add { a, b })
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::Mul { a, b })
    }

    pub fn lincomb(&mut self, terms: &[(f64, NodeId)]) -> Result<NodeId> {
        self.push(Op::Lincomb {
            terms: terms.to_vec(),
        })
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(Op::Relu { a })
    }

    pub fn relu_grad(&mut self, a: NodeId, g: NodeId) -> Result<NodeId> {
        self.push(Op::ReluGrad { a, g })
    }

    pub fn row_normalize(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(Op::RowNormalize { a })
    }

    pub fn gather_rows(&mut self, a: NodeId, idx: &[usize]) -> Result<NodeId> {
        self.push(Op::GatherRows {
            a,
            idx: idx.to_vec(),
        })
    }

    pub fn scatter_rows(&mut self, a: NodeId, idx: &[usize], rows: usize) -> Result<NodeId> {
        self.push(Op::ScatterRows {
            a,
            idx: idx.to_vec(),
            rows,
        })
    }

    pub fn mean_rows(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(Op::MeanRows { a })
    }

    pub fn broadcast_rows(&mut self, a: NodeId, rows: usize) -> Result<NodeId> {
        self.push(Op::BroadcastRows { a, rows })
    }

    pub fn sum_all(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(Op::SumAll { a })
    }

    pub fn broadcast_scalar(&mut self, a: NodeId, rows: usize, cols: usize) -> Result<NodeId> {
        self.push(Op::BroadcastScalar { a, rows, cols })
    }

    pub fn scale_by_scalar(&mut self, x: NodeId, s: NodeId) -> Result<NodeId> {
        self.push(Op::ScaleByScalar { x, s })
    }

    pub fn squared_distance(&mut self, h: NodeId, c: NodeId) -> Result<NodeId> {
        self.push(Op::SquaredDistance { h, c })
    }

    pub fn pow(&mut self, a: NodeId, p: f64) -> Result<NodeId> {
        self.push(Op::Pow { a, p })
    }

    pub fn exp(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(Op::Exp { a })
    }

    pub fn log(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(Op::Log { a })
    }

    pub fn log_sum_exp_row(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(Op::LogSumExpRow { a })
    }

    /// Record the vector-Jacobian product of `id`'s op, pushing the
    /// gradient contribution of each differentiable input as new nodes.
    fn vjp(&mut self, id: NodeId, g: NodeId) -> Result<Vec<(NodeId, NodeId)>> {
        let op = self.nodes[id].op.clone();
        let needs = |t: &Tape, i: NodeId| t.nodes[i].requires_grad;
        let mut out = Vec::new();
        match op {
            Op::Constant | Op::Param => {}
            Op::MatMul { a, b, ta, tb } => {
                if needs(self, a) {
                    let da = if !ta {
                        self.push(Op::MatMul {
                            a: g,
                            b,
                            ta: false,
                            tb: !tb,
                        })?
                    } else {
                        self.push(Op::MatMul {
                            a: b,
                            b: g,
                            ta: tb,
                            tb: true,
                        })?
                    };
                    out.push((a, da));
                }
                if needs(self, b) {
                    let db = if !tb {
                        self.push(Op::MatMul {
                            a,
                            b: g,
                            ta: !ta,
                            tb: false,
                        })?
                    } else {
                        self.push(Op::MatMul {
                            a: g,
                            b: a,
                            ta: true,
                            tb: ta,
                        })?
                    };
                    out.push((b, db));
                }
            }
            Op::Add { a, b } => {
                if needs(self, a) {
                    out.push((a, g));
                }
                if needs(self, b) {
                    out.push((b, g));
                }
            }
            Op::Mul { a, b } => {
                if needs(self, a) {
                    let da = self.mul(g, b)?;
                    out.push((a, da));
                }
                if needs(self, b) {
                    let db = self.mul(g, a)?;
                    out.push((b, db));
                }
            }
            Op::Lincomb { terms } => {
                for (c, x) in terms {
                    if needs(self, x) {
                        let dx = self.lincomb(&[(c, g)])?;
                        out.push((x, dx));
                    }
                }
            }
            Op::Relu { a } => {
                if needs(self, a) {
                    let da = self.relu_grad(a, g)?;
                    out.push((a, da));
                }
            }
            Op::ReluGrad { a, g: inner_g } => {
                // d/da is zero almost everywhere; only the grad input flows.
                if needs(self, inner_g) {
                    let dg = self.relu_grad(a, g)?;
                    out.push((inner_g, dg));
                }
            }
            Op::RowNormalize { a } => {
                if needs(self, a) {
                    return Err(Error::Tape(
                        "row_normalize is restricted to constant inputs".into(),
                    ));
                }
            }
            Op::GatherRows { a, idx } => {
                if needs(self, a) {
                    let rows = self.nodes[a].value.rows();
                    let da = self.scatter_rows(g, &idx, rows)?;
                    out.push((a, da));
                }
            }
            Op::ScatterRows { a, idx, .. } => {
                if needs(self, a) {
                    let da = self.gather_rows(g, &idx)?;
                    out.push((a, da));
                }
            }
            Op::MeanRows { a } => {
                if needs(self, a) {
                    let n = self.nodes[a].value.rows();
                    let scaled = self.lincomb(&[(1.0 / n as f64, g)])?;
                    let da = self.broadcast_rows(scaled, n)?;
                    out.push((a, da));
                }
            }
            Op::BroadcastRows { a, rows } => {
                if needs(self, a) {
                    let mean = self.mean_rows(g)?;
                    let da = self.lincomb(&[(rows as f64, mean)])?;
                    out.push((a, da));
                }
            }
            Op::SumAll { a } => {
                if needs(self, a) {
                    let (r, c) = self.nodes[a].value.shape();
                    let da = self.broadcast_scalar(g, r, c)?;
                    out.push((a, da));
                }
            }
            Op::BroadcastScalar { a, .. } => {
                if needs(self, a) {
                    let da = self.sum_all(g)?;
                    out.push((a, da));
                }
            }
            Op::ScaleByScalar { x, s } => {
                if needs(self, x) {
                    let dx = self.scale_by_scalar(g, s)?;
                    out.push((x, dx));
                }
                if needs(self, s) {
                    let prod = self.mul(g, x)?;
                    let ds = self.sum_all(prod)?;
                    out.push((s, ds));
                }
            }
            Op::SquaredDistance { h, c } => {
                // D_j = sum_k (h_k - C_jk)^2
                if needs(self, h) {
                    let gsum = self.sum_all(g)?;
                    let h_scaled = self.scale_by_scalar(h, gsum)?;
                    let gc = self.matmul(g, c)?;
                    let dh = self.lincomb(&[(2.0, h_scaled), (-2.0, gc)])?;
                    out.push((h, dh));
                }
                if needs(self, c) {
                    let d = self.nodes[c].value.cols();
                    let gt_h = self.matmul_flags(g, true, h, false)?;
                    let ones = self.constant(Tensor::filled(1, d, 1.0));
                    let grow = self.matmul_flags(g, true, ones, false)?;
                    let c_scaled = self.mul(c, grow)?;
                    let dc = self.lincomb(&[(-2.0, gt_h), (2.0, c_scaled)])?;
                    out.push((c, dc));
                }
            }
            Op::Pow { a, p } => {
                if needs(self, a) {
                    let lower = self.pow(a, p - 1.0)?;
                    let prod = self.mul(g, lower)?;
                    let da = self.lincomb(&[(p, prod)])?;
                    out.push((a, da));
                }
            }
            Op::Exp { a } => {
                if needs(self, a) {
                    let da = self.mul(g, id)?;
                    out.push((a, da));
                }
            }
            Op::Log { a } => {
                if needs(self, a) {
                    let recip = self.pow(a, -1.0)?;
                    let da = self.mul(g, recip)?;
                    out.push((a, da));
                }
            }
            Op::LogSumExpRow { a } => {
                if needs(self, a) {
                    let n = self.nodes[a].value.cols();
                    let shifted_out = self.broadcast_scalar(id, 1, n)?;
                    let centered = self.lincomb(&[(1.0, a), (-1.0, shifted_out)])?;
                    let softmax = self.exp(centered)?;
                    let gb = self.broadcast_scalar(g, 1, n)?;
                    let da = self.mul(gb, softmax)?;
                    out.push((a, da));
                }
            }
        }
        Ok(out)
    }

    /// Reverse sweep from a scalar `loss`, recording gradient nodes.
    /// Returns, for each node in `wrt`, the gradient node id, or `None`
    /// when the loss does not depend on it.
    pub fn grad_nodes(&mut self, loss: NodeId, wrt: &[NodeId]) -> Result<Vec<Option<NodeId>>> {
        let lshape = self.nodes[loss].value.shape();
        if lshape != (1, 1) {
            return Err(Error::NonScalarLoss(lshape.0, lshape.1));
        }
        let horizon = self.nodes.len();
        let mut grads: Vec<Option<NodeId>> = vec![None; horizon];
        let seed = self.constant(Tensor::scalar(1.0));
        grads[loss] = Some(seed);
        for id in (0..=loss).rev() {
            let Some(g) = grads[id] else { continue };
            if !self.nodes[id].requires_grad {
                continue;
            }
            for (input, contribution) in self.vjp(id, g)? {
                grads[input] = Some(match grads[input] {
                    None => contribution,
                    Some(prev) => self.add(prev, contribution)?,
                });
            }
        }
        Ok(wrt.iter().map(|&w| grads[w]).collect())
    }

    /// Gradient values of a scalar loss with respect to `wrt` nodes.
    /// Independent parameters get zero tensors.
    pub fn grad(&mut self, loss: NodeId, wrt: &[NodeId]) -> Result<Vec<Tensor>> {
        let nodes = self.grad_nodes(loss, wrt)?;
        Ok(wrt
            .iter()
            .zip(nodes)
            .map(|(&w, n)| match n {
                Some(id) => self.nodes[id].value.clone(),
                None => {
                    let (r, c) = self.nodes[w].value.shape();
                    Tensor::zeros(r, c)
                }
            })
            .collect())
    }

    /// Recompute every node's value in record order from the leaves.
    /// Used to check that replay is bit-identical.
    pub fn replay(&self) -> Result<Vec<Tensor>> {
        let mut fresh: Vec<Node> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let value = match node.op {
                Op::Constant | Op::Param => node.value.clone(),
                _ => eval(&node.op, &fresh)?,
            };
            fresh.push(Node {
                op: node.op.clone(),
                value,
                requires_grad: node.requires_grad,
            });
        }
        Ok(fresh.into_iter().map(|n| n.value).collect())
    }
}
