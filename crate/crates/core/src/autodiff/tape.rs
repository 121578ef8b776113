//! Tape-based reverse-mode differentiation over dense matrices.
//!
//! Every operation appends one node holding its output value; nodes are
//! therefore stored in topological order and [`Tape::backward`] is a single
//! reverse sweep. Gradients are accumulated, so a value used along several
//! paths receives the sum of the path gradients.

use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::sync::Arc;

use ndarray::{s, Array2, Axis};

use super::tensor::{BlockDiagonal, Gradients, ParamGroup, ParamId, ParamStore, Segments};
use crate::error::{Error, Result};

/// Which parameters receive gradients on a tape. Frozen parameters enter the
/// tape as constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMask {
    All,
    Only(ParamGroup),
    Frozen,
}

impl TrainMask {
    fn admits(self, group: ParamGroup) -> bool {
        match self {
            TrainMask::All => true,
            TrainMask::Only(g) => g == group,
            TrainMask::Frozen => false,
        }
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    /// Constant known to be all zeros.
    Zeros,
    /// Product with an all-zero factor; inputs get zero gradients.
    ZeroMatMul(usize, usize),
    Param(ParamId),
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    AddRow(usize, usize),
    Scale(usize, f64),
    ScaleBy(usize, usize),
    MulCol(usize, usize),
    MulConst(usize, Arc<Array2<f64>>),
    Relu(usize),
    Sigmoid(usize),
    /// Pre-activations `[i|f|g|o]` and previous cell state to `[h|c]`;
    /// keeps the activations `[i|f|g|o|tanh c]` for the backward pass.
    LstmGates(usize, usize, Array2<f64>),
    Tanh(usize),
    Exp(usize),
    Concat(Vec<usize>),
    SliceCols(usize, usize),
    Maximum(Vec<usize>, Vec<u32>),
    SegmentSum(usize, Arc<Segments>),
    SegmentMean(usize, Arc<Segments>),
    SegmentMax(usize, Vec<usize>),
    Gather(usize, Arc<Segments>),
    RowSum(usize),
    SoftmaxRow(usize),
    Propagate(Arc<BlockDiagonal>, usize),
    SortPool(usize, Vec<Option<usize>>),
    CrossEntropy(usize, Array2<f64>),
    SumAll(usize),
}

#[derive(Debug)]
struct Node {
    value: Arc<Array2<f64>>,
    op: Op,
    needs_grad: bool,
}

/// Reduction applied per segment by [`Var::segment_reduce`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduce {
    Sum,
    Mean,
    Max,
}

#[derive(Debug)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    params: RefCell<HashMap<ParamId, usize>>,
    mask: TrainMask,
    signature: Cell<u64>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var").field("id", &self.id).field("shape", &self.shape()).finish()
    }
}

/// `v - v` is 0 for finite `v` and NaN otherwise; independent lanes let the
/// sum vectorize.
fn all_finite(value: &Array2<f64>) -> bool {
    let Some(s) = value.as_slice_memory_order() else {
        return value.iter().all(|v| v.is_finite());
    };
    let mut lanes = [0.0f64; 8];
    let chunks = s.chunks_exact(8);
    let tail = chunks.remainder();
    for c in chunks {
        for (l, &v) in lanes.iter_mut().zip(c) {
            *l += v - v;
        }
    }
    lanes.iter().sum::<f64>() == 0.0 && tail.iter().all(|v| v.is_finite())
}

const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

impl Tape {
    pub fn new(mask: TrainMask) -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            params: RefCell::new(HashMap::new()),
            mask,
            signature: Cell::new(0xcbf2_9ce4_8422_2325),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Hash of every branch decision taken by non-smooth operations (ReLU
    /// masks, max winners, sort orders). Two evaluations with equal signatures
    /// lie on the same smooth piece of the computed function.
    pub fn signature(&self) -> u64 {
        self.signature.get()
    }

    fn mix(&self, bits: impl IntoIterator<Item = u64>) {
        let mut h = self.signature.get();
        for b in bits {
            h = (h ^ b).wrapping_mul(FNV_PRIME);
        }
        self.signature.set(h);
    }

    pub fn constant(&self, value: Array2<f64>) -> Var<'_> {
        self.push_unchecked(value, Op::Leaf, false)
    }

    pub fn zeros(&self, rows: usize, cols: usize) -> Var<'_> {
        self.push_unchecked(Array2::zeros((rows, cols)), Op::Zeros, false)
    }

    /// Places a parameter on the tape. Repeated calls return the same node.
    pub fn param<'t>(&'t self, store: &ParamStore, id: ParamId) -> Var<'t> {
        if let Some(&node) = self.params.borrow().get(&id) {
            return Var { tape: self, id: node };
        }
        let p = store.get(id);
        let trainable = self.mask.admits(p.group());
        let op = if trainable { Op::Param(id) } else { Op::Leaf };
        let var = self.push_unchecked(p.value().clone(), op, trainable);
        self.params.borrow_mut().insert(id, var.id);
        var
    }

    fn push_unchecked(&self, value: Array2<f64>, op: Op, needs_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Arc::new(value),
            op,
            needs_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn push(&self, value: Array2<f64>, op: Op, name: &'static str) -> Result<Var<'_>> {
        if !all_finite(&value) {
            return Err(Error::NonFinite { op: name });
        }
        let needs_grad = {
            let nodes = self.nodes.borrow();
            inputs(&op).iter().any(|&i| nodes[i].needs_grad)
        };
        Ok(self.push_unchecked(value, op, needs_grad))
    }

    fn value(&self, id: usize) -> Arc<Array2<f64>> {
        Arc::clone(&self.nodes.borrow()[id].value)
    }

    /// Reverse sweep from a scalar output. Each node is visited once.
    pub fn backward(&self, output: Var<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let out = &nodes[output.id];
        if out.value.dim() != (1, 1) {
            return Err(Error::Shape {
                op: "backward",
                lhs: out.value.dim(),
                rhs: (1, 1),
            });
        }
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; output.id + 1];
        grads[output.id] = Some(Array2::ones((1, 1)));
        let mut result = Gradients::default();

        for idx in (0..=output.id).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let y = &node.value;
            let val = |i: usize| &nodes[i].value;
            let wants = |i: usize| nodes[i].needs_grad;
            let mut acc = |i: usize, delta: Array2<f64>| {
                if !nodes[i].needs_grad {
                    return;
                }
                match &mut grads[i] {
                    Some(existing) => *existing += &delta,
                    slot @ None => *slot = Some(delta),
                }
            };
            match &node.op {
                Op::Leaf | Op::Zeros => {}
                Op::Param(id) => result.push(*id, g),
                Op::ZeroMatMul(a, b) => {
                    for &i in [a, b] {
                        if wants(i) {
                            acc(i, Array2::zeros(val(i).dim()));
                        }
                    }
                }
                Op::MatMul(a, b) => {
                    if wants(*a) {
                        acc(*a, g.dot(&val(*b).t()));
                    }
                    if wants(*b) {
                        acc(*b, val(*a).t().dot(&g));
                    }
                }
                Op::Add(a, b) => {
                    acc(*b, g.clone());
                    acc(*a, g);
                }
                Op::Sub(a, b) => {
                    acc(*b, -&g);
                    acc(*a, g);
                }
                Op::Mul(a, b) => {
                    if wants(*a) {
                        acc(*a, &g * &**val(*b));
                    }
                    if wants(*b) {
                        acc(*b, &g * &**val(*a));
                    }
                }
                Op::Div(a, b) => {
                    let vb = val(*b);
                    if wants(*b) {
                        acc(*b, -(&g * &**y) / &**vb);
                    }
                    if wants(*a) {
                        acc(*a, &g / &**vb);
                    }
                }
                Op::AddRow(a, b) => {
                    acc(*b, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(*a, g);
                }
                Op::Scale(a, k) => acc(*a, g * *k),
                Op::ScaleBy(a, k) => {
                    if wants(*k) {
                        let dk = (&g * &**val(*a)).sum();
                        acc(*k, Array2::from_elem((1, 1), dk));
                    }
                    if wants(*a) {
                        acc(*a, g * val(*k)[[0, 0]]);
                    }
                }
                Op::MulCol(a, c) => {
                    if wants(*c) {
                        acc(*c, (&g * &**val(*a)).sum_axis(Axis(1)).insert_axis(Axis(1)));
                    }
                    if wants(*a) {
                        acc(*a, g * &**val(*c));
                    }
                }
                Op::MulConst(a, m) => acc(*a, g * &**m),
                Op::Relu(a) => acc(*a, ndarray::Zip::from(&g).and(&**y).map_collect(|&g, &y| if y > 0.0 { g } else { 0.0 })),
                Op::Sigmoid(a) => acc(*a, ndarray::Zip::from(&g).and(&**y).map_collect(|&g, &y| g * y * (1.0 - y))),
                Op::Tanh(a) => acc(*a, ndarray::Zip::from(&g).and(&**y).map_collect(|&g, &y| g * (1.0 - y * y))),
                Op::LstmGates(z, c, acts) => {
                    let (dz, dc) = lstm_gates_backward(acts, val(*c), &g);
                    if wants(*z) {
                        acc(*z, dz);
                    }
                    if wants(*c) {
                        acc(*c, dc);
                    }
                }
                Op::Exp(a) => acc(*a, g * &**y),
                Op::Concat(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let w = val(p).ncols();
                        if wants(p) {
                            acc(p, g.slice(s![.., start..start + w]).to_owned());
                        }
                        start += w;
                    }
                }
                Op::SliceCols(a, start) => {
                    let mut d = Array2::zeros(val(*a).raw_dim());
                    d.slice_mut(s![.., *start..*start + g.ncols()]).assign(&g);
                    acc(*a, d);
                }
                Op::Maximum(parts, winner) => {
                    for (k, &p) in parts.iter().enumerate() {
                        if !wants(p) {
                            continue;
                        }
                        let mut d = g.clone();
                        for (dv, &w) in d.iter_mut().zip(winner) {
                            if w as usize != k {
                                *dv = 0.0;
                            }
                        }
                        acc(p, d);
                    }
                }
                Op::SegmentSum(a, seg) => acc(*a, gather_rows(&g, seg)),
                Op::SegmentMean(a, seg) => {
                    let mut d = gather_rows(&g, seg);
                    for (mut row, &gr) in d.rows_mut().into_iter().zip(seg.graph_of()) {
                        row /= seg.members(gr).len() as f64;
                    }
                    acc(*a, d);
                }
                Op::SegmentMax(a, argmax) => {
                    let mut d = Array2::zeros(val(*a).raw_dim());
                    let cols = g.ncols();
                    for ((gi, c), gv) in g.indexed_iter() {
                        d[[argmax[gi * cols + c], c]] += *gv;
                    }
                    acc(*a, d);
                }
                Op::Gather(a, seg) => acc(*a, segment_sum(&g, seg)),
                Op::RowSum(a) => {
                    let cols = val(*a).ncols();
                    acc(*a, Array2::from_shape_fn((g.nrows(), cols), |(i, _)| g[[i, 0]]));
                }
                Op::SoftmaxRow(a) => {
                    let gy = &g * &**y;
                    let dot = gy.sum_axis(Axis(1)).insert_axis(Axis(1));
                    acc(*a, gy - &(&**y * &dot));
                }
                Op::Propagate(adj, a) => acc(*a, adj.apply_transposed(g.view())),
                Op::SortPool(a, picks) => {
                    let src = val(*a);
                    let d_cols = src.ncols();
                    let k = picks.len() / g.nrows().max(1);
                    let mut d = Array2::zeros(src.raw_dim());
                    for (slot, pick) in picks.iter().enumerate() {
                        if let Some(node) = pick {
                            let (gi, r) = (slot / k, slot % k);
                            let src_grad = g.slice(s![gi, r * d_cols..(r + 1) * d_cols]);
                            let mut row = d.row_mut(*node);
                            row += &src_grad;
                        }
                    }
                    acc(*a, d);
                }
                Op::CrossEntropy(a, target_minus_probs) => {
                    // stored as (probs - onehot) / n
                    acc(*a, target_minus_probs * g[[0, 0]]);
                }
                Op::SumAll(a) => acc(*a, Array2::from_elem(val(*a).raw_dim(), g[[0, 0]])),
            }
        }
        Ok(result)
    }
}

fn inputs(op: &Op) -> Vec<usize> {
    match op {
        Op::Leaf | Op::Zeros | Op::Param(_) => vec![],
        Op::MatMul(a, b)
        | Op::ZeroMatMul(a, b)
        | Op::Add(a, b)
        | Op::Sub(a, b)
        | Op::Mul(a, b)
        | Op::Div(a, b)
        | Op::AddRow(a, b)
        | Op::ScaleBy(a, b)
        | Op::MulCol(a, b)
        | Op::LstmGates(a, b, _) => vec![*a, *b],
        Op::Scale(a, _)
        | Op::MulConst(a, _)
        | Op::Relu(a)
        | Op::Sigmoid(a)
        | Op::Tanh(a)
        | Op::Exp(a)
        | Op::SliceCols(a, _)
        | Op::SegmentSum(a, _)
        | Op::SegmentMean(a, _)
        | Op::SegmentMax(a, _)
        | Op::Gather(a, _)
        | Op::RowSum(a)
        | Op::SoftmaxRow(a)
        | Op::Propagate(_, a)
        | Op::SortPool(a, _)
        | Op::CrossEntropy(a, _)
        | Op::SumAll(a) => vec![*a],
        Op::Concat(parts) | Op::Maximum(parts, _) => parts.clone(),
    }
}

fn gather_rows(x: &Array2<f64>, seg: &Segments) -> Array2<f64> {
    let mut out = Array2::zeros((seg.nodes(), x.ncols()));
    for (mut row, &g) in out.rows_mut().into_iter().zip(seg.graph_of()) {
        row.assign(&x.row(g));
    }
    out
}

fn segment_sum(x: &Array2<f64>, seg: &Segments) -> Array2<f64> {
    let mut out = Array2::zeros((seg.graphs(), x.ncols()));
    for (row, &g) in x.rows().into_iter().zip(seg.graph_of()) {
        let mut o = out.row_mut(g);
        o += &row;
    }
    out
}

fn same_shape(op: &'static str, a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::Shape { op, lhs: a, rhs: b })
    }
}

fn map(x: &Array2<f64>, f: impl Fn(f64) -> f64) -> Array2<f64> {
    x.mapv(f)
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Arc<Array2<f64>> {
        self.tape.value(self.id)
    }

    fn is_zeros(&self) -> bool {
        matches!(self.tape.nodes.borrow()[self.id].op, Op::Zeros | Op::ZeroMatMul(..))
    }

    pub fn shape(&self) -> (usize, usize) {
        self.tape.nodes.borrow()[self.id].value.dim()
    }

    pub fn rows(&self) -> usize {
        self.shape().0
    }

    pub fn cols(&self) -> usize {
        self.shape().1
    }

    /// Value of a 1×1 variable.
    pub fn scalar(&self) -> f64 {
        self.value()[[0, 0]]
    }

    fn unary(self, value: Array2<f64>, op: Op, name: &'static str) -> Result<Var<'t>> {
        self.tape.push(value, op, name)
    }

    pub fn matmul(self, rhs: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), rhs.value());
        if a.ncols() != b.nrows() {
            return Err(Error::Shape {
                op: "matmul",
                lhs: a.dim(),
                rhs: b.dim(),
            });
        }
        if self.is_zeros() || rhs.is_zeros() {
            return self.tape.push(Array2::zeros((a.nrows(), b.ncols())), Op::ZeroMatMul(self.id, rhs.id), "matmul");
        }
        self.tape.push(a.dot(&*b), Op::MatMul(self.id, rhs.id), "matmul")
    }

    pub fn add(self, rhs: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), rhs.value());
        same_shape("add", a.dim(), b.dim())?;
        self.tape.push(&*a + &*b, Op::Add(self.id, rhs.id), "add")
    }

    pub fn sub(self, rhs: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), rhs.value());
        same_shape("sub", a.dim(), b.dim())?;
        self.tape.push(&*a - &*b, Op::Sub(self.id, rhs.id), "sub")
    }

    pub fn mul(self, rhs: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), rhs.value());
        same_shape("mul", a.dim(), b.dim())?;
        self.tape.push(&*a * &*b, Op::Mul(self.id, rhs.id), "mul")
    }

    pub fn div(self, rhs: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), rhs.value());
        same_shape("div", a.dim(), b.dim())?;
        self.tape.push(&*a / &*b, Op::Div(self.id, rhs.id), "div")
    }

    /// Adds a `1×d` row to every row of `self`.
    pub fn add_row(self, row: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), row.value());
        if b.nrows() != 1 || b.ncols() != a.ncols() {
            return Err(Error::Shape {
                op: "add_row",
                lhs: a.dim(),
                rhs: b.dim(),
            });
        }
        self.tape.push(&*a + &*b, Op::AddRow(self.id, row.id), "add_row")
    }

    pub fn scale(self, k: f64) -> Result<Var<'t>> {
        let a = self.value();
        self.unary(&*a * k, Op::Scale(self.id, k), "scale")
    }

    /// Multiplies every entry by a `1×1` variable.
    pub fn scale_by(self, k: Var<'t>) -> Result<Var<'t>> {
        let (a, kv) = (self.value(), k.value());
        same_shape("scale_by", kv.dim(), (1, 1))?;
        self.tape.push(&*a * kv[[0, 0]], Op::ScaleBy(self.id, k.id), "scale_by")
    }

    /// Multiplies row `i` by the `i`-th entry of an `n×1` column.
    pub fn mul_col(self, col: Var<'t>) -> Result<Var<'t>> {
        let (a, c) = (self.value(), col.value());
        if c.ncols() != 1 || c.nrows() != a.nrows() {
            return Err(Error::Shape {
                op: "mul_col",
                lhs: a.dim(),
                rhs: c.dim(),
            });
        }
        self.tape.push(&*a * &*c, Op::MulCol(self.id, col.id), "mul_col")
    }

    /// Elementwise product with a constant (dropout masks).
    pub fn mul_const(self, mask: Arc<Array2<f64>>) -> Result<Var<'t>> {
        let a = self.value();
        same_shape("mul_const", a.dim(), mask.dim())?;
        let v = &*a * &*mask;
        self.unary(v, Op::MulConst(self.id, mask), "mul_const")
    }

    pub fn relu(self) -> Result<Var<'t>> {
        let a = self.value();
        self.tape.mix(a.iter().map(|&v| u64::from(v > 0.0)));
        self.unary(map(&a, |v| v.max(0.0)), Op::Relu(self.id), "relu")
    }

    pub fn sigmoid(self) -> Result<Var<'t>> {
        let a = self.value();
        self.unary(map(&a, sigmoid), Op::Sigmoid(self.id), "sigmoid")
    }

    pub fn tanh(self) -> Result<Var<'t>> {
        let a = self.value();
        self.unary(map(&a, f64::tanh), Op::Tanh(self.id), "tanh")
    }

    /// One LSTM cell update from gate pre-activations `self = [i|f|g|o]`
    /// (`n×4k`) and the previous cell state (`n×k`). Returns `[h|c]`.
    pub fn lstm_gates(self, c_prev: Var<'t>) -> Result<Var<'t>> {
        let (z, c) = (self.value(), c_prev.value());
        let k = c.ncols();
        if z.dim() != (c.nrows(), 4 * k) {
            return Err(Error::Shape {
                op: "lstm_gates",
                lhs: z.dim(),
                rhs: c.dim(),
            });
        }
        let mut out = Array2::zeros((c.nrows(), 2 * k));
        let mut acts = Array2::zeros((c.nrows(), 5 * k));
        for (((zr, cr), mut or), mut ar) in z.rows().into_iter().zip(c.rows()).zip(out.rows_mut()).zip(acts.rows_mut()) {
            for j in 0..k {
                let (i, f, g, o) = (sigmoid(zr[j]), sigmoid(zr[k + j]), zr[2 * k + j].tanh(), sigmoid(zr[3 * k + j]));
                let cell = f * cr[j] + i * g;
                let tc = cell.tanh();
                or[j] = o * tc;
                or[k + j] = cell;
                for (slot, v) in [i, f, g, o, tc].into_iter().enumerate() {
                    ar[slot * k + j] = v;
                }
            }
        }
        self.tape.push(out, Op::LstmGates(self.id, c_prev.id, acts), "lstm_gates")
    }

    pub fn exp(self) -> Result<Var<'t>> {
        let a = self.value();
        self.unary(map(&a, f64::exp), Op::Exp(self.id), "exp")
    }

    pub fn concat_cols(parts: &[Var<'t>]) -> Result<Var<'t>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Invalid("concat of zero tensors".into()))?;
        let values: Vec<_> = parts.iter().map(Var::value).collect();
        let rows = values[0].nrows();
        for v in &values {
            if v.nrows() != rows {
                return Err(Error::Shape {
                    op: "concat_cols",
                    lhs: values[0].dim(),
                    rhs: v.dim(),
                });
            }
        }
        let views: Vec<_> = values.iter().map(|v| v.view()).collect();
        let out = ndarray::concatenate(Axis(1), &views).expect("row counts checked");
        first
            .tape
            .push(out, Op::Concat(parts.iter().map(|p| p.id).collect()), "concat_cols")
    }

    pub fn slice_cols(self, start: usize, len: usize) -> Result<Var<'t>> {
        let a = self.value();
        if start + len > a.ncols() {
            return Err(Error::Shape {
                op: "slice_cols",
                lhs: a.dim(),
                rhs: (a.nrows(), start + len),
            });
        }
        let out = a.slice(s![.., start..start + len]).to_owned();
        self.unary(out, Op::SliceCols(self.id, start), "slice_cols")
    }

    /// Elementwise maximum; gradient flows to the lowest-indexed winner.
    pub fn maximum(parts: &[Var<'t>]) -> Result<Var<'t>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Invalid("maximum of zero tensors".into()))?;
        let values: Vec<_> = parts.iter().map(Var::value).collect();
        for v in &values[1..] {
            same_shape("maximum", values[0].dim(), v.dim())?;
        }
        let mut out = (*values[0]).clone();
        let mut winner = vec![0u32; out.len()];
        for (k, v) in values.iter().enumerate().skip(1) {
            for ((o, w), &x) in out.iter_mut().zip(winner.iter_mut()).zip(v.iter()) {
                if x > *o {
                    *o = x;
                    *w = k as u32;
                }
            }
        }
        first.tape.mix(winner.iter().map(|&w| u64::from(w)));
        first.tape.push(
            out,
            Op::Maximum(parts.iter().map(|p| p.id).collect(), winner),
            "maximum",
        )
    }

    /// Per-segment reduction of node rows into one row per graph. Max sends
    /// its gradient to the lowest row index among ties.
    pub fn segment_reduce(self, seg: &Arc<Segments>, mode: Reduce) -> Result<Var<'t>> {
        let a = self.value();
        if a.nrows() != seg.nodes() {
            return Err(Error::Shape {
                op: "segment_reduce",
                lhs: a.dim(),
                rhs: (seg.nodes(), a.ncols()),
            });
        }
        match mode {
            Reduce::Sum => self.unary(segment_sum(&a, seg), Op::SegmentSum(self.id, Arc::clone(seg)), "segment_sum"),
            Reduce::Mean => {
                let mut out = segment_sum(&a, seg);
                for (g, mut row) in out.rows_mut().into_iter().enumerate() {
                    row /= seg.members(g).len() as f64;
                }
                self.unary(out, Op::SegmentMean(self.id, Arc::clone(seg)), "segment_mean")
            }
            Reduce::Max => {
                let cols = a.ncols();
                let mut out = Array2::zeros((seg.graphs(), cols));
                let mut argmax = vec![0usize; seg.graphs() * cols];
                for g in 0..seg.graphs() {
                    let members = seg.members(g);
                    for c in 0..cols {
                        let mut best = members[0];
                        for &m in &members[1..] {
                            if a[[m, c]] > a[[best, c]] {
                                best = m;
                            }
                        }
                        out[[g, c]] = a[[best, c]];
                        argmax[g * cols + c] = best;
                    }
                }
                self.tape.mix(argmax.iter().map(|&i| i as u64));
                self.unary(out, Op::SegmentMax(self.id, argmax), "segment_max")
            }
        }
    }

    /// Broadcasts per-graph rows back to the nodes of each graph.
    pub fn gather_segments(self, seg: &Arc<Segments>) -> Result<Var<'t>> {
        let a = self.value();
        if a.nrows() != seg.graphs() {
            return Err(Error::Shape {
                op: "gather_segments",
                lhs: a.dim(),
                rhs: (seg.graphs(), a.ncols()),
            });
        }
        self.unary(gather_rows(&a, seg), Op::Gather(self.id, Arc::clone(seg)), "gather_segments")
    }

    /// `n×d → n×1`.
    pub fn row_sum(self) -> Result<Var<'t>> {
        let a = self.value();
        let out = a.sum_axis(Axis(1)).insert_axis(Axis(1));
        self.unary(out, Op::RowSum(self.id), "row_sum")
    }

    /// Row-wise softmax stabilised by subtracting each row's maximum.
    pub fn softmax_row(self) -> Result<Var<'t>> {
        let a = self.value();
        self.unary(softmax_rows(&a), Op::SoftmaxRow(self.id), "softmax_row")
    }

    /// `adj · self` for a constant block-diagonal operator.
    pub fn propagate(self, adj: &Arc<BlockDiagonal>) -> Result<Var<'t>> {
        let a = self.value();
        if adj.dim() != a.nrows() {
            return Err(Error::Shape {
                op: "propagate",
                lhs: (adj.dim(), adj.dim()),
                rhs: a.dim(),
            });
        }
        self.unary(adj.apply(a.view()), Op::Propagate(Arc::clone(adj), self.id), "propagate")
    }

    /// Sorts each graph's nodes by their last channel (descending, ties to the
    /// lower node index), keeps the first `k` rows, zero-pads short graphs and
    /// flattens to one `k·d` row per graph.
    pub fn sort_pool(self, seg: &Arc<Segments>, k: usize) -> Result<Var<'t>> {
        let a = self.value();
        if a.nrows() != seg.nodes() || a.ncols() == 0 || k == 0 {
            return Err(Error::Shape {
                op: "sort_pool",
                lhs: a.dim(),
                rhs: (seg.nodes(), k),
            });
        }
        let d = a.ncols();
        let last = d - 1;
        let mut out = Array2::zeros((seg.graphs(), k * d));
        let mut picks = vec![None; seg.graphs() * k];
        for g in 0..seg.graphs() {
            let mut order = seg.members(g).to_vec();
            order.sort_by(|&x, &y| a[[y, last]].total_cmp(&a[[x, last]]).then(x.cmp(&y)));
            for (r, &node) in order.iter().take(k).enumerate() {
                out.slice_mut(s![g, r * d..(r + 1) * d]).assign(&a.row(node));
                picks[g * k + r] = Some(node);
            }
        }
        self.tape.mix(picks.iter().map(|p| p.map_or(u64::MAX, |n| n as u64)));
        self.unary(out, Op::SortPool(self.id, picks), "sort_pool")
    }

    /// Mean softmax cross-entropy of `self` (one row of logits per sample).
    pub fn cross_entropy(self, labels: &[usize]) -> Result<Var<'t>> {
        let z = self.value();
        if z.nrows() != labels.len() || z.nrows() == 0 {
            return Err(Error::Shape {
                op: "cross_entropy",
                lhs: z.dim(),
                rhs: (labels.len(), z.ncols()),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= z.ncols()) {
            return Err(Error::Invalid(format!("label {bad} out of range for {} classes", z.ncols())));
        }
        let probs = softmax_rows(&z);
        let n = labels.len() as f64;
        let loss = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| -probs[[i, l]].max(f64::MIN_POSITIVE).ln())
            .sum::<f64>()
            / n;
        let mut d = probs;
        for (i, &l) in labels.iter().enumerate() {
            d[[i, l]] -= 1.0;
        }
        d /= n;
        self.unary(Array2::from_elem((1, 1), loss), Op::CrossEntropy(self.id, d), "cross_entropy")
    }

    pub fn sum_all(self) -> Result<Var<'t>> {
        let a = self.value();
        self.unary(Array2::from_elem((1, 1), a.sum()), Op::SumAll(self.id), "sum_all")
    }
}

/// Gradients of [`Var::lstm_gates`] for upstream `g = [dh|dc]`.
fn lstm_gates_backward(acts: &Array2<f64>, c: &Array2<f64>, g: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let k = c.ncols();
    let mut dz = Array2::zeros((c.nrows(), 4 * k));
    let mut dc = Array2::zeros(c.raw_dim());
    for (((ar, cr), gr), (mut dzr, mut dcr)) in acts
        .rows()
        .into_iter()
        .zip(c.rows())
        .zip(g.rows())
        .zip(dz.rows_mut().into_iter().zip(dc.rows_mut()))
    {
        for j in 0..k {
            let (i, f, gg, o, tc) = (ar[j], ar[k + j], ar[2 * k + j], ar[3 * k + j], ar[4 * k + j]);
            let dh = gr[j];
            let dcell = gr[k + j] + dh * o * (1.0 - tc * tc);
            dzr[j] = dcell * gg * i * (1.0 - i);
            dzr[k + j] = dcell * cr[j] * f * (1.0 - f);
            dzr[2 * k + j] = dcell * i * (1.0 - gg * gg);
            dzr[3 * k + j] = dh * tc * o * (1.0 - o);
            dcr[j] = dcell * f;
        }
    }
    (dz, dc)
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn softmax_rows(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - m).exp());
        let total = row.sum();
        row /= total;
    }
    out
}
