//! Reverse-mode differentiation over a linear record of primitive
//! applications.
//!
//! Every operation evaluates eagerly and appends a node; inputs are always
//! earlier nodes, so walking the record backwards is a valid topological
//! order and visits each node once.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use super::array::{dot, log_sum_exp, matvec_into, sigmoid, softplus, NumArray};
use super::params::{Gradients, ParamId, ParamSet};
use crate::error::{Error, Result};

/// Handle to a node in a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// Pointwise nonlinearity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    #[default]
    Tanh,
    Relu,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative expressed through the input `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

#[derive(Debug)]
enum Op {
    Leaf { param: Option<ParamId> },
    MatVec(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Act(Var, Activation),
    OneMinus(Var),
    Concat(Vec<Var>),
    Slice { input: Var, start: usize },
    Gather { table: Var, ids: Vec<usize> },
    Conv1d { seq: Var, kernel: Var, bias: Var },
    MaxOverTime { input: Var, argmax: Vec<usize> },
    Dot(Var, Var),
    Softmax(Var),
    LogSoftmaxPick { logits: Var, index: usize, probs: Vec<f64> },
    BceWithLogits { logit: Var, target: f64 },
    Sum(Var),
    AddN(Vec<Var>),
}

struct Node<'a> {
    value: Cow<'a, NumArray>,
    op: Op,
}

/// Record of a forward evaluation.
#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &NumArray {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> Result<f64> {
        self.value(v).item()
    }

    fn push(&mut self, value: NumArray, op: Op) -> Var {
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf borrowing its value from `params`.
    pub fn param(&mut self, params: &'a ParamSet, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: Cow::Borrowed(params.get(id)),
            op: Op::Leaf { param: Some(id) },
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf that receives no gradient.
    pub fn constant(&mut self, value: NumArray) -> Var {
        self.push(value, Op::Leaf { param: None })
    }

    pub fn constant_ref(&mut self, value: &'a NumArray) -> Var {
        self.nodes.push(Node {
            value: Cow::Borrowed(value),
            op: Op::Leaf { param: None },
        });
        Var(self.nodes.len() - 1)
    }

    /// Matrix `[m×n]` times vector `[n]`.
    pub fn matvec(&mut self, m: Var, v: Var) -> Result<Var> {
        let (mv, vv) = (self.value(m), self.value(v));
        if mv.ndim() != 2 || mv.cols() != vv.len() {
            return Err(Error::Dimension(format!(
                "matvec {:?} x {:?}",
                mv.shape(),
                vv.shape()
            )));
        }
        let mut out = vec![0.0; mv.rows()];
        matvec_into(mv.data(), mv.cols(), vv.data(), &mut out);
        Ok(self.push(NumArray::vector(out), Op::MatVec(m, v)))
    }

    fn binary(&mut self, a: Var, b: Var, name: &str, f: impl Fn(f64, f64) -> f64) -> Result<NumArray> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.len() != bv.len() {
            return Err(Error::Dimension(format!(
                "{name}: {:?} vs {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        let data = av.data().iter().zip(bv.data()).map(|(&x, &y)| f(x, y)).collect();
        NumArray::new(av.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.binary(a, b, "add", |x, y| x + y)?;
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.binary(a, b, "sub", |x, y| x - y)?;
        Ok(self.push(v, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.binary(a, b, "mul", |x, y| x * y)?;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a).map(|x| x * s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn activation(&mut self, a: Var, act: Activation) -> Var {
        let v = self.value(a).map(|x| act.apply(x));
        self.push(v, Op::Act(a, act))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.activation(a, Activation::Sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.activation(a, Activation::Tanh)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.activation(a, Activation::Relu)
    }

    /// `1 - x`.
    pub fn one_minus(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| 1.0 - x);
        self.push(v, Op::OneMinus(a))
    }

    /// Flattening concatenation into a vector.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Dimension("concat of nothing".into()));
        }
        let mut data = Vec::new();
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        Ok(self.push(NumArray::vector(data), Op::Concat(parts.to_vec())))
    }

    /// Contiguous slice `[start, start+len)` of the flattened input.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let av = self.value(a);
        if start + len > av.len() {
            return Err(Error::Dimension(format!(
                "slice {start}..{} of length {}",
                start + len,
                av.len()
            )));
        }
        let v = NumArray::vector(av.data()[start..start + len].to_vec());
        Ok(self.push(v, Op::Slice { input: a, start }))
    }

    /// Rows of a `[V×E]` table stacked into `[n×E]`.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let tv = self.value(table);
        if tv.ndim() != 2 {
            return Err(Error::Dimension("gather needs a 2-d table".into()));
        }
        let e = tv.cols();
        let mut data = Vec::with_capacity(ids.len() * e);
        for &id in ids {
            if id >= tv.rows() {
                return Err(Error::Dimension(format!(
                    "row {id} out of table with {} rows",
                    tv.rows()
                )));
            }
            data.extend_from_slice(tv.row(id));
        }
        let v = NumArray::matrix(ids.len(), e, data)?;
        Ok(self.push(
            v,
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    /// A single table row as a vector.
    pub fn gather_row(&mut self, table: Var, id: usize) -> Result<Var> {
        let tv = self.value(table);
        if tv.ndim() != 2 || id >= tv.rows() {
            return Err(Error::Dimension(format!("row {id} of table {:?}", tv.shape())));
        }
        let v = NumArray::vector(tv.row(id).to_vec());
        Ok(self.push(v, Op::Gather { table, ids: vec![id] }))
    }

    /// Valid 1-d convolution of a `[L×E]` sequence with a bank of `m`
    /// filters stored as `[m × (l·E)]`, plus a per-filter bias `[m]`.
    /// Output is `[m × (L−l+1)]`, pre-activation.
    pub fn conv1d(&mut self, seq: Var, kernel: Var, bias: Var) -> Result<Var> {
        let (sv, kv, bv) = (self.value(seq), self.value(kernel), self.value(bias));
        if sv.ndim() != 2 || kv.ndim() != 2 {
            return Err(Error::Dimension("conv1d needs 2-d sequence and kernel".into()));
        }
        let (len, e) = (sv.rows(), sv.cols());
        let (m, span) = (kv.rows(), kv.cols());
        if span % e != 0 || bv.len() != m {
            return Err(Error::Dimension(format!(
                "conv1d kernel {:?} / bias {:?} vs embedding width {e}",
                kv.shape(),
                bv.shape()
            )));
        }
        let window = span / e;
        if window == 0 || window > len {
            return Err(Error::Dimension(format!(
                "window {window} exceeds sequence length {len}"
            )));
        }
        let positions = len - window + 1;
        let mut out = vec![0.0; m * positions];
        for f in 0..m {
            let k = kv.row(f);
            let b = bv.data()[f];
            for i in 0..positions {
                out[f * positions + i] = dot(k, &sv.data()[i * e..i * e + span]) + b;
            }
        }
        let v = NumArray::matrix(m, positions, out)?;
        Ok(self.push(v, Op::Conv1d { seq, kernel, bias }))
    }

    /// Row-wise maximum of `[m×M]` (a vector counts as one row); ties go
    /// to the first index.
    pub fn max_over_time(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        if av.is_empty() {
            return Err(Error::Dimension("max over an empty feature map".into()));
        }
        let (rows, cols) = if av.ndim() <= 1 {
            (1, av.len())
        } else {
            (av.rows(), av.cols())
        };
        if cols == 0 {
            return Err(Error::Dimension("max over an empty feature map".into()));
        }
        let mut maxes = Vec::with_capacity(rows);
        let mut argmax = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = &av.data()[r * cols..(r + 1) * cols];
            let (idx, val) = first_argmax(row);
            maxes.push(val);
            argmax.push(idx);
        }
        let v = if av.ndim() <= 1 {
            NumArray::scalar(maxes[0])
        } else {
            NumArray::vector(maxes)
        };
        Ok(self.push(v, Op::MaxOverTime { input: a, argmax }))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.len() != bv.len() {
            return Err(Error::Dimension(format!(
                "dot {:?} . {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        let v = NumArray::scalar(dot(av.data(), bv.data()));
        Ok(self.push(v, Op::Dot(a, b)))
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let v = super::kernels::softmax(self.value(a))?;
        Ok(self.push(v, Op::Softmax(a)))
    }

    /// `log softmax(logits)[index]` as a scalar.
    pub fn log_softmax_pick(&mut self, logits: Var, index: usize) -> Result<Var> {
        let lv = self.value(logits);
        if index >= lv.len() {
            return Err(Error::Dimension(format!(
                "index {index} outside {} logits",
                lv.len()
            )));
        }
        if !lv.is_finite() {
            return Err(Error::NumericDomain("non-finite logits".into()));
        }
        let lse = log_sum_exp(lv.data());
        let probs: Vec<f64> = lv.data().iter().map(|x| (x - lse).exp()).collect();
        let v = NumArray::scalar(lv.data()[index] - lse);
        Ok(self.push(v, Op::LogSoftmaxPick { logits, index, probs }))
    }

    /// Binary cross-entropy of `sigmoid(logit)` against `target` in `[0,1]`.
    pub fn bce_with_logits(&mut self, logit: Var, target: f64) -> Result<Var> {
        let z = self.value(logit).item()?;
        let v = NumArray::scalar(softplus(z) - target * z);
        Ok(self.push(v, Op::BceWithLogits { logit, target }))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = NumArray::scalar(self.value(a).data().iter().sum());
        self.push(v, Op::Sum(a))
    }

    /// Sum of equally shaped nodes.
    pub fn add_n(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Dimension("add_n of nothing".into()))?;
        let mut acc = self.value(*first).clone();
        for &p in &parts[1..] {
            let pv = self.value(p);
            if pv.len() != acc.len() {
                return Err(Error::Dimension("add_n shape mismatch".into()));
            }
            acc.add_assign(pv);
        }
        Ok(self.push(acc, Op::AddN(parts.to_vec())))
    }

    /// Gradients of a scalar output with respect to every trainable leaf.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out = self.value(output);
        if out.len() != 1 {
            return Err(Error::Contract(format!(
                "backward without a seed needs a scalar output, got {:?}",
                out.shape()
            )));
        }
        self.backward_with_seed(output, &NumArray::filled(out.shape(), 1.0))
    }

    pub fn backward_with_seed(&self, output: Var, seed: &NumArray) -> Result<Gradients> {
        if seed.len() != self.value(output).len() {
            return Err(Error::Dimension(format!(
                "seed {:?} for output {:?}",
                seed.shape(),
                self.value(output).shape()
            )));
        }
        let mut adj: Vec<Option<NumArray>> = Vec::with_capacity(output.0 + 1);
        adj.resize_with(output.0 + 1, || None);
        adj[output.0] = Some(seed.clone().reshaped(self.value(output).shape().to_vec())?);
        let mut grads = Gradients::new();

        for idx in (0..=output.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            let y = node.value.as_ref();
            match &node.op {
                Op::Leaf { param } => {
                    if let Some(id) = param {
                        grads.insert_or_add(*id, g);
                    }
                }
                Op::MatVec(m, v) => {
                    let (mv, vv) = (self.value(*m), self.value(*v));
                    let cols = mv.cols();
                    {
                        let dm = self.adj_mut(&mut adj, *m);
                        for (r, gi) in g.data().iter().enumerate() {
                            if *gi != 0.0 {
                                for (d, x) in dm.row_mut(r).iter_mut().zip(vv.data()) {
                                    *d += gi * x;
                                }
                            }
                        }
                    }
                    let dv = self.adj_mut(&mut adj, *v);
                    for (r, gi) in g.data().iter().enumerate() {
                        if *gi != 0.0 {
                            let row = &mv.data()[r * cols..(r + 1) * cols];
                            for (d, w) in dv.data_mut().iter_mut().zip(row) {
                                *d += gi * w;
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    self.adj_mut(&mut adj, *a).add_assign(&g);
                    self.adj_mut(&mut adj, *b).add_assign(&g);
                }
                Op::Sub(a, b) => {
                    self.adj_mut(&mut adj, *a).add_assign(&g);
                    self.adj_mut(&mut adj, *b).add_scaled(&g, -1.0);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    {
                        let da = self.adj_mut(&mut adj, *a);
                        for ((d, gi), x) in da.data_mut().iter_mut().zip(g.data()).zip(bv.data()) {
                            *d += gi * x;
                        }
                    }
                    let db = self.adj_mut(&mut adj, *b);
                    for ((d, gi), x) in db.data_mut().iter_mut().zip(g.data()).zip(av.data()) {
                        *d += gi * x;
                    }
                }
                Op::Scale(a, s) => {
                    self.adj_mut(&mut adj, *a).add_scaled(&g, *s);
                }
                Op::Act(a, act) => {
                    let xv = self.value(*a);
                    let da = self.adj_mut(&mut adj, *a);
                    for (((d, gi), x), yi) in da
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(xv.data())
                        .zip(y.data())
                    {
                        *d += gi * act.derivative(*x, *yi);
                    }
                }
                Op::OneMinus(a) => {
                    self.adj_mut(&mut adj, *a).add_scaled(&g, -1.0);
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let n = self.value(*p).len();
                        let dp = self.adj_mut(&mut adj, *p);
                        for (d, gi) in dp.data_mut().iter_mut().zip(&g.data()[offset..offset + n]) {
                            *d += gi;
                        }
                        offset += n;
                    }
                }
                Op::Slice { input, start } => {
                    let da = self.adj_mut(&mut adj, *input);
                    for (d, gi) in da.data_mut()[*start..*start + g.len()].iter_mut().zip(g.data()) {
                        *d += gi;
                    }
                }
                Op::Gather { table, ids } => {
                    let dt = self.adj_mut(&mut adj, *table);
                    let e = dt.cols();
                    for (r, &id) in ids.iter().enumerate() {
                        for (d, gi) in dt.row_mut(id).iter_mut().zip(&g.data()[r * e..(r + 1) * e]) {
                            *d += gi;
                        }
                    }
                }
                Op::Conv1d { seq, kernel, bias } => {
                    let (sv, kv) = (self.value(*seq), self.value(*kernel));
                    let e = sv.cols();
                    let (m, span) = (kv.rows(), kv.cols());
                    let positions = g.cols();
                    {
                        let dk = self.adj_mut(&mut adj, *kernel);
                        for f in 0..m {
                            let drow = dk.row_mut(f);
                            for i in 0..positions {
                                let gi = g.data()[f * positions + i];
                                if gi != 0.0 {
                                    let window = &sv.data()[i * e..i * e + span];
                                    for (d, x) in drow.iter_mut().zip(window) {
                                        *d += gi * x;
                                    }
                                }
                            }
                        }
                    }
                    {
                        let db = self.adj_mut(&mut adj, *bias);
                        for f in 0..m {
                            db.data_mut()[f] += g.row(f).iter().sum::<f64>();
                        }
                    }
                    let ds = self.adj_mut(&mut adj, *seq);
                    for f in 0..m {
                        let k = kv.row(f);
                        for i in 0..positions {
                            let gi = g.data()[f * positions + i];
                            if gi != 0.0 {
                                for (d, w) in ds.data_mut()[i * e..i * e + span].iter_mut().zip(k) {
                                    *d += gi * w;
                                }
                            }
                        }
                    }
                }
                Op::MaxOverTime { input, argmax } => {
                    let da = self.adj_mut(&mut adj, *input);
                    let cols = if da.ndim() <= 1 { da.len() } else { da.cols() };
                    for (r, &j) in argmax.iter().enumerate() {
                        da.data_mut()[r * cols + j] += g.data()[r];
                    }
                }
                Op::Dot(a, b) => {
                    let gi = g.data()[0];
                    let (av, bv) = (self.value(*a), self.value(*b));
                    self.adj_mut(&mut adj, *a).add_scaled(bv, gi);
                    self.adj_mut(&mut adj, *b).add_scaled(av, gi);
                }
                Op::Softmax(a) => {
                    let gy = dot(g.data(), y.data());
                    let da = self.adj_mut(&mut adj, *a);
                    for ((d, gi), yi) in da.data_mut().iter_mut().zip(g.data()).zip(y.data()) {
                        *d += yi * (gi - gy);
                    }
                }
                Op::LogSoftmaxPick { logits, index, probs } => {
                    let gi = g.data()[0];
                    let dl = self.adj_mut(&mut adj, *logits);
                    for (d, p) in dl.data_mut().iter_mut().zip(probs) {
                        *d -= gi * p;
                    }
                    dl.data_mut()[*index] += gi;
                }
                Op::BceWithLogits { logit, target } => {
                    let z = self.value(*logit).data()[0];
                    let d = g.data()[0] * (sigmoid(z) - target);
                    self.adj_mut(&mut adj, *logit).data_mut()[0] += d;
                }
                Op::Sum(a) => {
                    let gi = g.data()[0];
                    self.adj_mut(&mut adj, *a)
                        .data_mut()
                        .iter_mut()
                        .for_each(|d| *d += gi);
                }
                Op::AddN(parts) => {
                    for p in parts {
                        self.adj_mut(&mut adj, *p).add_assign(&g);
                    }
                }
            }
        }
        Ok(grads)
    }

    fn adj_mut<'b>(&self, adj: &'b mut [Option<NumArray>], v: Var) -> &'b mut NumArray {
        let shape = self.value(v).shape();
        adj[v.0].get_or_insert_with(|| NumArray::zeros(shape))
    }
}

/// Index and value of the first maximum.
pub(crate) fn first_argmax(xs: &[f64]) -> (usize, f64) {
    let mut best = (0, xs[0]);
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > best.1 {
            best = (i, x);
        }
    }
    best
}
