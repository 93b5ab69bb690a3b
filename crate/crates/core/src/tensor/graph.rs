//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every operation applied during a forward pass. Node ids
//! are handed out in creation order, which is already a topological order, so
//! [`Graph::backward`] simply walks the tape in reverse. Parameters enter the
//! graph through [`Graph::param`]; their gradients come back as a
//! [`Gradients`] map keyed by [`ParamId`].

use std::collections::{BTreeMap, HashMap};

use super::array::{matmul_a_bt_acc, matmul_at_b_acc, matmul_raw};
use super::params::{ParamId, ParamStore};
use super::Tensor;
use crate::error::{Error, Result};

/// Probability floor used by the cross-entropy loss.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param,
    MatMul(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Affine { x: NodeId, scale: f64 },
    Tanh(NodeId),
    Sigmoid(NodeId),
    Softmax { x: NodeId, group: usize },
    Embedding { table: NodeId, ids: Vec<usize> },
    ConcatCols(Vec<NodeId>),
    ConcatRows(Vec<NodeId>),
    SliceCols { x: NodeId, start: usize },
    SliceRows { x: NodeId, start: usize },
    ConvMaxPool {
        steps: Vec<NodeId>,
        weight: NodeId,
        bias: NodeId,
        width: usize,
        argmax: Vec<usize>,
    },
    Sum(NodeId),
    Mean(NodeId),
    CrossEntropy { probs: NodeId, target: Vec<f64> },
    Mse { pred: NodeId, target: Vec<f64> },
    Tanimoto { pred: NodeId, target: Vec<f64>, eps: f64 },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Parameter gradients produced by one backward pass.
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    by_param: BTreeMap<ParamId, Vec<f64>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.by_param.get(&id).map(Vec::as_slice)
    }

    pub fn contains(&self, id: ParamId) -> bool {
        self.by_param.contains_key(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &[f64])> {
        self.by_param.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.by_param.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_param.is_empty()
    }

    /// Largest absolute gradient component, useful for divergence checks.
    pub fn max_abs(&self) -> f64 {
        self.by_param
            .values()
            .flat_map(|g| g.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    param_nodes: HashMap<ParamId, NodeId>,
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        self.grads.push(None);
        id
    }

    fn needs(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Gradient of a node after [`Graph::backward`], if it was reached.
    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.grads[id.0].as_deref()
    }

    /// A constant input: never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    /// A free leaf that does receive a gradient (used for input sensitivity checks).
    pub fn variable(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf, true)
    }

    /// Brings a stored parameter into the graph. Each parameter maps to one node
    /// per graph; frozen parameters enter as constants.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        if let Some(&n) = self.param_nodes.get(&id) {
            return n;
        }
        let p = store.get(id);
        let n = self.push(p.value.clone(), Op::Param, p.trainable);
        self.param_nodes.insert(id, n);
        n
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.cols() != bv.rows() || bv.shape().len() != 2 {
            return Err(shape_err("matmul", av, bv));
        }
        let (n, k, m) = (av.rows(), av.cols(), bv.cols());
        let out = matmul_raw(av.data(), bv.data(), n, k, m);
        let rg = self.needs(&[a, b]);
        Ok(self.push(Tensor::from_parts(vec![n, m], out), Op::MatMul(a, b), rg))
    }

    /// `x[n,m] + b[m]`, broadcasting the bias over rows.
    pub fn add_row(&mut self, x: NodeId, b: NodeId) -> Result<NodeId> {
        let (xv, bv) = (self.value(x), self.value(b));
        if bv.len() != xv.cols() {
            return Err(shape_err("add_row", xv, bv));
        }
        let m = xv.cols();
        let mut out = xv.data().to_vec();
        for row in out.chunks_mut(m) {
            for (o, bb) in row.iter_mut().zip(bv.data()) {
                *o += bb;
            }
        }
        let shape = xv.shape().to_vec();
        let rg = self.needs(&[x, b]);
        Ok(self.push(Tensor::from_parts(shape, out), Op::AddRow(x, b), rg))
    }

    fn zip_with(
        &mut self,
        a: NodeId,
        b: NodeId,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err(name, av, bv));
        }
        let out = av.data().iter().zip(bv.data()).map(|(x, y)| f(*x, *y)).collect();
        let shape = av.shape().to_vec();
        let rg = self.needs(&[a, b]);
        Ok(self.push(Tensor::from_parts(shape, out), op, rg))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip_with(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip_with(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip_with(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    /// `scale * x + shift`, elementwise.
    pub fn affine(&mut self, x: NodeId, scale: f64, shift: f64) -> NodeId {
        let xv = self.value(x);
        let out = xv.data().iter().map(|v| scale * v + shift).collect();
        let shape = xv.shape().to_vec();
        let rg = self.needs(&[x]);
        self.push(Tensor::from_parts(shape, out), Op::Affine { x, scale }, rg)
    }

    fn unary(&mut self, x: NodeId, f: impl Fn(f64) -> f64, op: Op) -> NodeId {
        let xv = self.value(x);
        let out = xv.data().iter().map(|v| f(*v)).collect();
        let shape = xv.shape().to_vec();
        let rg = self.needs(&[x]);
        self.push(Tensor::from_parts(shape, out), op, rg)
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        self.unary(x, f64::tanh, Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let cols = self.value(x).cols();
        self.softmax_groups(x, cols)
    }

    /// Softmax over consecutive column groups of size `group` within each row.
    /// Max-subtracted for stability.
    pub fn softmax_groups(&mut self, x: NodeId, group: usize) -> Result<NodeId> {
        let xv = self.value(x);
        if group == 0 || xv.cols() % group != 0 {
            return Err(Error::invalid(format!(
                "softmax group {group} does not divide {} columns",
                xv.cols()
            )));
        }
        let mut out = xv.data().to_vec();
        for chunk in out.chunks_mut(group) {
            let max = chunk.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in chunk.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            for v in chunk.iter_mut() {
                *v /= total;
            }
        }
        let shape = xv.shape().to_vec();
        let rg = self.needs(&[x]);
        Ok(self.push(Tensor::from_parts(shape, out), Op::Softmax { x, group }, rg))
    }

    /// Gathers rows of `table[V,d]`. Id 0 is padding and always yields zeros.
    pub fn embedding(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId> {
        let tv = self.value(table);
        if tv.shape().len() != 2 {
            return Err(Error::invalid("embedding table must be 2-D"));
        }
        if ids.is_empty() {
            return Err(Error::invalid("embedding lookup with no ids"));
        }
        let (vocab, dim) = (tv.rows(), tv.cols());
        if let Some(&bad) = ids.iter().find(|&&i| i >= vocab) {
            return Err(Error::invalid(format!(
                "embedding id {bad} out of range for vocabulary of {vocab}"
            )));
        }
        let mut out = vec![0.0; ids.len() * dim];
        for (r, &id) in ids.iter().enumerate() {
            if id != 0 {
                out[r * dim..(r + 1) * dim].copy_from_slice(tv.row(id));
            }
        }
        let rg = self.needs(&[table]);
        Ok(self.push(
            Tensor::from_parts(vec![ids.len(), dim], out),
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
            rg,
        ))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let Some(&first) = parts.first() else {
            return Err(Error::invalid("concat of zero tensors"));
        };
        let n = self.value(first).rows();
        for &p in parts {
            if self.value(p).rows() != n {
                return Err(shape_err("concat_cols", self.value(first), self.value(p)));
            }
        }
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Vec::with_capacity(n * total);
        for r in 0..n {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(r));
            }
        }
        let rg = self.needs(parts);
        Ok(self.push(
            Tensor::from_parts(vec![n, total], out),
            Op::ConcatCols(parts.to_vec()),
            rg,
        ))
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let Some(&first) = parts.first() else {
            return Err(Error::invalid("concat of zero tensors"));
        };
        let m = self.value(first).cols();
        let mut out = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let v = self.value(p);
            if v.cols() != m {
                return Err(shape_err("concat_rows", self.value(first), v));
            }
            rows += v.rows();
            out.extend_from_slice(v.data());
        }
        let rg = self.needs(parts);
        Ok(self.push(
            Tensor::from_parts(vec![rows, m], out),
            Op::ConcatRows(parts.to_vec()),
            rg,
        ))
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let xv = self.value(x);
        if len == 0 || start + len > xv.cols() {
            return Err(Error::invalid(format!(
                "column slice {start}..{} out of range for {:?}",
                start + len,
                xv.shape()
            )));
        }
        let n = xv.rows();
        let mut out = Vec::with_capacity(n * len);
        for r in 0..n {
            out.extend_from_slice(&xv.row(r)[start..start + len]);
        }
        let rg = self.needs(&[x]);
        Ok(self.push(
            Tensor::from_parts(vec![n, len], out),
            Op::SliceCols { x, start },
            rg,
        ))
    }

    pub fn slice_rows(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let xv = self.value(x);
        if len == 0 || start + len > xv.rows() {
            return Err(Error::invalid(format!(
                "row slice {start}..{} out of range for {:?}",
                start + len,
                xv.shape()
            )));
        }
        let m = xv.cols();
        let out = xv.data()[start * m..(start + len) * m].to_vec();
        let rg = self.needs(&[x]);
        Ok(self.push(
            Tensor::from_parts(vec![len, m], out),
            Op::SliceRows { x, start },
            rg,
        ))
    }

    /// Valid 1-D convolution over a time-major sequence followed by max over time.
    ///
    /// `steps[t]` is `[B, D]`, `weight` is `[width * D, F]` laid out as `width`
    /// stacked `[D, F]` blocks, `bias` is `[F]`. Output is `[B, F]`. Ties in the
    /// max go to the lowest time index.
    pub fn conv_maxpool(
        &mut self,
        steps: &[NodeId],
        weight: NodeId,
        bias: NodeId,
        width: usize,
    ) -> Result<NodeId> {
        if width == 0 || steps.len() < width {
            return Err(Error::invalid(format!(
                "sequence of length {} is shorter than filter width {width}",
                steps.len()
            )));
        }
        let first = self.value(steps[0]);
        let (batch, dim) = (first.rows(), first.cols());
        for &s in steps {
            let v = self.value(s);
            if v.rows() != batch || v.cols() != dim {
                return Err(shape_err("conv_maxpool", first, v));
            }
        }
        let wv = self.value(weight);
        if wv.rows() != width * dim || wv.shape().len() != 2 {
            return Err(Error::Shape {
                op: "conv_maxpool weight",
                left: vec![width * dim, wv.cols()],
                right: wv.shape().to_vec(),
            });
        }
        let filters = wv.cols();
        let bv = self.value(bias);
        if bv.len() != filters {
            return Err(shape_err("conv_maxpool bias", wv, bv));
        }
        let positions = steps.len() - width + 1;
        let mut best = vec![f64::NEG_INFINITY; batch * filters];
        let mut argmax = vec![0usize; batch * filters];
        let mut window = vec![0.0; batch * width * dim];
        for t in 0..positions {
            for b in 0..batch {
                for k in 0..width {
                    let src = self.value(steps[t + k]).row(b);
                    let off = b * width * dim + k * dim;
                    window[off..off + dim].copy_from_slice(src);
                }
            }
            let resp = matmul_raw(&window, wv.data(), batch, width * dim, filters);
            for b in 0..batch {
                for f in 0..filters {
                    let v = resp[b * filters + f] + bv.data()[f];
                    let i = b * filters + f;
                    if v > best[i] {
                        best[i] = v;
                        argmax[i] = t;
                    }
                }
            }
        }
        let mut inputs = steps.to_vec();
        inputs.push(weight);
        inputs.push(bias);
        let rg = self.needs(&inputs);
        Ok(self.push(
            Tensor::from_parts(vec![batch, filters], best),
            Op::ConvMaxPool {
                steps: steps.to_vec(),
                weight,
                bias,
                width,
                argmax,
            },
            rg,
        ))
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let s = self.value(x).sum();
        let rg = self.needs(&[x]);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x);
        let s = v.sum() / v.len() as f64;
        let rg = self.needs(&[x]);
        self.push(Tensor::scalar(s), Op::Mean(x), rg)
    }

    /// Mean over rows of `-sum(target * ln p)`; `probs` rows are distributions.
    pub fn cross_entropy(&mut self, probs: NodeId, target: &Tensor) -> Result<NodeId> {
        let pv = self.value(probs);
        if pv.shape() != target.shape() {
            return Err(shape_err("cross_entropy", pv, target));
        }
        let n = pv.rows() as f64;
        let loss = -pv
            .data()
            .iter()
            .zip(target.data())
            .map(|(p, t)| if *t == 0.0 { 0.0 } else { t * p.max(PROB_FLOOR).ln() })
            .sum::<f64>()
            / n;
        let rg = self.needs(&[probs]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                probs,
                target: target.data().to_vec(),
            },
            rg,
        ))
    }

    /// Mean squared error over all elements.
    pub fn mse(&mut self, pred: NodeId, target: &Tensor) -> Result<NodeId> {
        let pv = self.value(pred);
        if pv.len() != target.len() {
            return Err(shape_err("mse", pv, target));
        }
        let loss = pv
            .data()
            .iter()
            .zip(target.data())
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / pv.len() as f64;
        let rg = self.needs(&[pred]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::Mse {
                pred,
                target: target.data().to_vec(),
            },
            rg,
        ))
    }

    /// Tanimoto distance `1 - y.p / (|y + p|_1 - y.p + eps)` per row, averaged over rows.
    pub fn tanimoto(&mut self, pred: NodeId, target: &Tensor, eps: f64) -> Result<NodeId> {
        let pv = self.value(pred);
        if pv.shape() != target.shape() {
            return Err(shape_err("tanimoto", pv, target));
        }
        let m = pv.cols();
        let rows = pv.rows();
        let mut total = 0.0;
        for r in 0..rows {
            let p = pv.row(r);
            let y = &target.data()[r * m..(r + 1) * m];
            total += tanimoto_distance(p, y, eps);
        }
        let rg = self.needs(&[pred]);
        Ok(self.push(
            Tensor::scalar(total / rows as f64),
            Op::Tanimoto {
                pred,
                target: target.data().to_vec(),
                eps,
            },
            rg,
        ))
    }

    /// Runs reverse accumulation from a scalar node and returns parameter gradients.
    ///
    /// Every trainable parameter that entered the graph gets an entry, zero-filled
    /// when the loss does not depend on it.
    pub fn backward(&mut self, loss: NodeId) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::invalid(format!(
                "backward needs a scalar, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        for g in self.grads.iter_mut() {
            *g = None;
        }
        if self.nodes[loss.0].requires_grad {
            self.grads[loss.0] = Some(vec![1.0]);
        }
        let Graph { nodes, grads, .. } = self;
        for i in (0..=loss.0).rev() {
            let node = &nodes[i];
            let Some(g) = grads[i].take() else { continue };
            backward_node(node, &g, nodes, grads);
            if matches!(node.op, Op::Leaf | Op::Param) {
                grads[i] = Some(g);
            }
        }
        let mut out = Gradients::default();
        for (&pid, &nid) in &self.param_nodes {
            let node = &self.nodes[nid.0];
            if !node.requires_grad {
                continue;
            }
            let g = self.grads[nid.0]
                .clone()
                .unwrap_or_else(|| vec![0.0; node.value.len()]);
            out.by_param.insert(pid, g);
        }
        Ok(out)
    }
}

pub(crate) fn tanimoto_distance(p: &[f64], y: &[f64], eps: f64) -> f64 {
    let dot: f64 = p.iter().zip(y).map(|(a, b)| a * b).sum();
    let l1: f64 = p.iter().zip(y).map(|(a, b)| (a + b).abs()).sum();
    1.0 - dot / (l1 - dot + eps)
}

fn accumulate(nodes: &[Node], grads: &mut [Option<Vec<f64>>], id: NodeId, f: impl FnOnce(&mut [f64])) {
    let node = &nodes[id.0];
    if !node.requires_grad {
        return;
    }
    let slot = grads[id.0].get_or_insert_with(|| vec![0.0; node.value.len()]);
    f(slot);
}

fn backward_node(node: &Node, g: &[f64], nodes: &[Node], grads: &mut [Option<Vec<f64>>]) {
    let val = |id: NodeId| &nodes[id.0].value;
    match &node.op {
        Op::Leaf | Op::Param => {}
        Op::MatMul(a, b) => {
            let (av, bv) = (val(*a), val(*b));
            let (n, k, m) = (av.rows(), av.cols(), bv.cols());
            accumulate(nodes, grads, *a, |ga| matmul_a_bt_acc(g, bv.data(), n, k, m, ga));
            accumulate(nodes, grads, *b, |gb| matmul_at_b_acc(av.data(), g, n, k, m, gb));
        }
        Op::AddRow(x, b) => {
            let m = val(*b).len();
            accumulate(nodes, grads, *x, |gx| add_into(gx, g));
            accumulate(nodes, grads, *b, |gb| {
                for row in g.chunks(m) {
                    add_into(gb, row);
                }
            });
        }
        Op::Add(a, b) => {
            accumulate(nodes, grads, *a, |ga| add_into(ga, g));
            accumulate(nodes, grads, *b, |gb| add_into(gb, g));
        }
        Op::Sub(a, b) => {
            accumulate(nodes, grads, *a, |ga| add_into(ga, g));
            accumulate(nodes, grads, *b, |gb| {
                for (o, v) in gb.iter_mut().zip(g) {
                    *o -= v;
                }
            });
        }
        Op::Mul(a, b) => {
            let (av, bv) = (val(*a), val(*b));
            accumulate(nodes, grads, *a, |ga| {
                for ((o, v), w) in ga.iter_mut().zip(g).zip(bv.data()) {
                    *o += v * w;
                }
            });
            accumulate(nodes, grads, *b, |gb| {
                for ((o, v), w) in gb.iter_mut().zip(g).zip(av.data()) {
                    *o += v * w;
                }
            });
        }
        Op::Affine { x, scale } => {
            accumulate(nodes, grads, *x, |gx| {
                for (o, v) in gx.iter_mut().zip(g) {
                    *o += scale * v;
                }
            });
        }
        Op::Tanh(x) => {
            let y = node.value.data();
            accumulate(nodes, grads, *x, |gx| {
                for ((o, v), yy) in gx.iter_mut().zip(g).zip(y) {
                    *o += v * (1.0 - yy * yy);
                }
            });
        }
        Op::Sigmoid(x) => {
            let y = node.value.data();
            accumulate(nodes, grads, *x, |gx| {
                for ((o, v), yy) in gx.iter_mut().zip(g).zip(y) {
                    *o += v * yy * (1.0 - yy);
                }
            });
        }
        Op::Softmax { x, group } => {
            let y = node.value.data();
            accumulate(nodes, grads, *x, |gx| {
                for ((go, gc), yc) in gx.chunks_mut(*group).zip(g.chunks(*group)).zip(y.chunks(*group)) {
                    let dot: f64 = gc.iter().zip(yc).map(|(a, b)| a * b).sum();
                    for ((o, gi), yi) in go.iter_mut().zip(gc).zip(yc) {
                        *o += yi * (gi - dot);
                    }
                }
            });
        }
        Op::Embedding { table, ids } => {
            let dim = val(*table).cols();
            accumulate(nodes, grads, *table, |gt| {
                for (r, &id) in ids.iter().enumerate() {
                    if id == 0 {
                        continue;
                    }
                    add_into(&mut gt[id * dim..(id + 1) * dim], &g[r * dim..(r + 1) * dim]);
                }
            });
        }
        Op::ConcatCols(parts) => {
            let total = node.value.cols();
            let mut offset = 0;
            for &p in parts {
                let w = val(p).cols();
                accumulate(nodes, grads, p, |gp| {
                    for (r, row) in gp.chunks_mut(w).enumerate() {
                        add_into(row, &g[r * total + offset..r * total + offset + w]);
                    }
                });
                offset += w;
            }
        }
        Op::ConcatRows(parts) => {
            let mut offset = 0;
            for &p in parts {
                let len = val(p).len();
                accumulate(nodes, grads, p, |gp| add_into(gp, &g[offset..offset + len]));
                offset += len;
            }
        }
        Op::SliceCols { x, start } => {
            let cols = val(*x).cols();
            let w = node.value.cols();
            accumulate(nodes, grads, *x, |gx| {
                for (r, row) in g.chunks(w).enumerate() {
                    add_into(&mut gx[r * cols + start..r * cols + start + w], row);
                }
            });
        }
        Op::SliceRows { x, start } => {
            let cols = val(*x).cols();
            accumulate(nodes, grads, *x, |gx| {
                add_into(&mut gx[start * cols..start * cols + g.len()], g);
            });
        }
        Op::ConvMaxPool {
            steps,
            weight,
            bias,
            width,
            argmax,
        } => {
            let first = val(steps[0]);
            let (batch, dim) = (first.rows(), first.cols());
            let wv = val(*weight);
            let filters = wv.cols();
            accumulate(nodes, grads, *bias, |gb| {
                for row in g.chunks(filters) {
                    add_into(gb, row);
                }
            });
            accumulate(nodes, grads, *weight, |gw| {
                for b in 0..batch {
                    for f in 0..filters {
                        let i = b * filters + f;
                        let t = argmax[i];
                        let gv = g[i];
                        if gv == 0.0 {
                            continue;
                        }
                        for k in 0..*width {
                            let h = val(steps[t + k]).row(b);
                            for (d, hv) in h.iter().enumerate() {
                                gw[(k * dim + d) * filters + f] += gv * hv;
                            }
                        }
                    }
                }
            });
            for (s, &step) in steps.iter().enumerate() {
                accumulate(nodes, grads, step, |gs| {
                    for b in 0..batch {
                        for f in 0..filters {
                            let i = b * filters + f;
                            let t = argmax[i];
                            if s < t || s >= t + width {
                                continue;
                            }
                            let k = s - t;
                            let gv = g[i];
                            for d in 0..dim {
                                gs[b * dim + d] += gv * wv.data()[(k * dim + d) * filters + f];
                            }
                        }
                    }
                });
            }
        }
        Op::Sum(x) => {
            accumulate(nodes, grads, *x, |gx| {
                for o in gx.iter_mut() {
                    *o += g[0];
                }
            });
        }
        Op::Mean(x) => {
            let n = val(*x).len() as f64;
            accumulate(nodes, grads, *x, |gx| {
                for o in gx.iter_mut() {
                    *o += g[0] / n;
                }
            });
        }
        Op::CrossEntropy { probs, target } => {
            let pv = val(*probs);
            let n = pv.rows() as f64;
            accumulate(nodes, grads, *probs, |gp| {
                for ((o, p), t) in gp.iter_mut().zip(pv.data()).zip(target) {
                    if *t != 0.0 && *p > PROB_FLOOR {
                        *o -= g[0] * t / (p * n);
                    }
                }
            });
        }
        Op::Mse { pred, target } => {
            let pv = val(*pred);
            let n = pv.len() as f64;
            accumulate(nodes, grads, *pred, |gp| {
                for ((o, p), t) in gp.iter_mut().zip(pv.data()).zip(target) {
                    *o += g[0] * 2.0 * (p - t) / n;
                }
            });
        }
        Op::Tanimoto { pred, target, eps } => {
            let pv = val(*pred);
            let m = pv.cols();
            let rows = pv.rows();
            accumulate(nodes, grads, *pred, |gp| {
                for r in 0..rows {
                    let p = pv.row(r);
                    let y = &target[r * m..(r + 1) * m];
                    let dot: f64 = p.iter().zip(y).map(|(a, b)| a * b).sum();
                    let l1: f64 = p.iter().zip(y).map(|(a, b)| (a + b).abs()).sum();
                    let denom = l1 - dot + eps;
                    for j in 0..m {
                        let sign = if p[j] + y[j] < 0.0 { -1.0 } else { 1.0 };
                        let d_denom = sign - y[j];
                        // d/dp of -(dot / denom)
                        let d = -(y[j] * denom - dot * d_denom) / (denom * denom);
                        gp[r * m + j] += g[0] * d / rows as f64;
                    }
                }
            });
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
