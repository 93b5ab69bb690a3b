//! Parameterised layers built from graph primitives.
//!
//! Sequences are time-major: a `&[NodeId]` of length `T` whose elements are
//! `[B, D]` batches for one time step.

use rand::Rng;

use super::graph::{Graph, NodeId};
use super::params::{ParamId, ParamStore};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
    Sigmoid,
    Softmax,
}

impl Activation {
    pub fn apply(self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        Ok(match self {
            Activation::Identity => x,
            Activation::Tanh => g.tanh(x),
            Activation::Sigmoid => g.sigmoid(x),
            Activation::Softmax => g.softmax(x)?,
        })
    }
}

/// Fully connected layer `act(x W + b)`; the bias is optional.
#[derive(Clone, Debug)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub activation: Activation,
    pub d_in: usize,
    pub d_out: usize,
}

impl Dense {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_out: usize,
        bias: bool,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let weight = store.add_glorot(format!("{name}.weight"), d_in, d_out, rng)?;
        let bias = if bias {
            Some(store.add_zeros(format!("{name}.bias"), &[d_out])?)
        } else {
            None
        };
        Ok(Self {
            weight,
            bias,
            activation,
            d_in,
            d_out,
        })
    }

    /// Pre-activation output `x W (+ b)`.
    pub fn linear(&self, g: &mut Graph, store: &ParamStore, x: NodeId) -> Result<NodeId> {
        let w = g.param(store, self.weight);
        let y = g.matmul(x, w)?;
        match self.bias {
            Some(b) => {
                let b = g.param(store, b);
                g.add_row(y, b)
            }
            None => Ok(y),
        }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: NodeId) -> Result<NodeId> {
        let y = self.linear(g, store, x)?;
        self.activation.apply(g, y)
    }
}

/// One direction of a GRU.
///
/// ```text
/// z  = sigmoid(x W_z + h U_z + b_z)
/// r  = sigmoid(x W_r + h U_r + b_r)
/// h~ = tanh(x W_h + (r * h) U_h + b_h)
/// h' = (1 - z) * h + z * h~
/// ```
///
/// `input_weight` packs `[W_z | W_r | W_h]` as `[d_in, 3h]`, `recurrent_gates`
/// packs `[U_z | U_r]` as `[h, 2h]`, and `bias` packs `[b_z | b_r | b_h]`.
#[derive(Clone, Debug)]
pub struct GruCell {
    pub input_weight: ParamId,
    pub recurrent_gates: ParamId,
    pub recurrent_candidate: ParamId,
    pub bias: ParamId,
    pub d_in: usize,
    pub hidden: usize,
}

impl GruCell {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            input_weight: store.add_glorot(format!("{name}.w"), d_in, 3 * hidden, rng)?,
            recurrent_gates: store.add_glorot(format!("{name}.u_zr"), hidden, 2 * hidden, rng)?,
            recurrent_candidate: store.add_glorot(format!("{name}.u_h"), hidden, hidden, rng)?,
            bias: store.add_zeros(format!("{name}.b"), &[3 * hidden])?,
            d_in,
            hidden,
        })
    }

    pub fn step(&self, g: &mut Graph, store: &ParamStore, x: NodeId, h: NodeId) -> Result<NodeId> {
        let hs = self.hidden;
        let w = g.param(store, self.input_weight);
        let u_zr = g.param(store, self.recurrent_gates);
        let u_h = g.param(store, self.recurrent_candidate);
        let b = g.param(store, self.bias);

        let xw = g.matmul(x, w)?;
        let xw = g.add_row(xw, b)?;
        let hu = g.matmul(h, u_zr)?;

        let xz = g.slice_cols(xw, 0, hs)?;
        let hz = g.slice_cols(hu, 0, hs)?;
        let z = g.add(xz, hz)?;
        let z = g.sigmoid(z);

        let xr = g.slice_cols(xw, hs, hs)?;
        let hr = g.slice_cols(hu, hs, hs)?;
        let r = g.add(xr, hr)?;
        let r = g.sigmoid(r);

        let rh = g.mul(r, h)?;
        let rhu = g.matmul(rh, u_h)?;
        let xh = g.slice_cols(xw, 2 * hs, hs)?;
        let cand = g.add(xh, rhu)?;
        let cand = g.tanh(cand);

        // h + z * (h~ - h)
        let diff = g.sub(cand, h)?;
        let upd = g.mul(z, diff)?;
        g.add(h, upd)
    }

    /// Runs the cell over a sequence from a zero initial state.
    pub fn run(&self, g: &mut Graph, store: &ParamStore, xs: &[NodeId], reverse: bool) -> Result<Vec<NodeId>> {
        let Some(&first) = xs.first() else {
            return Err(Error::invalid("GRU over an empty sequence"));
        };
        let batch = g.value(first).rows();
        let mut h = g.constant(super::Tensor::zeros(&[batch, self.hidden]));
        let mut out = vec![h; xs.len()];
        let order: Box<dyn Iterator<Item = usize>> = if reverse {
            Box::new((0..xs.len()).rev())
        } else {
            Box::new(0..xs.len())
        };
        for t in order {
            h = self.step(g, store, xs[t], h)?;
            out[t] = h;
        }
        Ok(out)
    }
}

/// Bidirectional GRU: forward and backward states concatenated per step.
#[derive(Clone, Debug)]
pub struct BiGru {
    pub forward: GruCell,
    pub backward: GruCell,
}

impl BiGru {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, d_in: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        Ok(Self {
            forward: GruCell::new(store, &format!("{name}.fwd"), d_in, hidden, rng)?,
            backward: GruCell::new(store, &format!("{name}.bwd"), d_in, hidden, rng)?,
        })
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden
    }

    /// `T` steps of `[B, d_in]` in, `T` steps of `[B, 2h]` out.
    pub fn forward_seq(&self, g: &mut Graph, store: &ParamStore, xs: &[NodeId]) -> Result<Vec<NodeId>> {
        let fwd = self.forward.run(g, store, xs, false)?;
        let bwd = self.backward.run(g, store, xs, true)?;
        fwd.iter()
            .zip(&bwd)
            .map(|(&f, &b)| g.concat_cols(&[f, b]))
            .collect()
    }

    /// Matrix form for a single sequence: `[T, d_in] -> [T, 2h]`.
    pub fn forward_matrix(&self, g: &mut Graph, store: &ParamStore, x: NodeId) -> Result<NodeId> {
        let steps = g.value(x).rows();
        let xs = (0..steps)
            .map(|t| g.slice_rows(x, t, 1))
            .collect::<Result<Vec<_>>>()?;
        let hs = self.forward_seq(g, store, &xs)?;
        g.concat_rows(&hs)
    }
}

/// Multi-width 1-D convolution with max-over-time pooling, applied to a
/// sequence of hidden states in place of a weighted-sum attention.
#[derive(Clone, Debug)]
pub struct ConvAttention {
    pub banks: Vec<(usize, ParamId, ParamId)>,
    pub filters: usize,
    pub d_in: usize,
}

impl ConvAttention {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        widths: &[usize],
        filters: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if widths.is_empty() || filters == 0 {
            return Err(Error::Config("conv attention needs widths and filters".into()));
        }
        let mut banks = Vec::with_capacity(widths.len());
        for &w in widths {
            if w == 0 {
                return Err(Error::Config("filter width must be positive".into()));
            }
            let weight = store.add_glorot(format!("{name}.w{w}.weight"), w * d_in, filters, rng)?;
            let bias = store.add_zeros(format!("{name}.w{w}.bias"), &[filters])?;
            banks.push((w, weight, bias));
        }
        Ok(Self { banks, filters, d_in })
    }

    pub fn max_width(&self) -> usize {
        self.banks.iter().map(|b| b.0).max().unwrap_or(0)
    }

    pub fn output_dim(&self) -> usize {
        self.banks.len() * self.filters
    }

    /// `T` steps of `[B, D]` in, `[B, widths * filters]` out.
    pub fn forward_seq(&self, g: &mut Graph, store: &ParamStore, hs: &[NodeId]) -> Result<NodeId> {
        if hs.len() < self.max_width() {
            return Err(Error::invalid(format!(
                "sequence length {} shorter than widest filter {}",
                hs.len(),
                self.max_width()
            )));
        }
        let mut pooled = Vec::with_capacity(self.banks.len());
        for &(w, weight, bias) in &self.banks {
            let wn = g.param(store, weight);
            let bn = g.param(store, bias);
            pooled.push(g.conv_maxpool(hs, wn, bn, w)?);
        }
        g.concat_cols(&pooled)
    }

    /// Matrix form for a single sequence: `[T, D] -> [1, widths * filters]`.
    pub fn forward_matrix(&self, g: &mut Graph, store: &ParamStore, h: NodeId) -> Result<NodeId> {
        let steps = g.value(h).rows();
        let hs = (0..steps)
            .map(|t| g.slice_rows(h, t, 1))
            .collect::<Result<Vec<_>>>()?;
        self.forward_seq(g, store, &hs)
    }
}
