//! Task heads over standardized feature rows: a soft-voting regression
//! ensemble and a multi-label ensemble.

mod standardize;

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use standardize::Standardizer;

use crate::asc::History;
use crate::error::{Error, Result};
use crate::tensor::{
    glorot_uniform, Activation, Checkpoint, Dense, Graph, NodeId, OptimizerKind, Optimizer, ParamId, ParamStore, Tensor,
    TANIMOTO_EPS,
};

pub const VOTING_COPIES: usize = 300;
pub const MULTILABEL_HIDDEN: usize = 100;
pub const MULTILABEL_THRESHOLD: f64 = 0.5;

/// The 11 emotion labels of the multi-label task, in column order.
pub const EC_LABELS: [&str; 11] = [
    "anger",
    "anticipation",
    "disgust",
    "fear",
    "joy",
    "love",
    "optimism",
    "pessimism",
    "sadness",
    "surprise",
    "trust",
];

/// Regression score of a (positive, neutral, negative) distribution:
/// `(x0 - x2) / 2 + 0.5`.
pub fn score_map_f(x: [f64; 3]) -> f64 {
    (x[0] - x[2]) / 2.0 + 0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self::regression()
    }
}

impl HeadConfig {
    /// Adam defaults, batch 400, 65 epochs.
    pub fn regression() -> Self {
        Self {
            epochs: 65,
            batch_size: 400,
            optimizer: OptimizerKind::adam(),
            seed: 0,
        }
    }

    /// Per-emotion learning rate and epoch count for intensity regression.
    pub fn regression_for(emotion: &str) -> Result<Self> {
        let (lr, epochs) = match emotion {
            "anger" => (1e-4, 330),
            "fear" => (1e-5, 700),
            "joy" => (1e-5, 700),
            "sadness" => (3e-5, 1000),
            other => return Err(Error::Config(format!("no intensity settings for emotion {other:?}"))),
        };
        Ok(Self {
            epochs,
            optimizer: OptimizerKind::adam().with_lr(lr),
            ..Self::regression()
        })
    }

    /// Adam defaults, batch 10, 40 epochs.
    pub fn multilabel() -> Self {
        Self {
            epochs: 40,
            batch_size: 10,
            optimizer: OptimizerKind::adam(),
            seed: 0,
        }
    }
}

fn to_tensor(rows: &[&Vec<f64>]) -> Result<Tensor> {
    let owned: Vec<Vec<f64>> = rows.iter().map(|r| (*r).clone()).collect();
    Tensor::from_rows(&owned)
}

fn check_rows(x: &[Vec<f64>], d_in: usize) -> Result<()> {
    if let Some((i, r)) = x.iter().enumerate().find(|(_, r)| r.len() != d_in) {
        return Err(Error::invalid(format!("row {i} has {} features, head expects {d_in}", r.len())));
    }
    Ok(())
}

/// Mini-batch loop shared by the heads. `loss` builds the scalar loss of one
/// batch from input and target tensors.
fn fit<F>(store: &mut ParamStore, x: &[Vec<f64>], y: &[Vec<f64>], cfg: &HeadConfig, loss: F) -> Result<History>
where
    F: Fn(&mut Graph, &ParamStore, NodeId, &Tensor) -> Result<NodeId>,
{
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::invalid(format!("{} feature rows for {} targets", x.len(), y.len())));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let mut opt = Optimizer::new(cfg.optimizer);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = History::default();
    let mut order: Vec<usize> = (0..x.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let xb = to_tensor(&batch.iter().map(|&i| &x[i]).collect::<Vec<_>>())?;
            let yb = to_tensor(&batch.iter().map(|&i| &y[i]).collect::<Vec<_>>())?;
            let mut g = Graph::new();
            let xn = g.constant(xb);
            let l = loss(&mut g, store, xn, &yb)?;
            let lv = g.value(l).data()[0];
            if !lv.is_finite() {
                return Err(Error::Numerical(format!("loss is {lv} in epoch {}", epoch + 1)));
            }
            let grads = g.backward(l)?;
            opt.step(store, &grads)?;
            total += lv * batch.len() as f64;
        }
        history.epoch_loss.push(total / x.len() as f64);
    }
    Ok(history)
}

/// `copies` bias-free `d_in -> 3` softmax layers, each mapped through
/// [`score_map_f`], averaged into one score.
#[derive(Clone, Debug)]
pub struct VotingRegressionHead {
    pub store: ParamStore,
    /// `[d_in, 3 * copies]`; copy `k` owns columns `3k..3k+3`.
    pub weight: ParamId,
    pub d_in: usize,
    pub copies: usize,
}

impl VotingRegressionHead {
    pub fn new(d_in: usize, seed: u64) -> Result<Self> {
        Self::with_copies(d_in, VOTING_COPIES, seed)
    }

    pub fn with_copies(d_in: usize, copies: usize, seed: u64) -> Result<Self> {
        if d_in == 0 || copies == 0 {
            return Err(Error::Config("head needs inputs and copies".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        // each copy is initialised as its own d_in x 3 layer
        let w = glorot_uniform(&[d_in, 3 * copies], d_in, 3, &mut rng);
        let weight = store.add("voting.weight", w)?;
        Ok(Self {
            store,
            weight,
            d_in,
            copies,
        })
    }

    /// Column `3k + c` of the weight as copy `k`'s class `c` weights.
    pub fn copy_weights(&self, k: usize) -> Vec<f64> {
        let w = self.store.value(self.weight);
        (0..self.d_in).flat_map(|i| (0..3).map(move |c| (i, c))).map(|(i, c)| w.at(i, 3 * k + c)).collect()
    }

    /// `[B, d_in] -> [B, 1]`.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: NodeId) -> Result<NodeId> {
        let w = g.param(store, self.weight);
        let logits = g.matmul(x, w)?;
        let probs = g.softmax_groups(logits, 3)?;
        let c = self.copies as f64;
        let mut m = Tensor::zeros(&[3 * self.copies, 1]);
        for k in 0..self.copies {
            m.data_mut()[3 * k] = 0.5 / c;
            m.data_mut()[3 * k + 2] = -0.5 / c;
        }
        let m = g.constant(m);
        let s = g.matmul(probs, m)?;
        Ok(g.affine(s, 1.0, 0.5))
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_rows(x, self.d_in)?;
        let mut out = Vec::with_capacity(x.len());
        for chunk in x.chunks(512) {
            let mut g = Graph::new();
            let xn = g.constant(Tensor::from_rows(chunk)?);
            let y = self.forward(&mut g, &self.store, xn)?;
            out.extend_from_slice(g.value(y).data());
        }
        Ok(out)
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut c = Checkpoint::new(self.store.clone());
        c.metadata = serde_json::json!({"kind": "regression_head", "d_in": self.d_in, "copies": self.copies});
        Ok(c)
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        let meta = &c.metadata;
        if meta["kind"] != "regression_head" {
            return Err(Error::Checkpoint("not a regression head".into()));
        }
        let d_in = meta["d_in"].as_u64().ok_or_else(|| Error::Checkpoint("missing d_in".into()))? as usize;
        let copies = meta["copies"].as_u64().ok_or_else(|| Error::Checkpoint("missing copies".into()))? as usize;
        let mut h = Self::with_copies(d_in, copies, 0)?;
        let src = c.params.lookup("voting.weight").ok_or_else(|| Error::Checkpoint("missing voting.weight".into()))?;
        h.store.assign(h.weight, c.params.value(src).clone())?;
        Ok(h)
    }
}

/// Mean-squared-error training on targets in [0, 1].
pub fn train_regression(head: &mut VotingRegressionHead, x: &[Vec<f64>], y: &[f64], cfg: &HeadConfig) -> Result<History> {
    check_rows(x, head.d_in)?;
    if let Some(bad) = y.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!("regression label {bad} outside [0, 1]")));
    }
    let targets: Vec<Vec<f64>> = y.iter().map(|&v| vec![v]).collect();
    let h = head.clone();
    fit(&mut head.store, x, &targets, cfg, |g, s, xn, yb| {
        let p = h.forward(g, s, xn)?;
        g.mse(p, yb)
    })
}

/// Shared tanh layer followed by `copies` sigmoid layers of 11 outputs,
/// averaged elementwise.
#[derive(Clone, Debug)]
pub struct MultiLabelHead {
    pub store: ParamStore,
    pub hidden: Dense,
    /// `[hidden, labels * copies]`; copy `k` owns columns `labels*k..labels*(k+1)`.
    pub weight: ParamId,
    pub bias: ParamId,
    pub d_in: usize,
    pub copies: usize,
    pub labels: usize,
}

impl MultiLabelHead {
    pub fn new(d_in: usize, seed: u64) -> Result<Self> {
        Self::with_sizes(d_in, MULTILABEL_HIDDEN, VOTING_COPIES, EC_LABELS.len(), seed)
    }

    pub fn with_sizes(d_in: usize, hidden: usize, copies: usize, labels: usize, seed: u64) -> Result<Self> {
        if [d_in, hidden, copies, labels].contains(&0) {
            return Err(Error::Config("multi-label head sizes must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let dense = Dense::new(&mut store, "multilabel.hidden", d_in, hidden, true, Activation::Tanh, &mut rng)?;
        let w = glorot_uniform(&[hidden, labels * copies], hidden, labels, &mut rng);
        let weight = store.add("multilabel.copies.weight", w)?;
        let bias = store.add_zeros("multilabel.copies.bias", &[labels * copies])?;
        Ok(Self {
            store,
            hidden: dense,
            weight,
            bias,
            d_in,
            copies,
            labels,
        })
    }

    /// `[B, d_in] -> [B, labels]`.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: NodeId) -> Result<NodeId> {
        let h = self.hidden.forward(g, store, x)?;
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        let z = g.matmul(h, w)?;
        let z = g.add_row(z, b)?;
        let p = g.sigmoid(z);
        let mut avg = Tensor::zeros(&[self.labels * self.copies, self.labels]);
        let inv = 1.0 / self.copies as f64;
        for k in 0..self.copies {
            for j in 0..self.labels {
                avg.data_mut()[(k * self.labels + j) * self.labels + j] = inv;
            }
        }
        let avg = g.constant(avg);
        g.matmul(p, avg)
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        check_rows(x, self.d_in)?;
        let mut out = Vec::with_capacity(x.len());
        for chunk in x.chunks(512) {
            let mut g = Graph::new();
            let xn = g.constant(Tensor::from_rows(chunk)?);
            let y = self.forward(&mut g, &self.store, xn)?;
            out.extend(g.value(y).to_rows());
        }
        Ok(out)
    }

    /// Thresholded predictions (`p >= 0.5` is 1).
    pub fn predict_flags(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<u8>>> {
        Ok(self.predict(x)?.iter().map(|r| binarize(r, MULTILABEL_THRESHOLD)).collect())
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut c = Checkpoint::new(self.store.clone());
        c.metadata = serde_json::json!({
            "kind": "multilabel_head",
            "d_in": self.d_in,
            "hidden": self.hidden.d_out,
            "copies": self.copies,
            "labels": self.labels,
        });
        Ok(c)
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        let meta = &c.metadata;
        if meta["kind"] != "multilabel_head" {
            return Err(Error::Checkpoint("not a multi-label head".into()));
        }
        let get = |k: &str| {
            meta[k]
                .as_u64()
                .map(|v| v as usize)
                .ok_or_else(|| Error::Checkpoint(format!("missing {k}")))
        };
        let mut h = Self::with_sizes(get("d_in")?, get("hidden")?, get("copies")?, get("labels")?, 0)?;
        for (_, p) in c.params.iter() {
            let id = h
                .store
                .lookup(&p.name)
                .ok_or_else(|| Error::Checkpoint(format!("unexpected parameter {:?}", p.name)))?;
            h.store.assign(id, p.value.clone())?;
        }
        Ok(h)
    }
}

pub fn binarize(p: &[f64], threshold: f64) -> Vec<u8> {
    p.iter().map(|&v| u8::from(v >= threshold)).collect()
}

/// Tanimoto-loss training on binary label rows.
pub fn train_multilabel(head: &mut MultiLabelHead, x: &[Vec<f64>], y: &[Vec<f64>], cfg: &HeadConfig) -> Result<History> {
    check_rows(x, head.d_in)?;
    for (i, r) in y.iter().enumerate() {
        if r.len() != head.labels {
            return Err(Error::invalid(format!("label row {i} has {} entries, expected {}", r.len(), head.labels)));
        }
        if r.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid(format!("label row {i} is not binary")));
        }
    }
    let h = head.clone();
    fit(&mut head.store, x, y, cfg, |g, s, xn, yb| {
        let p = h.forward(g, s, xn)?;
        g.tanimoto(p, yb, TANIMOTO_EPS)
    })
}

/// `id<TAB>score` lines under an `id<TAB>score` header.
pub fn write_regression_tsv<W: Write>(mut w: W, ids: &[String], scores: &[f64]) -> Result<()> {
    let io = |e| Error::io("<predictions>", e);
    writeln!(w, "id\tscore").map_err(io)?;
    for (id, s) in ids.iter().zip(scores) {
        writeln!(w, "{id}\t{s}").map_err(io)?;
    }
    Ok(())
}

/// `id<TAB>flag...` lines under a header naming the labels.
pub fn write_multilabel_tsv<W: Write>(mut w: W, ids: &[String], flags: &[Vec<u8>]) -> Result<()> {
    let io = |e| Error::io("<predictions>", e);
    writeln!(w, "id\t{}", EC_LABELS.join("\t")).map_err(io)?;
    for (id, f) in ids.iter().zip(flags) {
        let cells: Vec<String> = f.iter().map(u8::to_string).collect();
        writeln!(w, "{id}\t{}", cells.join("\t")).map_err(io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{grad_check, GradCheckOptions};

    #[test]
    fn score_map_values() {
        assert_eq!(score_map_f([1.0, 0.0, 0.0]), 1.0);
        assert_eq!(score_map_f([0.0, 1.0, 0.0]), 0.5);
        assert_eq!(score_map_f([0.0, 0.0, 1.0]), 0.0);
        assert_eq!(score_map_f([1.0 / 3.0; 3]), 0.5);
    }

    #[test]
    fn zero_weights_give_half() {
        let mut h = VotingRegressionHead::new(5, 1).unwrap();
        h.store.assign(h.weight, Tensor::zeros(&[5, 900])).unwrap();
        let p = h.predict(&[vec![1.0, -2.0, 3.0, 0.5, 9.0]]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15);

        let mut m = MultiLabelHead::with_sizes(4, 6, 5, 11, 2).unwrap();
        for id in m.store.ids().collect::<Vec<_>>() {
            let shape = m.store.value(id).shape().to_vec();
            m.store.assign(id, Tensor::zeros(&shape)).unwrap();
        }
        let p = m.predict(&[vec![3.0, 1.0, -1.0, 2.0]]).unwrap();
        assert_eq!(p[0].len(), 11);
        assert!(p[0].iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn regression_matches_mean_of_copies() {
        let h = VotingRegressionHead::with_copies(3, 4, 7).unwrap();
        let x = vec![0.3, -1.2, 0.8];
        let got = h.predict(&[x.clone()]).unwrap()[0];
        let mut expect = 0.0;
        for k in 0..4 {
            let w = h.copy_weights(k);
            let z: Vec<f64> = (0..3).map(|c| (0..3).map(|i| x[i] * w[i * 3 + c]).sum()).collect();
            let m = z.iter().cloned().fold(f64::MIN, f64::max);
            let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            expect += score_map_f([e[0] / s, e[1] / s, e[2] / s]) / 4.0;
        }
        assert!((got - expect).abs() < 1e-12);
        assert!(h.predict(&[vec![1.0]]).is_err());
    }

    #[test]
    fn copies_start_different() {
        let h = VotingRegressionHead::new(212, 0).unwrap();
        assert_eq!(h.store.value(h.weight).shape(), [212, 900]);
        let a = h.copy_weights(0);
        for k in 1..VOTING_COPIES {
            assert_ne!(a, h.copy_weights(k));
        }
        let m = MultiLabelHead::new(217, 0).unwrap();
        assert_eq!(m.store.value(m.hidden.weight).shape(), [217, 100]);
        assert_eq!(m.store.value(m.weight).shape(), [100, 3300]);
    }

    #[test]
    fn head_gradients() {
        let x = Tensor::from_rows(&[vec![0.5, -1.0, 2.0], vec![1.5, 0.2, -0.3]]).unwrap();
        let mut h = VotingRegressionHead::with_copies(3, 5, 3).unwrap();
        let hh = h.clone();
        let y = Tensor::from_rows(&[vec![0.9], vec![0.1]]).unwrap();
        let rep = grad_check(
            &mut h.store,
            |g, s| {
                let xn = g.constant(x.clone());
                let p = hh.forward(g, s, xn)?;
                g.mse(p, &y)
            },
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert!(rep.max_rel_error < 1e-3, "{rep:?}");

        let mut m = MultiLabelHead::with_sizes(3, 4, 3, 11, 4).unwrap();
        let mm = m.clone();
        let mut yl = vec![vec![0.0; 11]; 2];
        yl[0][1] = 1.0;
        yl[1][4] = 1.0;
        yl[1][7] = 1.0;
        let yl = Tensor::from_rows(&yl).unwrap();
        let rep = grad_check(
            &mut m.store,
            |g, s| {
                let xn = g.constant(x.clone());
                let p = mm.forward(g, s, xn)?;
                g.tanimoto(p, &yl, TANIMOTO_EPS)
            },
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert!(rep.max_rel_error < 1e-3, "{rep:?}");
    }

    #[test]
    fn configs() {
        let a = HeadConfig::regression_for("anger").unwrap();
        assert_eq!((a.optimizer.lr(), a.epochs), (1e-4, 330));
        assert_eq!(HeadConfig::regression_for("sadness").unwrap().epochs, 1000);
        assert!(HeadConfig::regression_for("love").is_err());
        let r = HeadConfig::regression();
        assert_eq!((r.batch_size, r.epochs, r.optimizer.lr()), (400, 65, 1e-3));
        let m = HeadConfig::multilabel();
        assert_eq!((m.batch_size, m.epochs), (10, 40));
    }

    #[test]
    fn label_validation() {
        let mut h = VotingRegressionHead::with_copies(1, 2, 0).unwrap();
        assert!(train_regression(&mut h, &[vec![1.0]], &[1.5], &HeadConfig::regression()).is_err());
        let mut m = MultiLabelHead::with_sizes(1, 2, 2, 11, 0).unwrap();
        let mut y = vec![vec![0.0; 11]];
        y[0][0] = 0.5;
        assert!(train_multilabel(&mut m, &[vec![1.0]], &y, &HeadConfig::multilabel()).is_err());
    }

    #[test]
    fn checkpoints_round_trip() {
        let h = VotingRegressionHead::with_copies(3, 4, 9).unwrap();
        let back = VotingRegressionHead::from_checkpoint(&h.to_checkpoint().unwrap()).unwrap();
        assert_eq!(back.store, h.store);
        let m = MultiLabelHead::with_sizes(3, 4, 3, 11, 4).unwrap();
        let back = MultiLabelHead::from_checkpoint(&m.to_checkpoint().unwrap()).unwrap();
        assert_eq!(back.store, m.store);
        assert!(MultiLabelHead::from_checkpoint(&h.to_checkpoint().unwrap()).is_err());
    }

    #[test]
    fn tsv_layout() {
        let mut buf = Vec::new();
        write_regression_tsv(&mut buf, &["a".into()], &[0.25]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "id\tscore\na\t0.25\n");
        let mut buf = Vec::new();
        write_multilabel_tsv(&mut buf, &["a".into()], &[vec![0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 1]]).unwrap();
        assert!(String::from_utf8(buf).unwrap().ends_with("a\t0\t1\t0\t0\t0\t0\t0\t0\t0\t0\t1\n"));
    }
}
