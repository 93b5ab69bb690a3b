use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{DistantSchedule, SubModelConfig, TrainConfig, NUM_CLASSES};
use super::model::{build_submodel, AscModel, Classifier, HiddenLayer, SubModelNet, SubModelView};
use super::vocab::Vocab;
use crate::error::{Error, Result};
use crate::lexfeat::FeatureVector;
use crate::tensor::{Graph, Optimizer, ParamId, Tensor};
use crate::textpipe::{CleanedTweet, Variant};

/// Three-way label. The one-hot order is (positive, neutral, negative).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sentiment {
    Positive,
    Neutral,
    Negative,
}

impl Sentiment {
    pub fn index(self) -> usize {
        match self {
            Sentiment::Positive => 0,
            Sentiment::Neutral => 1,
            Sentiment::Negative => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        [Sentiment::Positive, Sentiment::Neutral, Sentiment::Negative].get(i).copied()
    }

    /// Maps polarity labels `1`, `0`, `-1`.
    pub fn from_polarity(v: i64) -> Option<Self> {
        match v {
            1 => Some(Sentiment::Positive),
            0 => Some(Sentiment::Neutral),
            -1 => Some(Sentiment::Negative),
            _ => None,
        }
    }

    pub fn polarity(self) -> i64 {
        1 - self.index() as i64
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    /// Mean training loss per epoch.
    pub epoch_loss: Vec<f64>,
}

fn one_hot(labels: &[Sentiment]) -> Tensor {
    let mut t = Tensor::zeros(&[labels.len(), NUM_CLASSES]);
    for (r, l) in labels.iter().enumerate() {
        t.data_mut()[r * NUM_CLASSES + l.index()] = 1.0;
    }
    t
}

/// Epoch-by-epoch cross-entropy training with seeded shuffling.
pub struct Trainer {
    pub cfg: TrainConfig,
    pub optimizer: Optimizer,
    pub history: History,
    rng: ChaCha8Rng,
    epoch: usize,
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            optimizer: Optimizer::new(cfg.optimizer),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            history: History::default(),
            epoch: 0,
            cfg,
        })
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    /// One pass over `data`; returns the mean batch loss weighted by batch size.
    pub fn run_epoch<M: Classifier>(&mut self, model: &mut M, data: &[(CleanedTweet, Sentiment)]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::invalid("no training data"));
        }
        let frozen = self.epoch < self.cfg.frozen_embedding_epochs;
        for id in model.embedding_params() {
            model.store_mut().set_trainable(id, !frozen);
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        for batch in order.chunks(self.cfg.batch_size) {
            let tweets: Vec<&CleanedTweet> = batch.iter().map(|&i| &data[i].0).collect();
            let labels: Vec<Sentiment> = batch.iter().map(|&i| data[i].1).collect();
            let mut g = Graph::new();
            let probs = model.probs(&mut g, &tweets)?;
            let loss = g.cross_entropy(probs, &one_hot(&labels))?;
            let lv = g.value(loss).data()[0];
            if !lv.is_finite() {
                return Err(Error::Numerical(format!("loss is {lv} in epoch {}", self.epoch + 1)));
            }
            let grads = g.backward(loss)?;
            self.optimizer.step(model.store_mut(), &grads)?;
            total += lv * batch.len() as f64;
        }
        self.epoch += 1;
        let mean = total / data.len() as f64;
        log::debug!("epoch {} loss {mean:.6}", self.epoch);
        self.history.epoch_loss.push(mean);
        Ok(mean)
    }

    /// Runs the remaining configured epochs.
    pub fn fit<M: Classifier>(&mut self, model: &mut M, data: &[(CleanedTweet, Sentiment)]) -> Result<History> {
        while self.epoch < self.cfg.epochs {
            self.run_epoch(model, data)?;
        }
        Ok(self.history.clone())
    }
}

/// Trains with AdaGrad (or the configured optimizer) and cross-entropy loss.
pub fn train_asc<M: Classifier>(model: &mut M, data: &[(CleanedTweet, Sentiment)], cfg: &TrainConfig) -> Result<History> {
    if data.is_empty() {
        return Err(Error::invalid("no training data"));
    }
    Trainer::new(cfg.clone())?.fit(model, data)
}

/// Trains each sub-model of `model` alone through its own softmax layer,
/// leaving every other parameter untouched.
pub fn pretrain_submodels(
    model: &mut AscModel,
    data: &[(CleanedTweet, Sentiment)],
    cfg: &TrainConfig,
) -> Result<Vec<History>> {
    let saved: Vec<(ParamId, bool)> = model.store.iter().map(|(id, p)| (id, p.trainable)).collect();
    let mut out = Vec::new();
    for i in 0..model.subs.len() {
        let own: HashSet<ParamId> = model.params_with_prefix(&model.subs[i].prefix).into_iter().collect();
        for &(id, t) in &saved {
            model.store.set_trainable(id, t && own.contains(&id));
        }
        let mut view = SubModelView {
            store: &mut model.store,
            sub: &model.subs[i],
        };
        let h = train_asc(&mut view, data, cfg);
        for &(id, t) in &saved {
            model.store.set_trainable(id, t);
        }
        out.push(h?);
    }
    Ok(out)
}

/// Class probabilities for each tweet, in input order.
pub fn predict_probs<M: Classifier>(model: &M, tweets: &[CleanedTweet], batch_size: usize) -> Result<Vec<[f64; 3]>> {
    let mut out = Vec::with_capacity(tweets.len());
    for chunk in tweets.chunks(batch_size.max(1)) {
        let refs: Vec<&CleanedTweet> = chunk.iter().collect();
        let mut g = Graph::new();
        let p = model.probs(&mut g, &refs)?;
        for r in g.value(p).to_rows() {
            out.push([r[0], r[1], r[2]]);
        }
    }
    Ok(out)
}

/// Fraction of tweets whose most probable class matches the label.
pub fn accuracy<M: Classifier>(model: &M, data: &[(CleanedTweet, Sentiment)]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("no data"));
    }
    let tweets: Vec<CleanedTweet> = data.iter().map(|d| d.0.clone()).collect();
    let probs = predict_probs(model, &tweets, 64)?;
    let hits = probs
        .iter()
        .zip(data)
        .filter(|(p, d)| {
            let best = (0..NUM_CLASSES).fold(0, |b, k| if p[k] > p[b] { k } else { b });
            best == d.1.index()
        })
        .count();
    Ok(hits as f64 / data.len() as f64)
}

/// Activations of `layer` as named features `{prefix}/00`, `{prefix}/01`, ...
pub fn extract_hidden<M: Classifier>(
    model: &M,
    tweets: &[CleanedTweet],
    layer: HiddenLayer,
    prefix: &str,
) -> Result<Vec<FeatureVector>> {
    let mut out = Vec::with_capacity(tweets.len());
    for chunk in tweets.chunks(64) {
        let refs: Vec<&CleanedTweet> = chunk.iter().collect();
        let mut g = Graph::new();
        let h = model.hidden(&mut g, &refs, layer)?;
        for row in g.value(h).to_rows() {
            let names = (0..row.len()).map(|i| format!("{prefix}/{i:02}")).collect();
            out.push(FeatureVector::from_parts(names, row)?);
        }
    }
    Ok(out)
}

pub const DISTANT_EMOTIONS: [&str; 4] = ["anger", "fear", "joy", "sadness"];

/// Corpus indices split by presence of an emotion's keywords.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistantDataset {
    pub emotion: String,
    pub with: Vec<usize>,
    pub without: Vec<usize>,
}

impl DistantDataset {
    /// Keyword tweets take the first (positive) slot and the rest the last
    /// (negative) slot; the middle slot is unused. Corpus order is kept.
    pub fn labeled(&self, corpus: &[CleanedTweet]) -> Vec<(CleanedTweet, Sentiment)> {
        let with: HashSet<usize> = self.with.iter().copied().collect();
        let mut all: Vec<usize> = self.with.iter().chain(&self.without).copied().collect();
        all.sort_unstable();
        all.into_iter()
            .map(|i| {
                let l = if with.contains(&i) {
                    Sentiment::Positive
                } else {
                    Sentiment::Negative
                };
                (corpus[i].clone(), l)
            })
            .collect()
    }
}

/// Splits the corpus once per emotion into tweets whose simple tokens contain
/// one of the emotion's keywords and tweets that contain none.
pub fn build_distant_datasets(
    corpus: &[CleanedTweet],
    keywords: &BTreeMap<String, Vec<String>>,
) -> Result<Vec<DistantDataset>> {
    let mut out = Vec::with_capacity(4);
    for emotion in DISTANT_EMOTIONS {
        let list = keywords
            .get(emotion)
            .filter(|l| !l.is_empty())
            .ok_or_else(|| Error::Config(format!("keyword list for {emotion} is missing or empty")))?;
        let set: HashSet<String> = list.iter().map(|k| k.to_lowercase()).collect();
        let (mut with, mut without) = (Vec::new(), Vec::new());
        for (i, t) in corpus.iter().enumerate() {
            if t.tokens(Variant::Simple).iter().any(|x| set.contains(&x.surface)) {
                with.push(i);
            } else {
                without.push(i);
            }
        }
        out.push(DistantDataset {
            emotion: emotion.to_string(),
            with,
            without,
        });
    }
    if let Some(extra) = keywords.keys().find(|k| !DISTANT_EMOTIONS.contains(&k.as_str())) {
        return Err(Error::Config(format!("unexpected keyword list {extra:?}")));
    }
    Ok(out)
}

/// Builds a sub-model with the smaller penultimate layer and trains it on a
/// keyword-labelled dataset under the freeze-then-train schedule.
pub fn train_distant(
    cfg: SubModelConfig,
    vocab: Vocab,
    table: Option<Tensor>,
    data: &[(CleanedTweet, Sentiment)],
    schedule: DistantSchedule,
    train: &TrainConfig,
) -> Result<(SubModelNet, History)> {
    let mut net = build_submodel(cfg, vocab, table, train.seed)?;
    let h = train_asc(&mut net, data, &train.clone().with_schedule(schedule))?;
    Ok((net, h))
}
