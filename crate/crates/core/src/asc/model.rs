use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Slot, SubModelConfig, COMBINER_HIDDEN, NUM_CLASSES, POS_VOCAB};
use super::vocab::{random_table, Vocab};
use crate::error::{Error, Result};
use crate::tensor::{
    Activation, BiGru, Checkpoint, ConvAttention, Dense, Graph, NodeId, ParamId, ParamStore, Tensor,
};
use crate::textpipe::CleanedTweet;

/// Intermediate nodes of one sub-model forward pass. Sequences are time-major.
#[derive(Clone, Debug)]
pub struct SubTrace {
    /// Per step `[B, word_dim + pos_dim]`.
    pub inputs: Vec<NodeId>,
    /// Per step `[B, 2 * gru_hidden]`.
    pub states: Vec<NodeId>,
    /// `[B, widths * filters]`.
    pub attention: NodeId,
    /// `[B, penultimate_dim]`.
    pub penultimate: NodeId,
    /// `[B, 3]`.
    pub probs: NodeId,
}

/// Embeddings, bi-GRU, convolutional attention, a tanh layer and a 3-way
/// softmax. Parameters live in an external store under `prefix`.
#[derive(Clone, Debug)]
pub struct SubModel {
    pub cfg: SubModelConfig,
    pub vocab: Vocab,
    pub prefix: String,
    pub word_embedding: ParamId,
    pub pos_embedding: ParamId,
    pub gru: BiGru,
    pub attention: ConvAttention,
    pub penultimate: Dense,
    pub output: Dense,
}

impl SubModel {
    /// `table` defaults to a random `[vocab, word_embed_dim]` table.
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        cfg: SubModelConfig,
        vocab: Vocab,
        table: Option<Tensor>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        let table = match table {
            Some(t) => {
                if t.shape() != [vocab.len(), cfg.word_embed_dim] {
                    return Err(Error::Shape {
                        op: "word embedding table",
                        left: vec![vocab.len(), cfg.word_embed_dim],
                        right: t.shape().to_vec(),
                    });
                }
                t
            }
            None => random_table(vocab.len(), cfg.word_embed_dim, rng),
        };
        let word_embedding = store.add(format!("{prefix}.word_embedding"), table)?;
        let pos_embedding = store.add(format!("{prefix}.pos_embedding"), random_table(POS_VOCAB, cfg.pos_embed_dim, rng))?;
        let gru = BiGru::new(store, &format!("{prefix}.gru"), cfg.gru_input_dim(), cfg.gru_hidden, rng)?;
        let attention = ConvAttention::new(
            store,
            &format!("{prefix}.attention"),
            2 * cfg.gru_hidden,
            &cfg.conv_widths,
            cfg.conv_filters,
            rng,
        )?;
        let penultimate = Dense::new(
            store,
            &format!("{prefix}.penultimate"),
            attention.output_dim(),
            cfg.penultimate_dim,
            true,
            Activation::Tanh,
            rng,
        )?;
        let output = Dense::new(
            store,
            &format!("{prefix}.output"),
            cfg.penultimate_dim,
            NUM_CLASSES,
            true,
            Activation::Softmax,
            rng,
        )?;
        Ok(Self {
            cfg,
            vocab,
            prefix: prefix.to_string(),
            word_embedding,
            pos_embedding,
            gru,
            attention,
            penultimate,
            output,
        })
    }

    /// Batch of tweets to time-major word and tag ids.
    pub fn encode(&self, tweets: &[&CleanedTweet]) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
        let t = self.cfg.seq_len;
        let mut words = vec![Vec::with_capacity(tweets.len()); t];
        let mut tags = vec![Vec::with_capacity(tweets.len()); t];
        for tw in tweets {
            let (w, p) = self.vocab.encode(tw.tokens(self.cfg.variant), t);
            for s in 0..t {
                words[s].push(w[s]);
                tags[s].push(p[s]);
            }
        }
        (words, tags)
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, tweets: &[&CleanedTweet]) -> Result<SubTrace> {
        if tweets.is_empty() {
            return Err(Error::invalid("forward pass over an empty batch"));
        }
        let (words, tags) = self.encode(tweets);
        self.forward_ids(g, store, &words, &tags)
    }

    /// Forward pass from time-major ids: `words[t][b]`, `tags[t][b]`.
    pub fn forward_ids(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        words: &[Vec<usize>],
        tags: &[Vec<usize>],
    ) -> Result<SubTrace> {
        if words.len() != tags.len() {
            return Err(Error::invalid("word and tag sequences differ in length"));
        }
        let we = g.param(store, self.word_embedding);
        let pe = g.param(store, self.pos_embedding);
        let mut inputs = Vec::with_capacity(words.len());
        for (w, p) in words.iter().zip(tags) {
            let wv = g.embedding(we, w)?;
            let pv = g.embedding(pe, p)?;
            inputs.push(g.concat_cols(&[wv, pv])?);
        }
        let states = self.gru.forward_seq(g, store, &inputs)?;
        let attention = self.attention.forward_seq(g, store, &states)?;
        let penultimate = self.penultimate.forward(g, store, attention)?;
        let probs = self.output.forward(g, store, penultimate)?;
        Ok(SubTrace {
            inputs,
            states,
            attention,
            penultimate,
            probs,
        })
    }

    pub fn embedding_params(&self) -> [ParamId; 2] {
        [self.word_embedding, self.pos_embedding]
    }
}

/// Named layer whose activations serve as transfer features.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HiddenLayer {
    /// Penultimate layer of a sub-model; the slot is required for the full
    /// classifier and ignored by a standalone sub-model.
    SubmodelPenultimate(Option<Slot>),
    CombinerHidden,
}

impl FromStr for HiddenLayer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "combiner_hidden" => Ok(HiddenLayer::CombinerHidden),
            None if s == "submodel_penultimate" => Ok(HiddenLayer::SubmodelPenultimate(None)),
            Some(("submodel_penultimate", slot)) => Ok(HiddenLayer::SubmodelPenultimate(Some(slot.parse()?))),
            _ => Err(Error::Config(format!(
                "unknown layer {s:?}; expected combiner_hidden or submodel_penultimate[:slot]"
            ))),
        }
    }
}

/// A model mapping tweets to 3-class probabilities.
pub trait Classifier {
    fn store(&self) -> &ParamStore;
    fn store_mut(&mut self) -> &mut ParamStore;
    /// `[B, 3]` probabilities.
    fn probs(&self, g: &mut Graph, tweets: &[&CleanedTweet]) -> Result<NodeId>;
    /// `[B, d]` activations of a named layer.
    fn hidden(&self, g: &mut Graph, tweets: &[&CleanedTweet], layer: HiddenLayer) -> Result<NodeId>;
    fn embedding_params(&self) -> Vec<ParamId>;
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SubMeta {
    prefix: String,
    config: SubModelConfig,
    vocab: Vec<String>,
}

impl SubMeta {
    fn of(s: &SubModel) -> Self {
        Self {
            prefix: s.prefix.clone(),
            config: s.cfg.clone(),
            vocab: s.vocab.tokens().to_vec(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ModelMeta {
    Submodel { submodel: SubMeta },
    Asc { submodels: Vec<SubMeta>, combiner_hidden: usize },
}

/// Copies every parameter of `src` into `dst` by name; both stores must hold
/// the same names and shapes.
fn restore_params(dst: &mut ParamStore, src: &ParamStore) -> Result<()> {
    if dst.len() != src.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {} parameters, model expects {}",
            src.len(),
            dst.len()
        )));
    }
    for (_, p) in src.iter() {
        let id = dst
            .lookup(&p.name)
            .ok_or_else(|| Error::Checkpoint(format!("unexpected parameter {:?}", p.name)))?;
        dst.assign(id, p.value.clone())
            .map_err(|e| Error::Checkpoint(format!("parameter {:?}: {e}", p.name)))?;
        dst.set_trainable(id, p.trainable);
    }
    Ok(())
}

fn rebuild_sub(store: &mut ParamStore, meta: &SubMeta, rng: &mut ChaCha8Rng) -> Result<SubModel> {
    let vocab = Vocab::from_saved(meta.vocab.clone())?;
    SubModel::new(store, &meta.prefix, meta.config.clone(), vocab, None, rng)
}

/// A single sub-model with its own parameter store.
#[derive(Clone, Debug)]
pub struct SubModelNet {
    pub store: ParamStore,
    pub sub: SubModel,
}

/// Builds one sub-model. Fails when the configuration breaks the slot's
/// embedding-size or cleaning-variant pairing.
pub fn build_submodel(cfg: SubModelConfig, vocab: Vocab, table: Option<Tensor>, seed: u64) -> Result<SubModelNet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let prefix = cfg.slot.name();
    let sub = SubModel::new(&mut store, prefix, cfg, vocab, table, &mut rng)?;
    Ok(SubModelNet { store, sub })
}

impl SubModelNet {
    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut c = Checkpoint::new(self.store.clone());
        c.metadata = serde_json::to_value(ModelMeta::Submodel {
            submodel: SubMeta::of(&self.sub),
        })?;
        Ok(c)
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        let meta: ModelMeta = serde_json::from_value(c.metadata.clone())?;
        let ModelMeta::Submodel { submodel } = meta else {
            return Err(Error::Checkpoint("checkpoint does not hold a single sub-model".into()));
        };
        let mut store = ParamStore::new();
        let sub = rebuild_sub(&mut store, &submodel, &mut ChaCha8Rng::seed_from_u64(0))?;
        restore_params(&mut store, &c.params)?;
        Ok(Self { store, sub })
    }
}

impl Classifier for SubModelNet {
    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn probs(&self, g: &mut Graph, tweets: &[&CleanedTweet]) -> Result<NodeId> {
        Ok(self.sub.forward(g, &self.store, tweets)?.probs)
    }

    fn hidden(&self, g: &mut Graph, tweets: &[&CleanedTweet], layer: HiddenLayer) -> Result<NodeId> {
        match layer {
            HiddenLayer::SubmodelPenultimate(_) => Ok(self.sub.forward(g, &self.store, tweets)?.penultimate),
            HiddenLayer::CombinerHidden => Err(Error::Config("a single sub-model has no combiner layer".into())),
        }
    }

    fn embedding_params(&self) -> Vec<ParamId> {
        self.sub.embedding_params().to_vec()
    }
}

/// Four sub-models whose penultimate layers are concatenated and fed to a
/// tanh layer and a 3-way softmax.
#[derive(Clone, Debug)]
pub struct AscModel {
    pub store: ParamStore,
    pub subs: Vec<SubModel>,
    pub combiner_hidden: Dense,
    pub combiner_output: Dense,
}

/// Sub-model inputs for [`build_asc`].
#[derive(Clone, Debug)]
pub struct SubModelInit {
    pub config: SubModelConfig,
    pub vocab: Vocab,
    pub table: Option<Tensor>,
}

/// Assembles the four-sub-model classifier; each slot must appear exactly once.
pub fn build_asc(inits: Vec<SubModelInit>, seed: u64) -> Result<AscModel> {
    build_asc_with_hidden(inits, COMBINER_HIDDEN, seed)
}

pub fn build_asc_with_hidden(inits: Vec<SubModelInit>, combiner_hidden: usize, seed: u64) -> Result<AscModel> {
    if inits.len() != 4 {
        return Err(Error::Config(format!("the classifier combines 4 sub-models, got {}", inits.len())));
    }
    let mut slots: Vec<Slot> = inits.iter().map(|s| s.config.slot).collect();
    slots.sort();
    slots.dedup();
    if slots.len() != 4 {
        return Err(Error::Config("each embedding slot must be used exactly once".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let mut subs = Vec::with_capacity(4);
    for s in inits {
        let prefix = s.config.slot.name();
        subs.push(SubModel::new(&mut store, prefix, s.config, s.vocab, s.table, &mut rng)?);
    }
    let (hidden, output) = combiner(&mut store, &subs, combiner_hidden, &mut rng)?;
    Ok(AscModel {
        store,
        subs,
        combiner_hidden: hidden,
        combiner_output: output,
    })
}

fn combiner(store: &mut ParamStore, subs: &[SubModel], hidden: usize, rng: &mut ChaCha8Rng) -> Result<(Dense, Dense)> {
    let d_in: usize = subs.iter().map(|s| s.cfg.penultimate_dim).sum();
    let h = Dense::new(store, "combiner.hidden", d_in, hidden, true, Activation::Tanh, rng)?;
    let o = Dense::new(store, "combiner.output", hidden, NUM_CLASSES, true, Activation::Softmax, rng)?;
    Ok((h, o))
}

impl AscModel {
    /// Concatenated sub-model penultimates, `[B, sum of penultimate dims]`.
    pub fn concat_penultimates(&self, g: &mut Graph, tweets: &[&CleanedTweet]) -> Result<NodeId> {
        let parts = self
            .subs
            .iter()
            .map(|s| s.forward(g, &self.store, tweets).map(|t| t.penultimate))
            .collect::<Result<Vec<_>>>()?;
        g.concat_cols(&parts)
    }

    pub fn sub_index(&self, slot: Slot) -> Option<usize> {
        self.subs.iter().position(|s| s.cfg.slot == slot)
    }

    /// Parameter ids whose names start with `prefix.`.
    pub fn params_with_prefix(&self, prefix: &str) -> Vec<ParamId> {
        let p = format!("{prefix}.");
        self.store.iter().filter(|(_, x)| x.name.starts_with(&p)).map(|(id, _)| id).collect()
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut c = Checkpoint::new(self.store.clone());
        c.metadata = serde_json::to_value(ModelMeta::Asc {
            submodels: self.subs.iter().map(SubMeta::of).collect(),
            combiner_hidden: self.combiner_hidden.d_out,
        })?;
        Ok(c)
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        let meta: ModelMeta = serde_json::from_value(c.metadata.clone())?;
        let ModelMeta::Asc {
            submodels,
            combiner_hidden,
        } = meta
        else {
            return Err(Error::Checkpoint("checkpoint does not hold a full classifier".into()));
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::new();
        let subs = submodels
            .iter()
            .map(|m| rebuild_sub(&mut store, m, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let (h, o) = combiner(&mut store, &subs, combiner_hidden, &mut rng)?;
        restore_params(&mut store, &c.params)?;
        Ok(Self {
            store,
            subs,
            combiner_hidden: h,
            combiner_output: o,
        })
    }
}

impl Classifier for AscModel {
    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn probs(&self, g: &mut Graph, tweets: &[&CleanedTweet]) -> Result<NodeId> {
        let x = self.concat_penultimates(g, tweets)?;
        let h = self.combiner_hidden.forward(g, &self.store, x)?;
        self.combiner_output.forward(g, &self.store, h)
    }

    fn hidden(&self, g: &mut Graph, tweets: &[&CleanedTweet], layer: HiddenLayer) -> Result<NodeId> {
        match layer {
            HiddenLayer::CombinerHidden => {
                let x = self.concat_penultimates(g, tweets)?;
                self.combiner_hidden.forward(g, &self.store, x)
            }
            HiddenLayer::SubmodelPenultimate(Some(slot)) => {
                let i = self
                    .sub_index(slot)
                    .ok_or_else(|| Error::Config(format!("no sub-model in slot {slot}")))?;
                Ok(self.subs[i].forward(g, &self.store, tweets)?.penultimate)
            }
            HiddenLayer::SubmodelPenultimate(None) => {
                Err(Error::Config("name the sub-model slot, e.g. submodel_penultimate:w2v_200".into()))
            }
        }
    }

    fn embedding_params(&self) -> Vec<ParamId> {
        self.subs.iter().flat_map(|s| s.embedding_params()).collect()
    }
}

/// One sub-model of a full classifier trained through its own softmax head.
pub struct SubModelView<'a> {
    pub store: &'a mut ParamStore,
    pub sub: &'a SubModel,
}

impl Classifier for SubModelView<'_> {
    fn store(&self) -> &ParamStore {
        self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        self.store
    }

    fn probs(&self, g: &mut Graph, tweets: &[&CleanedTweet]) -> Result<NodeId> {
        Ok(self.sub.forward(g, self.store, tweets)?.probs)
    }

    fn hidden(&self, g: &mut Graph, tweets: &[&CleanedTweet], layer: HiddenLayer) -> Result<NodeId> {
        match layer {
            HiddenLayer::SubmodelPenultimate(_) => Ok(self.sub.forward(g, self.store, tweets)?.penultimate),
            HiddenLayer::CombinerHidden => Err(Error::Config("a sub-model view has no combiner layer".into())),
        }
    }

    fn embedding_params(&self) -> Vec<ParamId> {
        self.sub.embedding_params().to_vec()
    }
}
