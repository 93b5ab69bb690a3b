use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::OptimizerKind;
use crate::textpipe::Variant;

/// Embedding input slot of a sub-model. The algorithm half of the name only
/// labels the slot; tables are loaded from file or initialised randomly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    W2v200,
    W2v150,
    Ft200,
    Ft150,
}

impl Slot {
    pub const ALL: [Slot; 4] = [Slot::W2v200, Slot::W2v150, Slot::Ft200, Slot::Ft150];

    pub fn name(self) -> &'static str {
        match self {
            Slot::W2v200 => "w2v_200",
            Slot::W2v150 => "w2v_150",
            Slot::Ft200 => "ft_200",
            Slot::Ft150 => "ft_150",
        }
    }

    /// Word embedding size of the slot at full scale.
    pub fn canonical_dim(self) -> usize {
        match self {
            Slot::W2v200 | Slot::Ft200 => 200,
            Slot::W2v150 | Slot::Ft150 => 150,
        }
    }

    /// Cleaning variant the slot's embeddings were trained on.
    pub fn variant(self) -> Variant {
        match self {
            Slot::W2v200 | Slot::Ft200 => Variant::Simple,
            Slot::W2v150 | Slot::Ft150 => Variant::Complex,
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Slot {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Slot::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown embedding slot {s:?}")))
    }
}

pub const POS_EMBED_DIM: usize = 8;
pub const SEQ_LEN: usize = 40;
pub const GRU_HIDDEN: usize = 200;
pub const CONV_WIDTHS: [usize; 6] = [1, 2, 3, 4, 5, 6];
pub const CONV_FILTERS: usize = 100;
pub const PENULTIMATE_DIM: usize = 30;
/// Penultimate size of the emotion models trained on keyword-labelled data.
pub const DISTANT_PENULTIMATE_DIM: usize = 15;
pub const COMBINER_HIDDEN: usize = 25;
pub const NUM_CLASSES: usize = 3;
/// 25 tags plus the padding row.
pub const POS_VOCAB: usize = 26;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubModelConfig {
    pub slot: Slot,
    pub word_embed_dim: usize,
    pub pos_embed_dim: usize,
    pub variant: Variant,
    pub seq_len: usize,
    pub gru_hidden: usize,
    pub conv_widths: Vec<usize>,
    pub conv_filters: usize,
    pub penultimate_dim: usize,
    pub num_classes: usize,
}

impl SubModelConfig {
    /// Full-size configuration of a slot.
    pub fn canonical(slot: Slot) -> Self {
        Self {
            slot,
            word_embed_dim: slot.canonical_dim(),
            pos_embed_dim: POS_EMBED_DIM,
            variant: slot.variant(),
            seq_len: SEQ_LEN,
            gru_hidden: GRU_HIDDEN,
            conv_widths: CONV_WIDTHS.to_vec(),
            conv_filters: CONV_FILTERS,
            penultimate_dim: PENULTIMATE_DIM,
            num_classes: NUM_CLASSES,
        }
    }

    /// Small configuration for tests and desk-scale runs: embedding sizes
    /// divided by ten, 8 steps, 4 hidden units, 2 filters per width.
    pub fn toy(slot: Slot) -> Self {
        Self {
            word_embed_dim: slot.canonical_dim() / 10,
            pos_embed_dim: 2,
            seq_len: 8,
            gru_hidden: 4,
            conv_filters: 2,
            penultimate_dim: 3,
            ..Self::canonical(slot)
        }
    }

    pub fn with_penultimate(mut self, dim: usize) -> Self {
        self.penultimate_dim = dim;
        self
    }

    pub fn gru_input_dim(&self) -> usize {
        self.word_embed_dim + self.pos_embed_dim
    }

    pub fn attention_dim(&self) -> usize {
        self.conv_widths.len() * self.conv_filters
    }

    pub fn validate(&self) -> Result<()> {
        if self.variant != self.slot.variant() {
            return Err(Error::Config(format!(
                "slot {} reads the {:?} cleaning, configured with {:?}",
                self.slot,
                self.slot.variant(),
                self.variant
            )));
        }
        let d = self.word_embed_dim;
        if (d == 150 || d == 200) && d != self.slot.canonical_dim() {
            return Err(Error::Config(format!(
                "slot {} pairs with {}-dimensional embeddings, got {d}",
                self.slot,
                self.slot.canonical_dim()
            )));
        }
        let sizes = [
            ("word_embed_dim", d),
            ("pos_embed_dim", self.pos_embed_dim),
            ("seq_len", self.seq_len),
            ("gru_hidden", self.gru_hidden),
            ("conv_filters", self.conv_filters),
            ("penultimate_dim", self.penultimate_dim),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.num_classes != NUM_CLASSES {
            return Err(Error::Config(format!("sub-models have {NUM_CLASSES} classes, got {}", self.num_classes)));
        }
        if self.conv_widths.is_empty() || self.conv_widths.contains(&0) {
            return Err(Error::Config("conv widths must be positive and non-empty".into()));
        }
        let widest = *self.conv_widths.iter().max().expect("non-empty");
        if self.seq_len < widest {
            return Err(Error::Config(format!(
                "seq_len {} shorter than the widest filter {widest}",
                self.seq_len
            )));
        }
        Ok(())
    }
}

/// Epoch counts of the keyword-labelled retraining: embeddings fixed first,
/// then trainable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistantSchedule {
    pub frozen_epochs: usize,
    pub trainable_epochs: usize,
}

impl Default for DistantSchedule {
    fn default() -> Self {
        Self {
            frozen_epochs: 1,
            trainable_epochs: 6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Leading epochs during which embedding tables are not updated.
    pub frozen_embedding_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 32,
            optimizer: OptimizerKind::adagrad(),
            seed: 0,
            frozen_embedding_epochs: 0,
        }
    }
}

impl TrainConfig {
    pub fn with_schedule(mut self, s: DistantSchedule) -> Self {
        self.frozen_embedding_epochs = s.frozen_epochs;
        self.epochs = s.frozen_epochs + s.trainable_epochs;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.optimizer.lr() > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairing_is_enforced() {
        for s in Slot::ALL {
            SubModelConfig::canonical(s).validate().unwrap();
            SubModelConfig::toy(s).validate().unwrap();
        }
        let mut c = SubModelConfig::canonical(Slot::W2v200);
        c.variant = Variant::Complex;
        assert!(c.validate().is_err());
        let mut c = SubModelConfig::canonical(Slot::Ft150);
        c.word_embed_dim = 200;
        assert!(c.validate().is_err());
        let mut c = SubModelConfig::toy(Slot::W2v200);
        c.seq_len = 3;
        assert!(c.validate().is_err());
    }

    #[test]
    fn canonical_sizes() {
        let c = SubModelConfig::canonical(Slot::W2v200);
        assert_eq!(c.gru_input_dim(), 208);
        assert_eq!(c.attention_dim(), 600);
        let s = DistantSchedule::default();
        let t = TrainConfig::default().with_schedule(s);
        assert_eq!((t.frozen_embedding_epochs, t.epochs), (1, 7));
        assert_eq!("ft_150".parse::<Slot>().unwrap(), Slot::Ft150);
    }
}
