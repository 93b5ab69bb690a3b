//! The sentiment classifier: four embedding sub-models (bi-GRU with
//! convolutional attention over the hidden states) joined by a small dense
//! combiner, plus keyword-labelled retraining of single sub-models.

pub mod config;
mod model;
mod train;
pub mod vocab;

pub use config::{DistantSchedule, Slot, SubModelConfig, TrainConfig};
pub use model::{
    build_asc, build_asc_with_hidden, build_submodel, AscModel, Classifier, HiddenLayer, SubModel, SubModelNet,
    SubModelInit, SubModelView, SubTrace,
};
pub use train::{
    accuracy, build_distant_datasets, extract_hidden, predict_probs, pretrain_submodels, train_asc, train_distant,
    DistantDataset, History, Sentiment, Trainer, DISTANT_EMOTIONS,
};
pub use vocab::{Embeddings, Vocab};
