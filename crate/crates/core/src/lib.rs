//! Tweet sentiment toolkit: a two-track cleaning pipeline, lexicon features,
//! a bi-directional GRU classifier with convolutional attention over its
//! hidden states, soft-voting ensemble heads and ordinal calibration.

pub mod asc;
pub mod calib;
pub mod error;
pub mod heads;
pub mod lexfeat;
pub mod tensor;
pub mod textpipe;

pub use error::{Error, Result};
