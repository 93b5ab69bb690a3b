//! Minimal reverse-mode differentiation core: tensors, a recording graph,
//! layers, losses, optimizers, checkpoints and a finite-difference checker.

mod array;
pub mod checkpoint;
pub mod gradcheck;
mod graph;
pub mod layers;
pub mod optim;
mod params;

pub use array::Tensor;
pub use checkpoint::Checkpoint;
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use graph::{Gradients, Graph, NodeId, PROB_FLOOR};
pub use layers::{Activation, BiGru, ConvAttention, Dense, GruCell};
pub use optim::{Optimizer, OptimizerKind};
pub use params::{glorot_uniform, ParamId, ParamStore, Parameter};

/// Epsilon used by the Tanimoto loss.
pub const TANIMOTO_EPS: f64 = 1e-7;

/// Tanimoto distance between two vectors, evaluated directly.
pub fn tanimoto_distance(pred: &[f64], target: &[f64], eps: f64) -> f64 {
    graph::tanimoto_distance(pred, target, eps)
}
