use serde::{Deserialize, Serialize};

use super::graph::Gradients;
use super::params::{ParamId, ParamStore};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    /// `theta -= lr * g / (sqrt(sum g^2) + eps)`
    AdaGrad { lr: f64, eps: f64 },
    /// Bias-corrected Adam.
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
}

impl OptimizerKind {
    pub fn adagrad() -> Self {
        OptimizerKind::AdaGrad { lr: 0.01, eps: 1e-8 }
    }

    pub fn adam() -> Self {
        OptimizerKind::Adam {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn with_lr(self, lr: f64) -> Self {
        match self {
            OptimizerKind::AdaGrad { eps, .. } => OptimizerKind::AdaGrad { lr, eps },
            OptimizerKind::Adam { beta1, beta2, eps, .. } => OptimizerKind::Adam { lr, beta1, beta2, eps },
        }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            OptimizerKind::AdaGrad { lr, .. } | OptimizerKind::Adam { lr, .. } => lr,
        }
    }
}

/// Per-parameter accumulators. AdaGrad uses only `first` (sum of squares);
/// Adam keeps first and second moments.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Slot {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub steps: u64,
    pub slots: Vec<Option<Slot>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind) -> Self {
        Self {
            kind,
            steps: 0,
            slots: Vec::new(),
        }
    }

    /// Applies one update to every trainable parameter. A trainable parameter
    /// without a gradient is an error; frozen parameters are left untouched.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) -> Result<()> {
        let trainable: Vec<ParamId> = store.iter().filter(|(_, p)| p.trainable).map(|(id, _)| id).collect();
        for &id in &trainable {
            if !grads.contains(id) {
                return Err(Error::invalid(format!(
                    "no gradient for trainable parameter {:?}",
                    store.get(id).name
                )));
            }
        }
        if self.slots.len() < store.len() {
            self.slots.resize(store.len(), None);
        }
        self.steps += 1;
        let t = self.steps as i32;
        for id in trainable {
            let g = grads.get(id).expect("checked above");
            let param = store.get_mut(id);
            let n = param.value.len();
            if g.len() != n {
                return Err(Error::Shape {
                    op: "optimizer step",
                    left: vec![n],
                    right: vec![g.len()],
                });
            }
            let slot = self.slots[id.index()].get_or_insert_with(|| Slot {
                first: vec![0.0; n],
                second: match self.kind {
                    OptimizerKind::AdaGrad { .. } => Vec::new(),
                    OptimizerKind::Adam { .. } => vec![0.0; n],
                },
            });
            let values = param.value.data_mut();
            match self.kind {
                OptimizerKind::AdaGrad { lr, eps } => {
                    for i in 0..n {
                        slot.first[i] += g[i] * g[i];
                        values[i] -= lr * g[i] / (slot.first[i].sqrt() + eps);
                    }
                }
                OptimizerKind::Adam { lr, beta1, beta2, eps } => {
                    let c1 = 1.0 - beta1.powi(t);
                    let c2 = 1.0 - beta2.powi(t);
                    for i in 0..n {
                        slot.first[i] = beta1 * slot.first[i] + (1.0 - beta1) * g[i];
                        slot.second[i] = beta2 * slot.second[i] + (1.0 - beta2) * g[i] * g[i];
                        let m_hat = slot.first[i] / c1;
                        let v_hat = slot.second[i] / c2;
                        values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Graph, Tensor};

    fn scalar_problem(value: f64) -> (ParamStore, ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("theta", Tensor::scalar(value)).unwrap();
        (s, id)
    }

    /// Gradients for `loss = coef * theta` are just `coef`.
    fn linear_grads(store: &ParamStore, id: ParamId, coef: f64) -> Gradients {
        let mut g = Graph::new();
        let p = g.param(store, id);
        let y = g.affine(p, coef, 0.0);
        let s = g.sum(y);
        g.backward(s).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        for kind in [OptimizerKind::adagrad(), OptimizerKind::adam()] {
            let (mut s, id) = scalar_problem(0.7);
            let grads = linear_grads(&s, id, 0.0);
            Optimizer::new(kind).step(&mut s, &grads).unwrap();
            assert_eq!(s.value(id).data(), &[0.7]);
        }
    }

    #[test]
    fn adagrad_first_step_hand_value() {
        let (mut s, id) = scalar_problem(0.0);
        let grads = linear_grads(&s, id, 2.0);
        let mut opt = Optimizer::new(OptimizerKind::AdaGrad { lr: 1.0, eps: 1e-8 });
        opt.step(&mut s, &grads).unwrap();
        let expected = -2.0 / (2.0 + 1e-8);
        assert!((s.value(id).data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_lr_regardless_of_scale() {
        for coef in [1e-3, 1.0, 1e3] {
            let (mut s, id) = scalar_problem(0.0);
            let grads = linear_grads(&s, id, coef);
            let mut opt = Optimizer::new(OptimizerKind::adam());
            opt.step(&mut s, &grads).unwrap();
            let moved = -s.value(id).data()[0];
            assert!((moved - 0.001).abs() < 1e-8, "coef {coef}: moved {moved}");
        }
    }

    #[test]
    fn missing_gradient_is_an_error() {
        let (mut s, _) = scalar_problem(0.0);
        let mut opt = Optimizer::new(OptimizerKind::adam());
        assert!(opt.step(&mut s, &Gradients::default()).is_err());
    }

    #[test]
    fn frozen_params_skipped() {
        let (mut s, id) = scalar_problem(1.0);
        s.set_trainable(id, false);
        let mut opt = Optimizer::new(OptimizerKind::adagrad());
        opt.step(&mut s, &Gradients::default()).unwrap();
        assert_eq!(s.value(id).data(), &[1.0]);
    }
}
