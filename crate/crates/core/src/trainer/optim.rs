use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// Per-parameter optimizer state over one flat parameter vector.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd { lr: f64 },
    Adam { lr: f64, t: i32, m: Vec<f64>, v: Vec<f64> },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, len: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => Optimizer::Adam {
                lr,
                t: 0,
                m: vec![0.0; len],
                v: vec![0.0; len],
            },
        }
    }

    /// Apply one update. `params` and `grads` are visited in the same order
    /// on every call.
    pub fn step<'a>(&mut self, params: impl Iterator<Item = &'a mut f64>, grads: impl Iterator<Item = f64>) {
        match self {
            Optimizer::Sgd { lr } => {
                for (p, g) in params.zip(grads) {
                    *p -= *lr * g;
                }
            }
            Optimizer::Adam { lr, t, m, v } => {
                *t += 1;
                let c1 = 1.0 - BETA1.powi(*t);
                let c2 = 1.0 - BETA2.powi(*t);
                for (((p, g), mi), vi) in params.zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
                    *mi = BETA1 * *mi + (1.0 - BETA1) * g;
                    *vi = BETA2 * *vi + (1.0 - BETA2) * g * g;
                    *p -= *lr * (*mi / c1) / ((*vi / c2).sqrt() + EPS);
                }
            }
        }
    }
}
