//! First-order optimizers over a flat weight vector.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

pub enum Optimizer {
    Sgd {
        momentum: f64,
        velocity: Vec<f64>,
    },
    Adam {
        beta1: f64,
        beta2: f64,
        eps: f64,
        m: Vec<f64>,
        v: Vec<f64>,
        t: u64,
    },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, n_params: usize) -> Optimizer {
        match kind {
            OptimizerKind::Sgd { momentum } => Optimizer::Sgd {
                momentum,
                velocity: vec![0.0; n_params],
            },
            OptimizerKind::Adam { beta1, beta2, eps } => Optimizer::Adam {
                beta1,
                beta2,
                eps,
                m: vec![0.0; n_params],
                v: vec![0.0; n_params],
                t: 0,
            },
        }
    }

    /// In-place update. A gradient entry of exactly zero leaves both the
    /// weight and the optimizer state for that entry unchanged, which is
    /// what makes freezing via gradient masking exact.
    pub fn step(&mut self, weights: &mut [f64], grad: &[f64], lr: f64) {
        match self {
            Optimizer::Sgd { momentum, velocity } => {
                for i in 0..weights.len() {
                    velocity[i] = *momentum * velocity[i] - lr * grad[i];
                    weights[i] += velocity[i];
                }
            }
            Optimizer::Adam {
                beta1,
                beta2,
                eps,
                m,
                v,
                t,
            } => {
                *t += 1;
                let b1t = 1.0 - beta1.powi(*t as i32);
                let b2t = 1.0 - beta2.powi(*t as i32);
                for i in 0..weights.len() {
                    m[i] = *beta1 * m[i] + (1.0 - *beta1) * grad[i];
                    v[i] = *beta2 * v[i] + (1.0 - *beta2) * grad[i] * grad[i];
                    let m_hat = m[i] / b1t;
                    let v_hat = v[i] / b2t;
                    weights[i] -= lr * m_hat / (v_hat.sqrt() + *eps);
                }
            }
        }
    }
}
