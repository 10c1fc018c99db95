use serde::{Deserialize, Serialize};

use super::params::Params;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 2.5e-3,
            beta1: 0.0,
            beta2: 0.99,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moments are kept per tensor in the model's
/// visit order; tensors rejected by the trainable filter are left untouched
/// and their moments stay zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    pub first: Vec<Tensor>,
    pub second: Vec<Tensor>,
}

impl Adam {
    pub fn new<P: Params>(config: AdamConfig, model: &P) -> Self {
        let mut first = Vec::new();
        model.visit(&mut |_, t| first.push(t.zeros_like()));
        let second = first.clone();
        Self {
            config,
            step: 0,
            first,
            second,
        }
    }

    pub fn update<P: Params>(&mut self, model: &mut P, grads: &P, trainable: impl Fn(&str) -> bool) {
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        let mut grad_list = Vec::new();
        grads.visit(&mut |_, t| grad_list.push(t));
        let mut i = 0;
        let (first, second) = (&mut self.first, &mut self.second);
        model.visit_mut(&mut |name, param| {
            if trainable(name) {
                let (m, v, g) = (&mut first[i], &mut second[i], grad_list[i]);
                for j in 0..param.data.len() {
                    let gj = g.data[j];
                    m.data[j] = beta1 * m.data[j] + (1.0 - beta1) * gj;
                    v.data[j] = beta2 * v.data[j] + (1.0 - beta2) * gj * gj;
                    let mhat = m.data[j] / c1;
                    let vhat = v.data[j] / c2;
                    param.data[j] -= lr * mhat / (vhat.sqrt() + eps);
                }
            }
            i += 1;
        });
    }
}
