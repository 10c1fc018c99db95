use rand::Rng;

use crate::nn::{lrelu_backward, lrelu_forward, Linear, Tensor};

/// Stack of fully connected layers, each followed by a leaky ReLU.
#[derive(Clone, Debug, PartialEq)]
pub struct MappingNetwork {
    pub layers: Vec<Linear>,
}

impl MappingNetwork {
    pub fn new<R: Rng + ?Sized>(in_dim: usize, width: usize, depth: usize, rng: &mut R) -> Self {
        let layers = (0..depth.max(1))
            .map(|i| Linear::new(if i == 0 { in_dim } else { width }, width, 0.0, rng))
            .collect();
        Self { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, Linear::out_dim)
    }

    /// All activations, input first; the last entry is the output.
    pub fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        for layer in &self.layers {
            let mut y = layer.forward(acts.last().unwrap(), 1);
            lrelu_forward(&mut y);
            acts.push(y);
        }
        acts
    }

    /// Backpropagate `d_out` through the stack, accumulating into `grad`.
    pub fn backward(&self, acts: &[Vec<f64>], d_out: &[f64], grad: &mut MappingNetwork) -> Vec<f64> {
        let mut d = d_out.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            lrelu_backward(&acts[i + 1], &mut d);
            layer.accumulate_grad(&acts[i], &d, 1, &mut grad.layers[i], true);
            d = layer.backward_input(&d, 1);
        }
        d
    }

    pub fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(&str, &'a Tensor)) {
        for (i, l) in self.layers.iter().enumerate() {
            l.visit(&format!("{prefix}.{i}"), f);
        }
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            l.visit_mut(&format!("{prefix}.{i}"), f);
        }
    }
}
