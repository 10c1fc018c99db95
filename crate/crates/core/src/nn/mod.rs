//! Minimal dense and convolutional layers with hand-written backward passes.
//!
//! Layers are plain structs holding [`Tensor`]s. A gradient for a layer is a
//! value of the same type (see [`Params::zeros_like`]), which keeps optimizer
//! state and checkpoint naming aligned with the model by construction.
//!
//! Weights use equalized learning rate: they are stored with unit-variance
//! initialization and multiplied by `1/sqrt(fan_in)` at run time.

mod adam;
mod gemm;
mod layers;
mod params;

pub use adam::{Adam, AdamConfig};
pub use gemm::gemm;
pub use layers::{lrelu_backward, lrelu_forward, Conv2d, ConvCache, Linear, LRELU_GAIN, LRELU_SLOPE};
pub use params::{ParamHash, Params};

pub use crate::tensor::Tensor;
