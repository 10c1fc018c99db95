use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::gemm::gemm;
use crate::tensor::{FeatureMap, Tensor};

pub const LRELU_SLOPE: f64 = 0.2;
pub const LRELU_GAIN: f64 = std::f64::consts::SQRT_2;

/// In-place `gain * leaky_relu(z)`.
pub fn lrelu_forward(z: &mut [f64]) {
    for v in z.iter_mut() {
        *v *= if *v > 0.0 { LRELU_GAIN } else { LRELU_GAIN * LRELU_SLOPE };
    }
}

/// Multiply `grad` by the activation's local slope. The slope is read off
/// the activation output, whose sign matches the pre-activation.
pub fn lrelu_backward(activation: &[f64], grad: &mut [f64]) {
    debug_assert_eq!(activation.len(), grad.len());
    for (g, a) in grad.iter_mut().zip(activation) {
        *g *= if *a > 0.0 { LRELU_GAIN } else { LRELU_GAIN * LRELU_SLOPE };
    }
}

fn normal_tensor<R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Tensor {
    let mut t = Tensor::zeros(shape);
    for v in &mut t.data {
        *v = StandardNormal.sample(rng);
    }
    t
}

/// Fully connected layer, `y = x (g W)^T + b` with `g = 1/sqrt(in)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    /// `[out, in]`
    pub weight: Tensor,
    /// `[out]`
    pub bias: Tensor,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, bias_init: f64, rng: &mut R) -> Self {
        Self {
            weight: normal_tensor(&[out_dim, in_dim], rng),
            bias: Tensor::filled(&[out_dim], bias_init),
        }
    }

    pub fn zeroed(in_dim: usize, out_dim: usize, bias_init: f64) -> Self {
        Self {
            weight: Tensor::zeros(&[out_dim, in_dim]),
            bias: Tensor::filled(&[out_dim], bias_init),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape[0]
    }

    fn gain(&self) -> f64 {
        1.0 / (self.in_dim() as f64).sqrt()
    }

    /// Forward on `n` row vectors.
    pub fn forward(&self, x: &[f64], n: usize) -> Vec<f64> {
        let mut y = self.forward_linear(x, n);
        let out = self.out_dim();
        for row in y.chunks_exact_mut(out) {
            for (v, b) in row.iter_mut().zip(&self.bias.data) {
                *v += b;
            }
        }
        y
    }

    /// Forward without the bias (the layer's linear part).
    pub fn forward_linear(&self, x: &[f64], n: usize) -> Vec<f64> {
        let (i, o) = (self.in_dim(), self.out_dim());
        debug_assert_eq!(x.len(), n * i);
        let mut y = vec![0.0; n * o];
        gemm(n, i, o, self.gain(), x, false, &self.weight.data, true, &mut y, 0.0);
        y
    }

    /// Gradient with respect to the input.
    pub fn backward_input(&self, dy: &[f64], n: usize) -> Vec<f64> {
        let (i, o) = (self.in_dim(), self.out_dim());
        let mut dx = vec![0.0; n * i];
        gemm(n, o, i, self.gain(), dy, false, &self.weight.data, false, &mut dx, 0.0);
        dx
    }

    /// Accumulate parameter gradients for input `x` and output gradient `dy`.
    pub fn accumulate_grad(&self, x: &[f64], dy: &[f64], n: usize, grad: &mut Linear, with_bias: bool) {
        let (i, o) = (self.in_dim(), self.out_dim());
        gemm(o, n, i, self.gain(), dy, true, x, false, &mut grad.weight.data, 1.0);
        if with_bias {
            for row in dy.chunks_exact(o) {
                for (g, d) in grad.bias.data.iter_mut().zip(row) {
                    *g += d;
                }
            }
        }
    }

    pub fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(&str, &'a Tensor)) {
        f(&format!("{prefix}.weight"), &self.weight);
        f(&format!("{prefix}.bias"), &self.bias);
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f(&format!("{prefix}.weight"), &mut self.weight);
        f(&format!("{prefix}.bias"), &mut self.bias);
    }
}

/// Square 2-D convolution on channels-last maps with zero padding.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    /// `[out, k, k, in]`
    pub weight: Tensor,
    /// `[out]`
    pub bias: Tensor,
    pub stride: usize,
    pub pad: usize,
}

/// Forward-pass record needed by the backward pass.
#[derive(Clone, Debug)]
pub struct ConvCache {
    cols: Vec<f64>,
    in_h: usize,
    in_w: usize,
    out_h: usize,
    out_w: usize,
}

impl Conv2d {
    pub fn new<R: Rng + ?Sized>(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            weight: normal_tensor(&[out_ch, kernel, kernel, in_ch], rng),
            bias: Tensor::zeros(&[out_ch]),
            stride,
            pad,
        }
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn in_ch(&self) -> usize {
        self.weight.shape[3]
    }

    pub fn out_ch(&self) -> usize {
        self.weight.shape[0]
    }

    fn fan_in(&self) -> usize {
        self.kernel() * self.kernel() * self.in_ch()
    }

    fn gain(&self) -> f64 {
        1.0 / (self.fan_in() as f64).sqrt()
    }

    pub fn output_size(&self, h: usize, w: usize) -> (usize, usize) {
        let k = self.kernel();
        (
            (h + 2 * self.pad - k) / self.stride + 1,
            (w + 2 * self.pad - k) / self.stride + 1,
        )
    }

    fn im2col(&self, x: &FeatureMap) -> (Vec<f64>, usize, usize) {
        let (k, c) = (self.kernel(), x.channels);
        let (oh, ow) = self.output_size(x.height, x.width);
        if k == 1 && self.stride == 1 && self.pad == 0 {
            return (x.data.clone(), oh, ow);
        }
        let row_len = k * k * c;
        let mut cols = vec![0.0; oh * ow * row_len];
        for oy in 0..oh {
            for ox in 0..ow {
                let base = (oy * ow + ox) * row_len;
                for ky in 0..k {
                    let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                    if iy < 0 || iy >= x.height as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                        if ix < 0 || ix >= x.width as isize {
                            continue;
                        }
                        let src = (iy as usize * x.width + ix as usize) * c;
                        let dst = base + (ky * k + kx) * c;
                        cols[dst..dst + c].copy_from_slice(&x.data[src..src + c]);
                    }
                }
            }
        }
        (cols, oh, ow)
    }

    fn col2im(&self, dcols: &[f64], cache: &ConvCache) -> FeatureMap {
        let (k, c) = (self.kernel(), self.in_ch());
        if k == 1 && self.stride == 1 && self.pad == 0 {
            return FeatureMap::from_vec(cache.in_h, cache.in_w, c, dcols.to_vec());
        }
        let mut dx = FeatureMap::zeros(cache.in_h, cache.in_w, c);
        let row_len = k * k * c;
        for oy in 0..cache.out_h {
            for ox in 0..cache.out_w {
                let base = (oy * cache.out_w + ox) * row_len;
                for ky in 0..k {
                    let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                    if iy < 0 || iy >= cache.in_h as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                        if ix < 0 || ix >= cache.in_w as isize {
                            continue;
                        }
                        let dst = (iy as usize * cache.in_w + ix as usize) * c;
                        let src = base + (ky * k + kx) * c;
                        for j in 0..c {
                            dx.data[dst + j] += dcols[src + j];
                        }
                    }
                }
            }
        }
        dx
    }

    pub fn forward(&self, x: &FeatureMap) -> (FeatureMap, ConvCache) {
        let (mut y, cache) = self.forward_linear(x);
        for px in y.data.chunks_exact_mut(self.out_ch()) {
            for (v, b) in px.iter_mut().zip(&self.bias.data) {
                *v += b;
            }
        }
        (y, cache)
    }

    /// Convolution without the bias.
    pub fn forward_linear(&self, x: &FeatureMap) -> (FeatureMap, ConvCache) {
        assert_eq!(x.channels, self.in_ch(), "conv input channel mismatch");
        let (cols, oh, ow) = self.im2col(x);
        let (p, kk, o) = (oh * ow, self.fan_in(), self.out_ch());
        let mut y = vec![0.0; p * o];
        gemm(p, kk, o, self.gain(), &cols, false, &self.weight.data, true, &mut y, 0.0);
        let cache = ConvCache {
            cols,
            in_h: x.height,
            in_w: x.width,
            out_h: oh,
            out_w: ow,
        };
        (FeatureMap::from_vec(oh, ow, o, y), cache)
    }

    pub fn backward_input(&self, cache: &ConvCache, dy: &FeatureMap) -> FeatureMap {
        let (p, kk, o) = (cache.out_h * cache.out_w, self.fan_in(), self.out_ch());
        let mut dcols = vec![0.0; p * kk];
        gemm(p, o, kk, self.gain(), &dy.data, false, &self.weight.data, false, &mut dcols, 0.0);
        self.col2im(&dcols, cache)
    }

    /// Accumulate parameter gradients given the cached input columns.
    pub fn accumulate_grad(&self, cache: &ConvCache, dy: &FeatureMap, grad: &mut Conv2d, with_bias: bool) {
        let (p, kk, o) = (cache.out_h * cache.out_w, self.fan_in(), self.out_ch());
        gemm(o, p, kk, self.gain(), &dy.data, true, &cache.cols, false, &mut grad.weight.data, 1.0);
        if with_bias {
            for px in dy.data.chunks_exact(o) {
                for (g, d) in grad.bias.data.iter_mut().zip(px) {
                    *g += d;
                }
            }
        }
    }

    pub fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(&str, &'a Tensor)) {
        f(&format!("{prefix}.weight"), &self.weight);
        f(&format!("{prefix}.bias"), &self.bias);
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f(&format!("{prefix}.weight"), &mut self.weight);
        f(&format!("{prefix}.bias"), &mut self.bias);
    }
}
