use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::nn::{lrelu_backward, lrelu_forward, Conv2d, ConvCache, Linear, Params, Tensor};
use crate::tensor::FeatureMap;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscriminatorConfig {
    pub patch: u32,
    /// Output channels of each stride-2 3x3 convolution.
    pub channels: Vec<usize>,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            patch: 64,
            channels: vec![16, 32, 64, 64],
        }
    }
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<()> {
        let div = 1u32 << self.channels.len();
        if self.channels.is_empty() || self.channels.contains(&0) {
            return Err(Error::invalid("discriminator needs at least one non-empty layer"));
        }
        if self.patch % div != 0 || self.patch / div == 0 {
            return Err(Error::invalid(format!(
                "patch size {} is not divisible by {div}",
                self.patch
            )));
        }
        Ok(())
    }

    fn final_size(&self) -> usize {
        (self.patch >> self.channels.len()) as usize
    }
}

/// Fixed-resolution convolutional critic returning one realness logit.
#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator {
    pub config: DiscriminatorConfig,
    pub convs: Vec<Conv2d>,
    pub head: Linear,
}

#[derive(Clone, Debug)]
pub struct DiscriminatorCache {
    convs: Vec<ConvCache>,
    /// Post-activation output of each convolution.
    acts: Vec<FeatureMap>,
}

/// Squared input-gradient norm and, when requested, its parameter gradient.
#[derive(Clone, Debug)]
pub struct R1Output {
    pub penalty: f64,
    pub input_grad: Image,
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(config: DiscriminatorConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut convs = Vec::new();
        let mut c_in = 3;
        for &c in &config.channels {
            convs.push(Conv2d::new(c_in, c, 3, 2, 1, rng));
            c_in = c;
        }
        let f = config.final_size();
        let head = Linear::new(f * f * c_in, 1, 0.0, rng);
        Ok(Self { config, convs, head })
    }

    fn check_input(&self, img: &Image) -> Result<()> {
        let p = self.config.patch as usize;
        if img.height() != p || img.width() != p {
            return Err(Error::invalid(format!(
                "discriminator expects {p}x{p}, got {}x{}",
                img.height(),
                img.width()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, img: &Image) -> Result<(f64, DiscriminatorCache)> {
        self.check_input(img)?;
        let mut x = img.map(|v| 2.0 * v - 1.0).to_feature_map();
        let mut caches = Vec::with_capacity(self.convs.len());
        let mut acts = Vec::with_capacity(self.convs.len());
        for conv in &self.convs {
            let (mut y, cache) = conv.forward(&x);
            lrelu_forward(&mut y.data);
            caches.push(cache);
            acts.push(y.clone());
            x = y;
        }
        let logit = self.head.forward(&x.data, 1)[0];
        Ok((logit, DiscriminatorCache { convs: caches, acts }))
    }

    pub fn logit(&self, img: &Image) -> Result<f64> {
        Ok(self.forward(img)?.0)
    }

    /// Pre-activation gradients of the logit at every convolution, top first
    /// reversed into layer order, plus the gradient at the image.
    fn backward_signals(&self, cache: &DiscriminatorCache) -> (Vec<FeatureMap>, Image) {
        let n = self.convs.len();
        let last = &cache.acts[n - 1];
        let d_flat = self.head.backward_input(&[1.0], 1);
        let mut d = FeatureMap::from_vec(last.height, last.width, last.channels, d_flat);
        let mut deltas = vec![FeatureMap::zeros(0, 0, 0); n];
        for l in (0..n).rev() {
            lrelu_backward(&cache.acts[l].data, &mut d.data);
            let dx = self.convs[l].backward_input(&cache.convs[l], &d);
            deltas[l] = std::mem::replace(&mut d, dx);
        }
        // Chain through the 2x - 1 input transform.
        d.data.iter_mut().for_each(|v| *v *= 2.0);
        (deltas, Image::from_feature_map(d).expect("three input channels"))
    }

    /// Gradient of the logit with respect to the input image.
    pub fn input_gradient(&self, img: &Image) -> Result<Image> {
        let (_, cache) = self.forward(img)?;
        Ok(self.backward_signals(&cache).1)
    }

    /// Backpropagate `d_logit`: accumulates `d_logit * dD/dtheta` into `grad`
    /// and returns `d_logit * dD/dx`.
    pub fn backward(&self, cache: &DiscriminatorCache, d_logit: f64, grad: &mut Discriminator) -> Image {
        let n = self.convs.len();
        let (mut deltas, mut dx) = self.backward_signals(cache);
        self.head.accumulate_grad(&cache.acts[n - 1].data, &[d_logit], 1, &mut grad.head, true);
        for (l, delta) in deltas.iter_mut().enumerate() {
            delta.data.iter_mut().for_each(|v| *v *= d_logit);
            self.convs[l].accumulate_grad(&cache.convs[l], delta, &mut grad.convs[l], true);
        }
        dx.data_mut().iter_mut().for_each(|v| *v *= d_logit);
        dx
    }

    /// `d_logit * dD/dx` without touching parameter gradients.
    pub fn backward_input(&self, cache: &DiscriminatorCache, d_logit: f64) -> Image {
        let mut dx = self.backward_signals(cache).1;
        dx.data_mut().iter_mut().for_each(|v| *v *= d_logit);
        dx
    }

    /// R1 penalty `||dD/dx||^2` at `img`.
    pub fn r1_penalty(&self, img: &Image) -> Result<R1Output> {
        let input_grad = self.input_gradient(img)?;
        let penalty = input_grad.data().iter().map(|v| v * v).sum();
        Ok(R1Output { penalty, input_grad })
    }

    /// R1 penalty with its exact parameter gradient scaled by `coef`.
    ///
    /// The network is piecewise linear, so the input gradient is a product of
    /// weight matrices and fixed activation slopes. Differentiating
    /// `<g, v>` with `v = 2 g` held fixed gives `dR1/dtheta`; that inner product
    /// is the bias-free network applied to `v` with frozen slopes, so each
    /// weight gradient pairs the tangent input of a layer with the ordinary
    /// backward signal at its output.
    pub fn r1_backward(&self, img: &Image, coef: f64, grad: &mut Discriminator) -> Result<f64> {
        let (_, cache) = self.forward(img)?;
        let (deltas, g) = self.backward_signals(&cache);
        let penalty: f64 = g.data().iter().map(|v| v * v).sum();
        // Tangent of the 2x - 1 transform applied to v = 2 g.
        let mut u = g.to_feature_map();
        u.data.iter_mut().for_each(|v| *v *= 4.0 * coef);
        for (l, conv) in self.convs.iter().enumerate() {
            let (mut t, tcache) = conv.forward_linear(&u);
            conv.accumulate_grad(&tcache, &deltas[l], &mut grad.convs[l], false);
            lrelu_backward(&cache.acts[l].data, &mut t.data);
            u = t;
        }
        self.head.accumulate_grad(&u.data, &[1.0], 1, &mut grad.head, false);
        Ok(penalty)
    }
}

impl Params for Discriminator {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(&str, &'a Tensor)) {
        for (k, c) in self.convs.iter().enumerate() {
            c.visit(&format!("conv.{k}"), f);
        }
        self.head.visit("head", f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        for (k, c) in self.convs.iter_mut().enumerate() {
            c.visit_mut(&format!("conv.{k}"), f);
        }
        self.head.visit_mut("head", f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> Discriminator {
        let cfg = DiscriminatorConfig {
            patch: 8,
            channels: vec![4, 6],
        };
        let mut d = Discriminator::new(cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        d.visit_mut(&mut |name, t| {
            if name.ends_with("bias") {
                t.data.iter_mut().for_each(|v| *v = rng.random::<f64>() - 0.5);
            }
        });
        d
    }

    fn random_image(seed: u64, p: usize) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(p, p, |_, _| [rng.random(), rng.random(), rng.random()])
    }

    #[test]
    fn deterministic_and_size_checked() {
        let d = tiny();
        let x = random_image(1, 8);
        assert_eq!(d.logit(&x).unwrap(), d.logit(&x).unwrap());
        assert!(d.logit(&random_image(1, 16)).is_err());
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let d = tiny();
        let x = random_image(2, 8);
        let g = d.input_gradient(&x).unwrap();
        let h = 1e-6;
        for i in 0..x.data().len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp.data_mut()[i] += h;
            xm.data_mut()[i] -= h;
            let fd = (d.logit(&xp).unwrap() - d.logit(&xm).unwrap()) / (2.0 * h);
            let a = g.data()[i];
            assert!((fd - a).abs() <= 1e-3 * fd.abs().max(a.abs()).max(1e-6), "{i}: {fd} vs {a}");
        }
    }

    #[test]
    fn parameter_gradient_matches_finite_differences() {
        let d = tiny();
        let x = random_image(3, 8);
        let (_, cache) = d.forward(&x).unwrap();
        let mut grad = d.zeros_like();
        d.backward(&cache, 0.7, &mut grad);
        check_param_grad(&d, &grad, |m| 0.7 * m.logit(&x).unwrap());
    }

    #[test]
    fn r1_parameter_gradient_matches_finite_differences() {
        let d = tiny();
        let x = random_image(5, 8);
        let mut grad = d.zeros_like();
        let penalty = d.r1_backward(&x, 1.5, &mut grad).unwrap();
        assert_eq!(penalty, d.r1_penalty(&x).unwrap().penalty);
        check_param_grad(&d, &grad, |m| 1.5 * m.r1_penalty(&x).unwrap().penalty);
    }

    fn check_param_grad(d: &Discriminator, grad: &Discriminator, f: impl Fn(&Discriminator) -> f64) {
        let mut analytic = Vec::new();
        grad.visit(&mut |name, t| analytic.push((name.to_string(), t.data.clone())));
        let h = 1e-6;
        for (name, values) in analytic {
            for idx in 0..values.len() {
                let bump = |delta: f64| {
                    let mut m = d.clone();
                    m.visit_mut(&mut |n, t| {
                        if n == name {
                            t.data[idx] += delta
                        }
                    });
                    f(&m)
                };
                let fd = (bump(h) - bump(-h)) / (2.0 * h);
                let a = values[idx];
                assert!(
                    (fd - a).abs() <= 1e-4 * (1e-3 + fd.abs().max(a.abs())),
                    "{name}[{idx}]: fd {fd} vs {a}"
                );
            }
        }
    }
}
