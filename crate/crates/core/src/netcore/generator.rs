use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mapping::MappingNetwork;
use crate::error::{Error, Result};
use crate::geometry::{
    band_limit_gain, fourier_embed_sampled, normalize_scale, patch_grid_with_margin, CoordinateGrid, FourierBasis, PatchSpec,
    FREQUENCY_FLOOR,
};
use crate::image::Image;
use crate::nn::{lrelu_backward, lrelu_forward, Conv2d, ConvCache, Linear, Params, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    /// Patch size p.
    pub patch: u32,
    pub z_dim: usize,
    /// Width of both mapping networks.
    pub w_dim: usize,
    pub mapping_layers: usize,
    pub fourier_channels: usize,
    /// Radial frequency cap of the Fourier basis, cycles per unit length.
    /// Channels above half the sampling rate of a given scale are faded out
    /// there, so this may exceed `patch / 2` to give high scales fine detail.
    pub bandwidth: f64,
    pub layers: usize,
    pub channels: usize,
    /// Synthesis kernel size, 1 (pointwise) or 3.
    pub kernel: usize,
    /// Scale that maps to `s_bar = +1`.
    pub scale_max: u32,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            patch: 64,
            z_dim: 64,
            w_dim: 64,
            mapping_layers: 2,
            fourier_channels: 64,
            bandwidth: 128.0,
            layers: 6,
            channels: 128,
            kernel: 1,
            scale_max: 256,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(format!("generator config: {m}")));
        if self.patch == 0 {
            return bad("patch must be positive");
        }
        if self.z_dim == 0 || self.w_dim == 0 || self.fourier_channels == 0 || self.channels == 0 {
            return bad("dimensions must be positive");
        }
        if self.kernel != 1 && self.kernel != 3 {
            return bad("kernel must be 1 or 3");
        }
        if self.scale_max <= self.patch {
            return bad("scale_max must exceed patch");
        }
        if !(self.bandwidth >= FREQUENCY_FLOOR && self.bandwidth.is_finite()) {
            return bad("bandwidth must be finite and at least the frequency floor (1 cycle per unit)");
        }
        Ok(())
    }

    /// Pixels of context lost on each side by the valid-convolution stack.
    pub fn margin(&self) -> usize {
        self.layers * (self.kernel / 2)
    }
}

/// Per-layer channel scales; the last entry modulates the RGB projection.
#[derive(Clone, Debug, PartialEq)]
pub struct ModulationParams {
    pub layers: Vec<Vec<f64>>,
}

/// Coordinate-based patch generator conditioned on a latent and a scale.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub config: GeneratorConfig,
    /// Frozen input basis; not visited as a trainable tensor.
    pub basis: FourierBasis,
    pub map_z: MappingNetwork,
    pub map_s: MappingNetwork,
    pub affine_z: Vec<Linear>,
    pub affine_s: Vec<Linear>,
    pub convs: Vec<Conv2d>,
    pub to_rgb: Conv2d,
}

/// Intermediate values of one synthesis pass.
#[derive(Clone, Debug)]
pub struct GeneratorCache {
    z_acts: Vec<Vec<f64>>,
    s_acts: Vec<Vec<f64>>,
    pub modulation: ModulationParams,
    /// Unmodulated input of each modulated layer (`layers + 1` entries).
    inputs: Vec<crate::tensor::FeatureMap>,
    convs: Vec<ConvCache>,
}

/// Rescale to unit second moment, i.e. onto the sphere of radius `sqrt(d)`.
pub fn normalize_latent(z: &[f64]) -> Vec<f64> {
    let ms = z.iter().map(|v| v * v).sum::<f64>() / z.len() as f64;
    let inv = 1.0 / (ms + 1e-8).sqrt();
    z.iter().map(|v| v * inv).collect()
}

fn modulate(x: &crate::tensor::FeatureMap, m: &[f64]) -> crate::tensor::FeatureMap {
    let mut out = x.clone();
    for px in out.data.chunks_exact_mut(m.len()) {
        for (v, s) in px.iter_mut().zip(m) {
            *v *= s;
        }
    }
    out
}

impl Generator {
    pub fn new<R: Rng + ?Sized>(config: GeneratorConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let basis = FourierBasis::random(config.fourier_channels, config.bandwidth, rng);
        let map_z = MappingNetwork::new(config.z_dim, config.w_dim, config.mapping_layers, rng);
        let map_s = MappingNetwork::new(1, config.w_dim, config.mapping_layers, rng);
        let mut in_channels = vec![config.fourier_channels];
        in_channels.extend(std::iter::repeat_n(config.channels, config.layers));
        let affine_z = in_channels.iter().map(|&c| Linear::new(config.w_dim, c, 1.0, rng)).collect();
        let affine_s = in_channels.iter().map(|&c| Linear::zeroed(config.w_dim, c, 0.0)).collect();
        let mut convs: Vec<Conv2d> = (0..config.layers)
            .map(|k| Conv2d::new(in_channels[k], config.channels, config.kernel, 1, 0, rng))
            .collect();
        let mut to_rgb = Conv2d::new(in_channels[config.layers], 3, 1, 1, 0, rng);
        to_rgb.bias = Tensor::filled(&[3], 0.5);
        // Channels that vanish at the patch rate are invisible to pretraining;
        // their input weights start at zero so they only come into play once
        // patch training learns to use them.
        let silent: Vec<usize> = (0..basis.channels())
            .filter(|&k| band_limit_gain(basis.magnitude(k), config.patch as f64) == 0.0)
            .collect();
        let first = convs.first_mut().unwrap_or(&mut to_rgb);
        let c_in = first.in_ch();
        for (i, w) in first.weight.data.iter_mut().enumerate() {
            if silent.contains(&(i % c_in)) {
                *w = 0.0;
            }
        }
        Ok(Self {
            config,
            basis,
            map_z,
            map_s,
            affine_z,
            affine_s,
            convs,
            to_rgb,
        })
    }

    pub fn patch(&self) -> u32 {
        self.config.patch
    }

    /// Reset the scale branch to contribute exactly zero.
    pub fn zero_scale_branch(&mut self) {
        for a in &mut self.affine_s {
            a.weight.data.iter_mut().for_each(|v| *v = 0.0);
            a.bias.data.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Whether a parameter name belongs to the scale-conditioning branch.
    pub fn is_scale_branch(name: &str) -> bool {
        name.starts_with("map_s.") || name.starts_with("affine_s.")
    }

    /// Conditioning value for scale `s` under this model's normalization.
    pub fn scale_bar(&self, s: f64) -> f64 {
        normalize_scale(s, self.config.patch as f64, self.config.scale_max as f64)
            .expect("validated at construction")
    }

    /// Output of the latent mapping network for a raw latent.
    pub fn map_latent(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_latent(z)?;
        Ok(self.map_z.forward(&normalize_latent(z)).pop().unwrap())
    }

    fn check_latent(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.config.z_dim {
            return Err(Error::invalid(format!(
                "latent has dimension {}, expected {}",
                z.len(),
                self.config.z_dim
            )));
        }
        Ok(())
    }

    fn modulation_with_acts(&self, z: &[f64], s_bar: f64) -> (ModulationParams, Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let z_acts = self.map_z.forward(&normalize_latent(z));
        let s_acts = self.map_s.forward(&[s_bar]);
        let w = z_acts.last().unwrap();
        let ws = s_acts.last().unwrap();
        let layers = self
            .affine_z
            .iter()
            .zip(&self.affine_s)
            .map(|(az, as_)| {
                let a = az.forward(w, 1);
                let b = as_.forward(ws, 1);
                a.iter().zip(&b).map(|(x, y)| x + y).collect()
            })
            .collect();
        (ModulationParams { layers }, z_acts, s_acts)
    }

    /// Per-layer modulation as the sum of the latent and scale branches.
    pub fn modulation_params(&self, z: &[f64], s_bar: f64) -> Result<ModulationParams> {
        self.check_latent(z)?;
        Ok(self.modulation_with_acts(z, s_bar).0)
    }

    /// Run the synthesis stack on an arbitrary coordinate grid sampled at
    /// `rate` pixels per unit. The output is smaller than the grid by the
    /// stack's margin on every side.
    pub fn synthesize_grid(
        &self,
        z: &[f64],
        s_bar: f64,
        rate: f64,
        grid: &CoordinateGrid,
    ) -> Result<(Image, GeneratorCache)> {
        self.check_latent(z)?;
        let margin = self.config.margin();
        if grid.height <= 2 * margin || grid.width <= 2 * margin {
            return Err(Error::invalid("grid smaller than the synthesis margin"));
        }
        let (modulation, z_acts, s_acts) = self.modulation_with_acts(z, s_bar);
        let mut x = fourier_embed_sampled(grid, &self.basis, rate);
        let mut inputs = Vec::with_capacity(self.convs.len() + 1);
        let mut caches = Vec::with_capacity(self.convs.len() + 1);
        for (k, conv) in self.convs.iter().enumerate() {
            let (mut y, cache) = conv.forward(&modulate(&x, &modulation.layers[k]));
            lrelu_forward(&mut y.data);
            inputs.push(std::mem::replace(&mut x, y));
            caches.push(cache);
        }
        let (rgb, cache) = self.to_rgb.forward(&modulate(&x, modulation.layers.last().unwrap()));
        inputs.push(x);
        caches.push(cache);
        let image = Image::from_feature_map(rgb)?;
        Ok((
            image,
            GeneratorCache {
                z_acts,
                s_acts,
                modulation,
                inputs,
                convs: caches,
            },
        ))
    }

    /// One `p x p` patch at `spec`, with its cache for backpropagation.
    pub fn forward_patch(&self, z: &[f64], spec: &PatchSpec) -> Result<(Image, GeneratorCache)> {
        if spec.patch != self.config.patch {
            return Err(Error::invalid(format!(
                "spec patch size {} differs from model patch size {}",
                spec.patch, self.config.patch
            )));
        }
        let grid = patch_grid_with_margin(spec, self.config.margin())?;
        self.synthesize_grid(z, self.scale_bar(spec.scale as f64), spec.scale as f64, &grid)
    }

    pub fn synthesize_patch(&self, z: &[f64], spec: &PatchSpec) -> Result<Image> {
        Ok(self.forward_patch(z, spec)?.0)
    }

    /// Full image at `res x res` assembled from `p x p` tiles at scale `res`.
    /// When `res` is not a multiple of p the last row and column of tiles
    /// are shifted inward and overlap their neighbours.
    pub fn synthesize_image(&self, z: &[f64], res: u32) -> Result<Image> {
        let p = self.config.patch;
        if res < p {
            return Err(Error::invalid(format!("resolution {res} is below patch size {p}")));
        }
        let mut offsets: Vec<u32> = (0..res / p).map(|i| i * p).collect();
        if res % p != 0 {
            offsets.push(res - p);
        }
        let mut out = Image::new(res as usize, res as usize);
        for &top in &offsets {
            for &left in &offsets {
                let spec = PatchSpec::from_pixel_offset(res, p, top, left)?;
                out.paste(&self.synthesize_patch(z, &spec)?, top as usize, left as usize);
            }
        }
        Ok(out)
    }

    /// Same image as [`Generator::synthesize_image`] computed in one pass.
    pub fn synthesize_image_monolithic(&self, z: &[f64], res: u32) -> Result<Image> {
        if res < self.config.patch {
            return Err(Error::invalid(format!(
                "resolution {res} is below patch size {}",
                self.config.patch
            )));
        }
        let spec = PatchSpec::new(res, [0.5, 0.5], res)?;
        let grid = patch_grid_with_margin(&spec, self.config.margin())?;
        Ok(self.synthesize_grid(z, self.scale_bar(res as f64), res as f64, &grid)?.0)
    }

    /// Accumulate parameter gradients for an output gradient `d_out`.
    pub fn backward(&self, cache: &GeneratorCache, d_out: &Image, grad: &mut Generator) {
        let n = self.convs.len();
        let mut dy = d_out.to_feature_map();
        let mut dm: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
        for k in (0..=n).rev() {
            let (conv, gconv) = if k == n {
                (&self.to_rgb, &mut grad.to_rgb)
            } else {
                lrelu_backward(&cache.inputs[k + 1].data, &mut dy.data);
                (&self.convs[k], &mut grad.convs[k])
            };
            conv.accumulate_grad(&cache.convs[k], &dy, gconv, true);
            let mut du = conv.backward_input(&cache.convs[k], &dy);
            let m = &cache.modulation.layers[k];
            let x = &cache.inputs[k];
            let mut dmk = vec![0.0; m.len()];
            for (dpx, xpx) in du.data.chunks_exact(m.len()).zip(x.data.chunks_exact(m.len())) {
                for c in 0..m.len() {
                    dmk[c] += dpx[c] * xpx[c];
                }
            }
            dm[k] = dmk;
            if k > 0 {
                for px in du.data.chunks_exact_mut(m.len()) {
                    for (v, s) in px.iter_mut().zip(m) {
                        *v *= s;
                    }
                }
                dy = du;
            }
        }
        let w = cache.z_acts.last().unwrap();
        let ws = cache.s_acts.last().unwrap();
        let mut dw = vec![0.0; w.len()];
        let mut dws = vec![0.0; ws.len()];
        for k in 0..=n {
            self.affine_z[k].accumulate_grad(w, &dm[k], 1, &mut grad.affine_z[k], true);
            self.affine_s[k].accumulate_grad(ws, &dm[k], 1, &mut grad.affine_s[k], true);
            for (a, b) in dw.iter_mut().zip(self.affine_z[k].backward_input(&dm[k], 1)) {
                *a += b;
            }
            for (a, b) in dws.iter_mut().zip(self.affine_s[k].backward_input(&dm[k], 1)) {
                *a += b;
            }
        }
        self.map_z.backward(&cache.z_acts, &dw, &mut grad.map_z);
        self.map_s.backward(&cache.s_acts, &dws, &mut grad.map_s);
    }
}

impl Params for Generator {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(&str, &'a Tensor)) {
        self.map_z.visit("map_z", f);
        self.map_s.visit("map_s", f);
        for (k, a) in self.affine_z.iter().enumerate() {
            a.visit(&format!("affine_z.{k}"), f);
        }
        for (k, a) in self.affine_s.iter().enumerate() {
            a.visit(&format!("affine_s.{k}"), f);
        }
        for (k, c) in self.convs.iter().enumerate() {
            c.visit(&format!("synth.{k}"), f);
        }
        self.to_rgb.visit("to_rgb", f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        self.map_z.visit_mut("map_z", f);
        self.map_s.visit_mut("map_s", f);
        for (k, a) in self.affine_z.iter_mut().enumerate() {
            a.visit_mut(&format!("affine_z.{k}"), f);
        }
        for (k, a) in self.affine_s.iter_mut().enumerate() {
            a.visit_mut(&format!("affine_s.{k}"), f);
        }
        for (k, c) in self.convs.iter_mut().enumerate() {
            c.visit_mut(&format!("synth.{k}"), f);
        }
        self.to_rgb.visit_mut("to_rgb", f);
    }
}
