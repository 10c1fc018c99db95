//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Three views: a generated patch for any `(s, v)` next to the full image
//! it belongs to, the warp of a patch back into the base frame with its mask,
//! and histograms of the training patch sampler.

use anyres::datapipe::{Branch, SamplingPolicy, Split};
use anyres::eval::GeneratorSource;
use anyres::netcore::{Checkpoint, Generator, GeneratorConfig};
use anyres::resample::warp_to_base;
use anyres::{Image, PatchSpec, SeedStream};
use rand::SeedableRng;
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// A generator held by the page, either freshly initialized or loaded from a
/// checkpoint written by the command-line tool.
#[wasm_bindgen]
pub struct Demo {
    generator: Generator,
}

#[wasm_bindgen]
impl Demo {
    /// Untrained generator with a small default architecture.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64) -> Result<Demo, JsError> {
        let config = GeneratorConfig {
            patch: 64,
            z_dim: 32,
            w_dim: 32,
            fourier_channels: 48,
            bandwidth: 128.0,
            layers: 3,
            channels: 32,
            ..GeneratorConfig::default()
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Ok(Demo {
            generator: Generator::new(config, &mut rng).map_err(js_err)?,
        })
    }

    /// Generator `G` of a checkpoint file's bytes.
    #[wasm_bindgen(js_name = fromCheckpoint)]
    pub fn from_checkpoint(bytes: &[u8]) -> Result<Demo, JsError> {
        let ck = Checkpoint::from_bytes(bytes).map_err(js_err)?;
        Ok(Demo {
            generator: ck.generator("G").map_err(js_err)?,
        })
    }

    #[wasm_bindgen(getter)]
    pub fn patch(&self) -> u32 {
        self.generator.patch()
    }

    #[wasm_bindgen(getter, js_name = scaleMax)]
    pub fn scale_max(&self) -> u32 {
        self.generator.config.scale_max
    }

    /// `p x p` RGBA patch at scale `s` and center `(vx, vy)`.
    pub fn sample(&self, seed: u64, scale: u32, vx: f64, vy: f64) -> Result<Vec<u8>, JsError> {
        Ok(sample_patch(&self.generator, seed, scale, [vx, vy]).map_err(js_err)?.to_rgba8())
    }

    /// Full `res x res` RGBA image, assembled from tiles.
    pub fn render(&self, seed: u64, res: u32) -> Result<Vec<u8>, JsError> {
        let z = GeneratorSource::new(&self.generator, seed).latent(0);
        Ok(self.generator.synthesize_image(&z, res).map_err(js_err)?.to_rgba8())
    }

    /// The patch at `(s, v)` projected into the `p x p` base frame; masked
    /// pixels are drawn as a checkerboard.
    pub fn warp(&self, seed: u64, scale: u32, vx: f64, vy: f64) -> Result<Vec<u8>, JsError> {
        Ok(warped_view(&self.generator, seed, scale, [vx, vy]).map_err(js_err)?.to_rgba8())
    }
}

pub fn sample_patch(g: &Generator, seed: u64, scale: u32, center: [f64; 2]) -> anyres::error::Result<Image> {
    let spec = PatchSpec::new(scale, center, g.patch())?;
    let z = GeneratorSource::new(g, seed).latent(0);
    g.synthesize_patch(&z, &spec)
}

pub fn warped_view(g: &Generator, seed: u64, scale: u32, center: [f64; 2]) -> anyres::error::Result<Image> {
    let spec = PatchSpec::new(scale, center, g.patch())?;
    let patch = sample_patch(g, seed, scale, center)?;
    let warped = warp_to_base(&patch, &spec)?;
    let p = g.patch() as usize;
    Ok(Image::from_fn(p, p, |y, x| {
        if warped.mask[y * p + x] {
            warped.pixels.get(y, x)
        } else if (x / 4 + y / 4) % 2 == 0 {
            [0.8; 3]
        } else {
            [0.6; 3]
        }
    }))
}

/// Summary of `n` draws from the patch sampler.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplerStats {
    pub global_fraction: f64,
    /// Counts of `s` in `bins` equal-width bins over `[p, max_scale]`.
    pub scale_hist: Vec<u32>,
    /// Counts of `v_x` in `bins` equal-width bins over `[0, 1]`.
    pub center_hist: Vec<u32>,
}

pub fn sampler_stats(sizes: &[u32], patch: u32, n: usize, bins: usize, seed: u64) -> anyres::error::Result<SamplerStats> {
    let records: Vec<(u32, u32, Split)> = sizes
        .iter()
        .map(|&s| (s, s, if s > patch { Split::High } else { Split::Low }))
        .collect();
    let policy = SamplingPolicy::from_sizes(&records, patch, 0.5, patch, None)?;
    let hi = policy.max_scale().max(patch + 1) as f64;
    let bin = |x: f64, lo: f64, hi: f64| (((x - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1);
    let stream = SeedStream::new(seed);
    let mut stats = SamplerStats {
        global_fraction: 0.0,
        scale_hist: vec![0; bins],
        center_hist: vec![0; bins],
    };
    let mut globals = 0usize;
    for i in 0..n {
        let plan = policy.draw(Branch::Mixed, &mut stream.rng("demo", 0, i as u64))?;
        globals += plan.global as usize;
        stats.scale_hist[bin(plan.spec.scale as f64, patch as f64, hi)] += 1;
        stats.center_hist[bin(plan.spec.center[0], 0.0, 1.0)] += 1;
    }
    stats.global_fraction = globals as f64 / n.max(1) as f64;
    Ok(stats)
}

/// Sampler histograms for square images of the given short sides, returned
/// flat as `[global_fraction, scale bins..., center bins...]`.
#[wasm_bindgen(js_name = samplerStats)]
pub fn sampler_stats_js(sizes: &[u32], patch: u32, n: u32, bins: u32, seed: u64) -> Result<Vec<f64>, JsError> {
    if bins == 0 {
        return Err(JsError::new("bins must be positive"));
    }
    let s = sampler_stats(sizes, patch, n as usize, bins as usize, seed).map_err(js_err)?;
    let mut out = vec![s.global_fraction];
    out.extend(s.scale_hist.iter().map(|&c| c as f64));
    out.extend(s.center_hist.iter().map(|&c| c as f64));
    Ok(out)
}
