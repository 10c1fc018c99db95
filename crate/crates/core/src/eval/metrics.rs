use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::embedder::Embedder;
use super::stats::{frechet_distance, FeatureAccumulator};
use crate::datapipe::{sample_real_patch, Branch, Dataset, SamplePlan, SamplingPolicy};
use crate::error::{Error, Result};
use crate::geometry::PatchSpec;
use crate::image::Image;
use crate::netcore::Generator;
use crate::resample::{crop, resample, square_crop};
use crate::rng::SeedStream;

/// Anything that can produce a `p x p` patch for a given `(s, v)`.
pub trait PatchSource {
    /// Patch for draw number `index`; sources draw their own randomness
    /// (latents, record choice) from `index`.
    fn patch(&self, spec: &PatchSpec, index: u64) -> Result<Image>;
}

/// Anything that can produce a full `res x res` image.
pub trait ImageSource {
    fn image(&self, res: u32, index: u64) -> Result<Image>;
}

/// Generator with a fresh latent per draw index.
pub struct GeneratorSource<'a> {
    pub generator: &'a Generator,
    pub stream: SeedStream,
}

impl<'a> GeneratorSource<'a> {
    pub fn new(generator: &'a Generator, seed: u64) -> Self {
        Self {
            generator,
            stream: SeedStream::new(seed).derive("latents"),
        }
    }

    pub fn latent(&self, index: u64) -> Vec<f64> {
        sample_latent(self.generator.config.z_dim, &mut self.stream.rng("z", 0, index))
    }
}

pub fn sample_latent<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

impl PatchSource for GeneratorSource<'_> {
    fn patch(&self, spec: &PatchSpec, index: u64) -> Result<Image> {
        self.generator.synthesize_patch(&self.latent(index), spec)
    }
}

impl ImageSource for GeneratorSource<'_> {
    fn image(&self, res: u32, index: u64) -> Result<Image> {
        self.generator.synthesize_image(&self.latent(index), res)
    }
}

/// Real patches cut at a requested `(s, v)` from a random record large
/// enough to support scale `s`.
pub struct RealPatchSource<'a> {
    pub dataset: &'a Dataset,
    pub stream: SeedStream,
}

impl<'a> RealPatchSource<'a> {
    pub fn new(dataset: &'a Dataset, seed: u64) -> Self {
        Self {
            dataset,
            stream: SeedStream::new(seed).derive("real-source"),
        }
    }
}

impl PatchSource for RealPatchSource<'_> {
    fn patch(&self, spec: &PatchSpec, index: u64) -> Result<Image> {
        let candidates: Vec<usize> = (0..self.dataset.len())
            .filter(|&i| self.dataset.record(i).short_side() >= spec.scale)
            .collect();
        if candidates.is_empty() {
            return Err(Error::EmptyDataset(format!("no record supports scale {}", spec.scale)));
        }
        let mut rng = self.stream.rng("patch", 0, index);
        let record = candidates[rng.random_range(0..candidates.len())];
        let r = self.dataset.record(record);
        let square = r.short_side();
        let offset = rng.random_range(0..=(r.width.max(r.height) - square));
        let (square_top, square_left) = if r.width >= r.height { (0, offset) } else { (offset, 0) };
        let (s, p) = (spec.scale as f64, spec.patch as f64);
        let crop_left = (spec.center[0] * s - p / 2.0).round() as u32;
        let crop_top = (spec.center[1] * s - p / 2.0).round() as u32;
        let plan = SamplePlan {
            record,
            global: spec.is_global(),
            square_top,
            square_left,
            square_size: square,
            crop_top,
            crop_left,
            spec: *spec,
        };
        self.dataset.extract(&plan)
    }
}

impl<F: Fn(&PatchSpec, u64) -> Result<Image>> PatchSource for F {
    fn patch(&self, spec: &PatchSpec, index: u64) -> Result<Image> {
        self(spec, index)
    }
}

/// A Frechet distance with the real-vs-real noise floor measured the same way.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: f64,
    /// Distance between the two halves of the real sample.
    pub baseline: f64,
    pub n: usize,
}

/// Options shared by the patch metrics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatchMetricOptions {
    pub n: usize,
    pub seed: u64,
    /// Downsampling factor applied to patches before embedding (ds-pFID);
    /// `1` embeds patches as they are.
    pub downsample: usize,
    pub branch: Branch,
}

impl PatchMetricOptions {
    pub fn pfid(n: usize, seed: u64) -> Self {
        Self {
            n,
            seed,
            downsample: 1,
            branch: Branch::Patch,
        }
    }

    pub fn ds_pfid(n: usize, seed: u64, factor: usize) -> Self {
        Self {
            downsample: factor.max(1),
            ..Self::pfid(n, seed)
        }
    }
}

fn prepare<R: Rng + ?Sized>(img: &Image, embedder: &Embedder, downsample: usize, rng: &mut R) -> Result<Image> {
    if downsample > 1 {
        let h = (img.height() / downsample).max(1);
        let w = (img.width() / downsample).max(1);
        return resample(img, h, w);
    }
    let e = embedder.input_size();
    if img.height() > e && img.width() > e {
        let top = rng.random_range(0..=img.height() - e);
        let left = rng.random_range(0..=img.width() - e);
        return crop(img, top, left, e, e);
    }
    Ok(img.clone())
}

struct SplitAccumulators {
    real: FeatureAccumulator,
    fake: FeatureAccumulator,
    first: FeatureAccumulator,
    second: FeatureAccumulator,
}

impl SplitAccumulators {
    fn new(dim: usize) -> Self {
        Self {
            real: FeatureAccumulator::new(dim),
            fake: FeatureAccumulator::new(dim),
            first: FeatureAccumulator::new(dim),
            second: FeatureAccumulator::new(dim),
        }
    }

    fn push(&mut self, i: usize, n: usize, real: &[f64], fake: &[f64]) -> Result<()> {
        self.real.push(real)?;
        self.fake.push(fake)?;
        if i < n / 2 {
            self.first.push(real)
        } else {
            self.second.push(real)
        }
    }

    fn finish(&self, n: usize) -> Result<MetricValue> {
        Ok(MetricValue {
            value: frechet_distance(&self.real.finish()?, &self.fake.finish()?)?,
            baseline: frechet_distance(&self.first.finish()?, &self.second.finish()?)?,
            n,
        })
    }
}

/// Patch FID: real patches at random `(s, v)` from the sampling policy
/// against patches from `source` at the same `(s, v)`.
pub fn patch_fid(
    dataset: &Dataset,
    policy: &SamplingPolicy,
    source: &dyn PatchSource,
    embedder: &Embedder,
    options: PatchMetricOptions,
) -> Result<MetricValue> {
    if options.n < 4 {
        return Err(Error::invalid("patch metrics need n >= 4 (two halves of at least 2)"));
    }
    let stream = SeedStream::new(options.seed).derive("pfid");
    let mut acc = SplitAccumulators::new(embedder.dim());
    for i in 0..options.n {
        let idx = i as u64;
        let real = sample_real_patch(dataset, policy, options.branch, &mut stream.rng("real", 0, idx))?;
        let fake = source.patch(&real.spec, idx)?;
        let r = prepare(&real.pixels, embedder, options.downsample, &mut stream.rng("crop-real", 0, idx))?;
        let f = prepare(&fake, embedder, options.downsample, &mut stream.rng("crop-fake", 0, idx))?;
        acc.push(i, options.n, &embedder.embed(&r)?, &embedder.embed(&f)?)?;
    }
    acc.finish(options.n)
}

/// Global view of a random record, square-cropped and resampled to `res`.
pub fn real_global_image<R: Rng + ?Sized>(dataset: &Dataset, res: u32, rng: &mut R) -> Result<Image> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset("no records".into()));
    }
    let img = dataset.image(rng.random_range(0..dataset.len()));
    let side = img.short_side();
    let offset = rng.random_range(0..=(img.height().max(img.width()) - side));
    let (top, left) = if img.width() >= img.height() { (0, offset) } else { (offset, 0) };
    let sq = square_crop(img, top, left, side)?;
    resample(&sq, res as usize, res as usize)
}

/// Global-image FID with both sides at `res x res`.
pub fn fid_at_res(
    dataset: &Dataset,
    source: &dyn ImageSource,
    res: u32,
    embedder: &Embedder,
    n: usize,
    seed: u64,
) -> Result<MetricValue> {
    if n < 4 {
        return Err(Error::invalid("FID needs n >= 4 (two halves of at least 2)"));
    }
    let stream = SeedStream::new(seed).derive("fid");
    let mut acc = SplitAccumulators::new(embedder.dim());
    for i in 0..n {
        let real = real_global_image(dataset, res, &mut stream.rng("real", 0, i as u64))?;
        let fake = source.image(res, i as u64)?;
        acc.push(i, n, &embedder.embed(&real)?, &embedder.embed(&fake)?)?;
    }
    acc.finish(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapipe::{CorpusConfig, Split};

    fn corpus() -> Dataset {
        let cfg = CorpusConfig {
            count: 12,
            min_size: 64,
            max_size: 128,
            non_square_fraction: 0.3,
            seed: 5,
            ..Default::default()
        };
        Dataset::from_images((0..12).map(|i| (format!("{i}"), Split::High, cfg.render(i))).collect()).unwrap()
    }

    #[test]
    fn real_copy_is_near_zero_and_gray_is_far() {
        let data = corpus();
        let policy = SamplingPolicy::new(data.manifest(), 32, 0.5, 32, None).unwrap();
        let emb = Embedder::standard(0);
        let copy = RealPatchSource::new(&data, 77);
        let same = patch_fid(&data, &policy, &copy, &emb, PatchMetricOptions::pfid(512, 1)).unwrap();
        let gray = |_: &PatchSpec, _: u64| Ok(Image::filled(32, 32, [0.5; 3]));
        let bad = patch_fid(&data, &policy, &gray, &emb, PatchMetricOptions::pfid(512, 1)).unwrap();
        assert!(same.value < 2.0 * same.baseline + 1e-3, "{same:?}");
        assert!(bad.value > 20.0 * same.baseline, "{bad:?} vs {same:?}");
        assert_eq!(same.baseline, bad.baseline);
    }

    #[test]
    fn downsampling_hides_blur() {
        let data = corpus();
        let policy = SamplingPolicy::new(data.manifest(), 32, 0.5, 32, None).unwrap();
        let emb = Embedder::standard(0);
        let copy = RealPatchSource::new(&data, 77);
        let blurred = |spec: &PatchSpec, i: u64| Ok(copy.patch(spec, i)?.gaussian_blur(1.5));
        let n = 256;
        let p0 = patch_fid(&data, &policy, &copy, &emb, PatchMetricOptions::pfid(n, 2)).unwrap();
        let p1 = patch_fid(&data, &policy, &blurred, &emb, PatchMetricOptions::pfid(n, 2)).unwrap();
        let d0 = patch_fid(&data, &policy, &copy, &emb, PatchMetricOptions::ds_pfid(n, 2, 2)).unwrap();
        let d1 = patch_fid(&data, &policy, &blurred, &emb, PatchMetricOptions::ds_pfid(n, 2, 2)).unwrap();
        assert!(p1.value - p0.value > d1.value - d0.value, "{p0:?} {p1:?} {d0:?} {d1:?}");
    }

    #[test]
    fn fid_real_vs_real_is_at_noise_floor() {
        let data = corpus();
        let emb = Embedder::standard(0);
        struct Real<'a>(&'a Dataset);
        impl ImageSource for Real<'_> {
            fn image(&self, res: u32, index: u64) -> Result<Image> {
                real_global_image(self.0, res, &mut SeedStream::new(9).rng("other", 0, index))
            }
        }
        let m = fid_at_res(&data, &Real(&data), 32, &emb, 256, 3).unwrap();
        assert!(m.value < 2.0 * m.baseline + 1e-3, "{m:?}");
        assert!(fid_at_res(&data, &Real(&data), 32, &emb, 3, 3).is_err());
    }
}
