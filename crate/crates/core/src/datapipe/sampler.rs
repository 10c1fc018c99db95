//! The patch sampling policy shared by real and generated patches.
//!
//! With probability `global_prob` a draw is the global view (`s = p`,
//! `v = (0.5, 0.5)`) of a record chosen uniformly from all records. Otherwise
//! an HR record is chosen, a random square of its short side is taken, the
//! square is downsampled to a uniform integer `s` in
//! `[max(s_lo, p), min(s_im, s_hi)]` and a random `p x p` window is cut out.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PatchSpec;
use crate::image::Image;

use super::dataset::Dataset;
use super::manifest::{Manifest, Split};

/// Which branch of the policy to draw from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    /// Global view with probability `global_prob`, patch otherwise.
    Mixed,
    Global,
    Patch,
}

/// Everything needed to replay one draw.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub record: usize,
    pub global: bool,
    pub square_top: u32,
    pub square_left: u32,
    pub square_size: u32,
    pub crop_top: u32,
    pub crop_left: u32,
    pub spec: PatchSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PatchBatchItem {
    pub pixels: Image,
    pub spec: PatchSpec,
    pub source_id: String,
    pub plan: SamplePlan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingPolicy {
    pub patch: u32,
    pub global_prob: f64,
    pub s_lo: u32,
    pub s_hi: Option<u32>,
    /// `(width, height)` of every record.
    sizes: Vec<(u32, u32)>,
    /// Records eligible for the patch branch.
    eligible: Vec<usize>,
}

impl SamplingPolicy {
    pub fn new(manifest: &Manifest, patch: u32, global_prob: f64, s_lo: u32, s_hi: Option<u32>) -> Result<Self> {
        let sizes = manifest
            .records
            .iter()
            .map(|r| (r.width, r.height, r.split))
            .collect::<Vec<_>>();
        Self::from_sizes(&sizes, patch, global_prob, s_lo, s_hi)
    }

    pub fn from_sizes(
        sizes: &[(u32, u32, Split)],
        patch: u32,
        global_prob: f64,
        s_lo: u32,
        s_hi: Option<u32>,
    ) -> Result<Self> {
        if patch == 0 {
            return Err(Error::invalid("patch size must be positive"));
        }
        if sizes.is_empty() {
            return Err(Error::EmptyDataset("policy needs at least one record".into()));
        }
        if !(0.0..=1.0).contains(&global_prob) {
            return Err(Error::invalid(format!("global probability {global_prob} outside [0, 1]")));
        }
        let s_lo = s_lo.max(patch);
        if let Some(hi) = s_hi {
            if hi < s_lo {
                return Err(Error::invalid(format!("s_hi {hi} below s_lo {s_lo}")));
            }
        }
        let eligible = sizes
            .iter()
            .enumerate()
            .filter(|(_, (w, h, split))| *split == Split::High && (*w).min(*h) >= s_lo)
            .map(|(i, _)| i)
            .collect();
        Ok(Self {
            patch,
            global_prob,
            s_lo,
            s_hi,
            sizes: sizes.iter().map(|&(w, h, _)| (w, h)).collect(),
            eligible,
        })
    }

    pub fn has_patch_branch(&self) -> bool {
        !self.eligible.is_empty()
    }

    pub fn eligible_records(&self) -> &[usize] {
        &self.eligible
    }

    fn scale_range(&self, record: usize) -> (u32, u32) {
        let (w, h) = self.sizes[record];
        let hi = match self.s_hi {
            Some(cap) => w.min(h).min(cap),
            None => w.min(h),
        };
        (self.s_lo, hi)
    }

    /// Largest scale the patch branch can produce (`p` when it is unavailable).
    pub fn max_scale(&self) -> u32 {
        self.eligible
            .iter()
            .map(|&i| self.scale_range(i).1)
            .max()
            .unwrap_or(self.patch)
    }

    /// Closed-form `E[s]` of [`Branch::Mixed`] draws.
    pub fn expected_scale(&self) -> f64 {
        let p = self.patch as f64;
        if self.eligible.is_empty() {
            return p;
        }
        let patch_mean = self
            .eligible
            .iter()
            .map(|&i| {
                let (lo, hi) = self.scale_range(i);
                (lo as f64 + hi as f64) / 2.0
            })
            .sum::<f64>()
            / self.eligible.len() as f64;
        self.global_prob * p + (1.0 - self.global_prob) * patch_mean
    }

    /// Draw a plan. The sequence of random draws is fixed so that a plan is a
    /// pure function of the generator state.
    pub fn draw<R: Rng + ?Sized>(&self, branch: Branch, rng: &mut R) -> Result<SamplePlan> {
        let global = match branch {
            Branch::Global => true,
            Branch::Patch => false,
            Branch::Mixed => rng.random::<f64>() < self.global_prob,
        };
        let record = if global {
            rng.random_range(0..self.sizes.len())
        } else {
            if self.eligible.is_empty() {
                return Err(Error::EmptyDataset(format!(
                    "no HR records with short side >= {} for patch sampling",
                    self.s_lo
                )));
            }
            self.eligible[rng.random_range(0..self.eligible.len())]
        };
        let (w, h) = self.sizes[record];
        let square = w.min(h);
        let offset = rng.random_range(0..=(w.max(h) - square));
        let (square_top, square_left) = if w >= h { (0, offset) } else { (offset, 0) };
        let p = self.patch;
        let (spec, crop_top, crop_left) = if global {
            (PatchSpec::global(p), 0, 0)
        } else {
            let (lo, hi) = self.scale_range(record);
            let s = rng.random_range(lo..=hi);
            let top = rng.random_range(0..=(s - p));
            let left = rng.random_range(0..=(s - p));
            (PatchSpec::from_pixel_offset(s, p, top, left)?, top, left)
        };
        Ok(SamplePlan {
            record,
            global,
            square_top,
            square_left,
            square_size: square,
            crop_top,
            crop_left,
            spec,
        })
    }
}

/// Draw one real patch with its `(s, v)` and provenance.
pub fn sample_real_patch<R: Rng + ?Sized>(
    dataset: &Dataset,
    policy: &SamplingPolicy,
    branch: Branch,
    rng: &mut R,
) -> Result<PatchBatchItem> {
    let plan = policy.draw(branch, rng)?;
    let pixels = dataset.extract(&plan)?;
    Ok(PatchBatchItem {
        pixels,
        spec: plan.spec,
        source_id: dataset.record(plan.record).id.clone(),
        plan,
    })
}

/// Draw the `(s, v)` of a generated patch from the same policy as real ones.
pub fn sample_fake_spec<R: Rng + ?Sized>(policy: &SamplingPolicy, rng: &mut R) -> Result<PatchSpec> {
    Ok(policy.draw(Branch::Mixed, rng)?.spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;

    fn single(size: u32, p: u32) -> SamplingPolicy {
        SamplingPolicy::from_sizes(&[(size, size, Split::High)], p, 0.5, p, None).unwrap()
    }

    #[test]
    fn global_fraction_and_mean_scale() {
        let policy = single(1024, 256);
        let stream = SeedStream::new(1);
        let mut globals = 0;
        let mut total = 0.0;
        let n = 10_000;
        for i in 0..n {
            let plan = policy.draw(Branch::Mixed, &mut stream.rng("t", 0, i)).unwrap();
            globals += plan.global as usize;
            total += plan.spec.scale as f64;
        }
        let frac = globals as f64 / n as f64;
        assert!((0.48..=0.52).contains(&frac), "{frac}");
        assert!((total / n as f64 - 448.0).abs() <= 10.0);
        assert_eq!(policy.expected_scale(), 448.0);
    }

    #[test]
    fn record_at_patch_size_forces_center() {
        let policy = single(64, 64);
        let stream = SeedStream::new(2);
        for i in 0..50 {
            let plan = policy.draw(Branch::Patch, &mut stream.rng("t", 0, i)).unwrap();
            assert_eq!(plan.spec.scale, 64);
            assert_eq!(plan.spec.center, [0.5, 0.5]);
        }
    }

    #[test]
    fn double_scale_centers_span_containment_range() {
        let p = 32;
        let policy = SamplingPolicy::from_sizes(&[(64, 64, Split::High)], p, 0.0, 64, Some(64)).unwrap();
        let stream = SeedStream::new(3);
        let (mut lo, mut hi) = (1.0f64, 0.0f64);
        for i in 0..2000 {
            let spec = sample_fake_spec(&policy, &mut stream.rng("t", 0, i)).unwrap();
            assert_eq!(spec.scale, 64);
            for c in spec.center {
                assert!((0.25..=0.75).contains(&c));
                lo = lo.min(c);
                hi = hi.max(c);
            }
        }
        assert_eq!((lo, hi), (0.25, 0.75));
    }

    #[test]
    fn patch_branch_requires_hr() {
        let policy = SamplingPolicy::from_sizes(&[(64, 64, Split::Low)], 32, 0.5, 32, None).unwrap();
        assert!(!policy.has_patch_branch());
        let stream = SeedStream::new(4);
        assert!(policy.draw(Branch::Patch, &mut stream.rng("t", 0, 0)).is_err());
        assert!(policy.draw(Branch::Global, &mut stream.rng("t", 0, 0)).is_ok());
        assert_eq!(policy.expected_scale(), 32.0);
    }

    #[test]
    fn scale_cap_is_respected() {
        let policy = SamplingPolicy::from_sizes(&[(500, 300, Split::High)], 64, 0.0, 64, Some(128)).unwrap();
        let stream = SeedStream::new(5);
        for i in 0..500 {
            let plan = policy.draw(Branch::Mixed, &mut stream.rng("t", 0, i)).unwrap();
            assert!((64..=128).contains(&plan.spec.scale));
            assert_eq!(plan.square_size, 300);
            assert_eq!(plan.square_top, 0);
            assert!(plan.square_left <= 200);
        }
        assert_eq!(policy.max_scale(), 128);
    }

    #[test]
    fn real_patches_replay_from_plan() {
        let img = Image::from_fn(90, 120, |y, x| [y as f64 / 90.0, x as f64 / 120.0, 0.5]);
        let ds = Dataset::from_images(vec![("a".into(), Split::High, img)]).unwrap();
        let policy = SamplingPolicy::new(ds.manifest(), 32, 0.5, 32, None).unwrap();
        let stream = SeedStream::new(6);
        for i in 0..20 {
            let item = sample_real_patch(&ds, &policy, Branch::Mixed, &mut stream.rng("t", 0, i)).unwrap();
            assert_eq!(item.pixels.height(), 32);
            item.spec.validate().unwrap();
            assert_eq!(ds.extract(&item.plan).unwrap(), item.pixels);
            assert_eq!(item.source_id, "a");
        }
    }
}
