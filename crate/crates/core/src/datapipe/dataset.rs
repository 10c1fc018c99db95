use crate::error::{Error, Result};
use crate::image::Image;
use crate::resample::{resample, resample_region, square_crop};

use super::manifest::{ImageRecord, Manifest, Split};
use super::sampler::SamplePlan;

/// A manifest with its images decoded in memory at native resolution.
#[derive(Clone, Debug)]
pub struct Dataset {
    manifest: Manifest,
    images: Vec<Image>,
}

impl Dataset {
    /// Decode every record of the manifest.
    pub fn load(manifest: Manifest) -> Result<Self> {
        if manifest.is_empty() {
            return Err(Error::EmptyDataset("manifest has no records".into()));
        }
        let images = manifest
            .records
            .iter()
            .map(|r| {
                let img = Image::load(&r.path)?;
                if img.width() as u32 != r.width || img.height() as u32 != r.height {
                    return Err(Error::invalid(format!(
                        "{} is {}x{} on disk but {}x{} in the manifest",
                        r.path,
                        img.width(),
                        img.height(),
                        r.width,
                        r.height
                    )));
                }
                Ok(img)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { manifest, images })
    }

    /// In-memory dataset; records get synthetic paths.
    pub fn from_images(items: Vec<(String, Split, Image)>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::EmptyDataset("no images given".into()));
        }
        let mut records = Vec::with_capacity(items.len());
        let mut images = Vec::with_capacity(items.len());
        for (id, split, img) in items {
            records.push(ImageRecord {
                path: format!("memory://{id}"),
                id,
                width: img.width() as u32,
                height: img.height() as u32,
                split,
            });
            images.push(img);
        }
        Ok(Self {
            manifest: Manifest::new(records),
            images,
        })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn image(&self, index: usize) -> &Image {
        &self.images[index]
    }

    pub fn record(&self, index: usize) -> &ImageRecord {
        &self.manifest.records[index]
    }

    /// Reproduce the pixels described by a sampling plan.
    pub fn extract(&self, plan: &SamplePlan) -> Result<Image> {
        let img = self
            .images
            .get(plan.record)
            .ok_or_else(|| Error::invalid(format!("record index {} out of range", plan.record)))?;
        let square = square_crop(
            img,
            plan.square_top as usize,
            plan.square_left as usize,
            plan.square_size as usize,
        )?;
        let p = plan.spec.patch as usize;
        if plan.global {
            resample(&square, p, p)
        } else {
            let s = plan.spec.scale as usize;
            resample_region(&square, s, s, plan.crop_top as usize, plan.crop_left as usize, p, p)
        }
    }
}
