//! RGB images with floating-point pixels.
//!
//! Values are nominally in `[0, 1]` but are only clamped when encoding to an
//! 8-bit file; intermediate results stay unclamped.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::FeatureMap;

pub const CHANNELS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize) -> Self {
        Self::filled(height, width, [0.0; 3])
    }

    pub fn filled(height: usize, width: usize, rgb: [f64; 3]) -> Self {
        assert!(height >= 1 && width >= 1, "image must be at least 1x1");
        let mut data = Vec::with_capacity(height * width * CHANNELS);
        for _ in 0..height * width {
            data.extend_from_slice(&rgb);
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if data.len() != height * width * CHANNELS {
            return Err(Error::invalid(format!(
                "pixel buffer has {} values, expected {}",
                data.len(),
                height * width * CHANNELS
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(height * width * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(y, x));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    /// Length of the short side.
    pub fn short_side(&self) -> usize {
        self.height.min(self.width)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> [f64; 3] {
        let i = (y * self.width + x) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, rgb: [f64; 3]) {
        let i = (y * self.width + x) * CHANNELS;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn max_abs_diff(&self, other: &Image) -> f64 {
        assert_eq!((self.height, self.width), (other.height, other.width));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn mean_abs_diff(&self, other: &Image) -> f64 {
        assert_eq!((self.height, self.width), (other.height, other.width));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / self.data.len() as f64
    }

    /// Copy `src` into this image with its top-left corner at `(top, left)`,
    /// dropping whatever falls outside.
    pub fn paste(&mut self, src: &Image, top: usize, left: usize) {
        let rows = src.height.min(self.height.saturating_sub(top));
        let cols = src.width.min(self.width.saturating_sub(left));
        for y in 0..rows {
            let d = ((top + y) * self.width + left) * CHANNELS;
            let s = y * src.width * CHANNELS;
            self.data[d..d + cols * CHANNELS].copy_from_slice(&src.data[s..s + cols * CHANNELS]);
        }
    }

    pub fn to_feature_map(&self) -> FeatureMap {
        FeatureMap::from_vec(self.height, self.width, CHANNELS, self.data.clone())
    }

    pub fn from_feature_map(map: FeatureMap) -> Result<Self> {
        if map.channels != CHANNELS {
            return Err(Error::invalid(format!("expected 3 channels, got {}", map.channels)));
        }
        Image::from_vec(map.height, map.width, map.data)
    }

    /// Separable Gaussian blur with reflect-free clamped borders.
    pub fn gaussian_blur(&self, sigma: f64) -> Image {
        if sigma <= 0.0 {
            return self.clone();
        }
        let radius = (3.0 * sigma).ceil() as isize;
        let kernel: Vec<f64> = (-radius..=radius)
            .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
            .collect();
        let norm: f64 = kernel.iter().sum();
        let kernel: Vec<f64> = kernel.iter().map(|k| k / norm).collect();
        let (h, w) = (self.height as isize, self.width as isize);
        let mut tmp = Image::new(self.height, self.width);
        for y in 0..h {
            for x in 0..w {
                let mut acc = [0.0; 3];
                for (k, wt) in kernel.iter().enumerate() {
                    let xx = (x + k as isize - radius).clamp(0, w - 1);
                    let p = self.get(y as usize, xx as usize);
                    for c in 0..3 {
                        acc[c] += wt * p[c];
                    }
                }
                tmp.set(y as usize, x as usize, acc);
            }
        }
        let mut out = Image::new(self.height, self.width);
        for y in 0..h {
            for x in 0..w {
                let mut acc = [0.0; 3];
                for (k, wt) in kernel.iter().enumerate() {
                    let yy = (y + k as isize - radius).clamp(0, h - 1);
                    let p = tmp.get(yy as usize, x as usize);
                    for c in 0..3 {
                        acc[c] += wt * p[c];
                    }
                }
                out.set(y as usize, x as usize, acc);
            }
        }
        out
    }

    /// 8-bit RGB with values clamped to `[0, 1]` and rounded.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    /// 8-bit RGBA (opaque), the layout browsers expect for `ImageData`.
    pub fn to_rgba8(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.height * self.width * 4);
        for px in self.data.chunks_exact(3) {
            out.extend(px.iter().map(|&v| quantize(v)));
            out.push(255);
        }
        out
    }

    pub fn from_rgb8(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        Image::from_vec(height, width, bytes.iter().map(|&b| b as f64 / 255.0).collect())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let buf = image::RgbImage::from_raw(self.width as u32, self.height as u32, self.to_rgb8())
            .expect("buffer size matches dimensions");
        buf.save_with_format(path.as_ref(), image::ImageFormat::Png)?;
        Ok(())
    }

    /// Decode a PNG or JPEG file into a floating-point image.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let decoded = image::load_from_memory(&bytes)?.to_rgb8();
        let (w, h) = decoded.dimensions();
        Image::from_rgb8(h as usize, w as usize, decoded.as_raw())
    }
}

#[inline]
fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// An image paired with a binary validity mask; masked-out pixels hold zero.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedImage {
    pub pixels: Image,
    pub mask: Vec<bool>,
}

impl MaskedImage {
    pub fn covered(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_is_lossless_on_8bit_values() {
        let img = Image::from_fn(5, 7, |y, x| [(y * 30) as f64 / 255.0, (x * 20) as f64 / 255.0, 1.0]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        img.save_png(&path).unwrap();
        let back = Image::load(&path).unwrap();
        assert!(img.max_abs_diff(&back) < 1e-12);
    }

    #[test]
    fn quantization_clamps() {
        let img = Image::filled(1, 1, [-0.5, 0.5, 1.7]);
        assert_eq!(img.to_rgb8(), vec![0, 128, 255]);
    }

    #[test]
    fn blur_preserves_constants() {
        let img = Image::filled(9, 9, [0.3, 0.6, 0.9]);
        assert!(img.gaussian_blur(1.5).max_abs_diff(&img) < 1e-12);
    }
}
