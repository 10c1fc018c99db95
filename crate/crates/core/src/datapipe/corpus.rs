//! Procedural multi-resolution images: a color gradient background, a large
//! disk filled with a fine checker texture, and a small solid disk. The
//! checker period is set in native pixels, so high-resolution images carry
//! detail that disappears once they are downsampled to the patch size.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::SeedStream;

const PERIOD_LO: f64 = 3.0;
const PERIOD_HI: f64 = 6.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub background: [[f64; 3]; 2],
    /// Gradient direction, radians.
    pub gradient_angle: f64,
    pub disk_center: [f64; 2],
    pub disk_radius: f64,
    pub checker_colors: [[f64; 3]; 2],
    /// Checker period in normalized units.
    pub checker_period: f64,
    pub dot_center: [f64; 2],
    pub dot_radius: f64,
    pub dot_color: [f64; 3],
}

impl Scene {
    /// Random scene whose checker period spans 3 to 6 pixels at `native_size`.
    pub fn random<R: Rng + ?Sized>(native_size: u32, rng: &mut R) -> Self {
        let mut color = |lo: f64, hi: f64| -> [f64; 3] { [0, 1, 2].map(|_| rng.random_range(lo..hi)) };
        let background = [color(0.1, 0.9), color(0.1, 0.9)];
        let checker_colors = [color(0.0, 0.45), color(0.55, 1.0)];
        let dot_color = color(0.0, 1.0);
        let period_px = rng.random_range(PERIOD_LO..PERIOD_HI);
        Self {
            background,
            gradient_angle: rng.random_range(0.0..std::f64::consts::TAU),
            disk_center: [rng.random_range(0.3..0.7), rng.random_range(0.3..0.7)],
            disk_radius: rng.random_range(0.15..0.3),
            checker_colors,
            checker_period: period_px / native_size as f64,
            dot_center: [rng.random_range(0.1..0.9), rng.random_range(0.1..0.9)],
            dot_radius: rng.random_range(0.04..0.1),
            dot_color,
        }
    }

    /// Color at normalized point `(x, y)` of the unit square.
    pub fn color_at(&self, x: f64, y: f64) -> [f64; 3] {
        let dx = x - self.dot_center[0];
        let dy = y - self.dot_center[1];
        if dx * dx + dy * dy <= self.dot_radius * self.dot_radius {
            return self.dot_color;
        }
        let dx = x - self.disk_center[0];
        let dy = y - self.disk_center[1];
        if dx * dx + dy * dy <= self.disk_radius * self.disk_radius {
            let cx = (x / self.checker_period).floor() as i64;
            let cy = (y / self.checker_period).floor() as i64;
            return self.checker_colors[(cx + cy).rem_euclid(2) as usize];
        }
        let (s, c) = self.gradient_angle.sin_cos();
        let t = ((x - 0.5) * c + (y - 0.5) * s + 0.5).clamp(0.0, 1.0);
        let [a, b] = self.background;
        [0, 1, 2].map(|k| a[k] * (1.0 - t) + b[k] * t)
    }
}

/// Render a scene at `width x height` with 3x3 supersampling per pixel.
/// Non-square outputs map the scene's unit square onto the short side.
pub fn render_scene(scene: &Scene, width: usize, height: usize) -> Image {
    const SS: usize = 3;
    let side = width.min(height) as f64;
    let ox = (width as f64 - side) / 2.0;
    let oy = (height as f64 - side) / 2.0;
    Image::from_fn(height, width, |py, px| {
        let mut acc = [0.0; 3];
        for sy in 0..SS {
            for sx in 0..SS {
                let x = (px as f64 + (sx as f64 + 0.5) / SS as f64 - ox) / side;
                let y = (py as f64 + (sy as f64 + 0.5) / SS as f64 - oy) / side;
                let c = scene.color_at(x, y);
                for k in 0..3 {
                    acc[k] += c[k];
                }
            }
        }
        acc.map(|v| v / (SS * SS) as f64)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub count: usize,
    pub min_size: u32,
    pub max_size: u32,
    /// Fraction of images that are made non-square (long side scaled by up to 4/3).
    pub non_square_fraction: f64,
    pub seed: u64,
    /// When non-empty, short sides are drawn from this list instead of the range.
    #[serde(default)]
    pub sizes: Vec<u32>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            count: 64,
            min_size: 64,
            max_size: 256,
            non_square_fraction: 0.0,
            seed: 0,
            sizes: Vec::new(),
        }
    }
}

impl CorpusConfig {
    /// Size and scene of image `index`.
    pub fn item(&self, index: usize) -> (u32, u32, Scene) {
        let mut rng = SeedStream::new(self.seed).rng("corpus", 0, index as u64);
        let short = if self.sizes.is_empty() {
            rng.random_range(self.min_size..=self.max_size)
        } else {
            self.sizes[rng.random_range(0..self.sizes.len())]
        };
        let long = if rng.random::<f64>() < self.non_square_fraction {
            (short as f64 * rng.random_range(1.0..4.0 / 3.0)).round() as u32
        } else {
            short
        };
        let landscape = rng.random::<bool>();
        let scene = Scene::random(short, &mut rng);
        if landscape {
            (long, short, scene)
        } else {
            (short, long, scene)
        }
    }

    pub fn render(&self, index: usize) -> Image {
        let (w, h, scene) = self.item(index);
        render_scene(&scene, w as usize, h as usize)
    }
}

/// Write `count` PNG images named `img_NNNN.png` into `dir`.
pub fn write_corpus(dir: impl AsRef<Path>, config: &CorpusConfig) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    if config.min_size == 0 || config.min_size > config.max_size || config.sizes.contains(&0) {
        return Err(Error::invalid(format!(
            "invalid size range {}..={}",
            config.min_size, config.max_size
        )));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    (0..config.count)
        .map(|i| {
            let path = dir.join(format!("img_{i:04}.png"));
            config.render(i).save_png(&path)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_deterministic_and_sized() {
        let cfg = CorpusConfig {
            count: 4,
            min_size: 20,
            max_size: 40,
            non_square_fraction: 0.5,
            seed: 9,
            sizes: Vec::new(),
        };
        for i in 0..4 {
            let (w, h, _) = cfg.item(i);
            assert!(w.min(h) >= 20 && w.min(h) <= 40);
            let img = cfg.render(i);
            assert_eq!((img.width() as u32, img.height() as u32), (w, h));
            assert_eq!(img, cfg.render(i));
        }
    }

    #[test]
    fn writes_pngs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = CorpusConfig {
            count: 3,
            min_size: 16,
            max_size: 24,
            ..Default::default()
        };
        let paths = write_corpus(dir.path(), &cfg).unwrap();
        assert_eq!(paths.len(), 3);
        assert!(paths.iter().all(|p| p.exists()));
    }
}
