use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    /// Radial frequency in cycles per image.
    pub frequency: f64,
    /// `log10` of the mean power at that radius.
    pub log_power: f64,
}

/// Power spectrum of the luminance (channel mean) of one square image,
/// normalized so a constant image `c` has DC power `c^2`.
fn power_2d(img: &Image, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let n = img.height();
    let fft = planner.plan_fft_forward(n);
    let mut buf: Vec<Complex<f64>> = img
        .data()
        .chunks_exact(3)
        .map(|px| Complex::new((px[0] + px[1] + px[2]) / 3.0, 0.0))
        .collect();
    for row in buf.chunks_exact_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); n];
    for x in 0..n {
        for y in 0..n {
            col[y] = buf[y * n + x];
        }
        fft.process(&mut col);
        for y in 0..n {
            buf[y * n + x] = col[y];
        }
    }
    let norm = 1.0 / (n * n) as f64;
    buf.iter().map(|c| (c * norm).norm_sqr()).collect()
}

/// Azimuthally averaged power spectrum over a set of equal-size square
/// images, for radii `0..=n/2`.
pub fn spectrum_profile(images: &[Image]) -> Result<Vec<SpectrumPoint>> {
    let first = images.first().ok_or_else(|| Error::invalid("no images"))?;
    let n = first.height();
    if images.iter().any(|im| im.height() != n || im.width() != n) {
        return Err(Error::invalid("spectrum needs square images of one size"));
    }
    let half = n / 2;
    let mut sums = vec![0.0; half + 1];
    let mut counts = vec![0usize; half + 1];
    let mut planner = FftPlanner::new();
    let signed = |k: usize| if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    for img in images {
        let power = power_2d(img, &mut planner);
        for y in 0..n {
            for x in 0..n {
                let r = signed(x).hypot(signed(y)).round() as usize;
                if r <= half {
                    sums[r] += power[y * n + x];
                    counts[r] += 1;
                }
            }
        }
    }
    Ok(sums
        .iter()
        .zip(&counts)
        .enumerate()
        .map(|(r, (s, &c))| SpectrumPoint {
            frequency: r as f64,
            log_power: (s / c as f64).max(1e-30).log10(),
        })
        .collect())
}

pub fn spectrum_csv(points: &[SpectrumPoint]) -> String {
    let mut out = String::from("frequency,log_power\n");
    for p in points {
        out.push_str(&format!("{},{}\n", p.frequency, p.log_power));
    }
    out
}

/// Line plot of one or more spectra on a shared axis (white background).
pub fn plot_spectra(curves: &[(&[SpectrumPoint], [f64; 3])], width: usize, height: usize) -> Image {
    let mut img = Image::filled(height, width, [1.0; 3]);
    let margin = 8;
    let finite = curves
        .iter()
        .flat_map(|(c, _)| c.iter())
        .filter(|p| p.log_power > -29.0)
        .collect::<Vec<_>>();
    if finite.is_empty() || width <= 2 * margin || height <= 2 * margin {
        return img;
    }
    let fmax = finite.iter().map(|p| p.frequency).fold(1.0f64, f64::max);
    let lo = finite.iter().map(|p| p.log_power).fold(f64::INFINITY, f64::min);
    let hi = finite.iter().map(|p| p.log_power).fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-9);
    let (pw, ph) = ((width - 2 * margin) as f64, (height - 2 * margin) as f64);
    let to_px = |p: &SpectrumPoint| {
        let x = margin as f64 + p.frequency / fmax * pw;
        let y = margin as f64 + (hi - p.log_power.max(lo)) / span * ph;
        (x, y)
    };
    for x in margin..width - margin {
        img.set(height - margin, x, [0.6; 3]);
    }
    for y in margin..=height - margin {
        img.set(y, margin, [0.6; 3]);
    }
    for (curve, color) in curves {
        for seg in curve.windows(2) {
            let (x0, y0) = to_px(&seg[0]);
            let (x1, y1) = to_px(&seg[1]);
            let steps = ((x1 - x0).abs().max((y1 - y0).abs()).ceil() as usize).max(1);
            for i in 0..=steps {
                let t = i as f64 / steps as f64;
                let x = (x0 + t * (x1 - x0)).round() as usize;
                let y = (y0 + t * (y1 - y0)).round() as usize;
                if x < width && y < height {
                    img.set(y, x, *color);
                }
            }
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn constant_has_only_dc() {
        let s = spectrum_profile(&[Image::filled(16, 16, [0.4; 3])]).unwrap();
        assert!((s[0].log_power - (0.16f64).log10()).abs() < 1e-12);
        assert!(s[1..].iter().all(|p| p.log_power < -20.0));
    }

    #[test]
    fn sinusoid_peaks_at_its_frequency() {
        let n = 32;
        let f = 5.0;
        let img = Image::from_fn(n, n, |_, x| [0.5 + 0.4 * (2.0 * PI * f * x as f64 / n as f64).sin(); 3]);
        let s = spectrum_profile(&[img]).unwrap();
        let peak = s[1..]
            .iter()
            .max_by(|a, b| a.log_power.total_cmp(&b.log_power))
            .unwrap();
        assert_eq!(peak.frequency, f);
    }

    #[test]
    fn white_noise_is_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let images: Vec<Image> = (0..64)
            .map(|_| Image::from_fn(32, 32, |_, _| [rng.random::<f64>(); 3]))
            .collect();
        let s = spectrum_profile(&images).unwrap();
        let body = &s[1..];
        let mean = body.iter().map(|p| p.log_power).sum::<f64>() / body.len() as f64;
        for p in body {
            assert!((p.log_power - mean).abs() < 0.1, "{p:?} vs {mean}");
        }
    }

    #[test]
    fn mixed_sizes_are_rejected() {
        assert!(spectrum_profile(&[Image::new(8, 8), Image::new(16, 16)]).is_err());
        assert!(spectrum_profile(&[Image::new(8, 6)]).is_err());
        assert!(spectrum_profile(&[]).is_err());
    }

    #[test]
    fn plot_has_curve_pixels() {
        let s = spectrum_profile(&[Image::from_fn(16, 16, |y, x| [((x + y) % 2) as f64; 3])]).unwrap();
        let img = plot_spectra(&[(&s, [1.0, 0.0, 0.0])], 120, 80);
        assert!(img.data().chunks_exact(3).any(|px| px == [1.0, 0.0, 0.0]));
    }
}
