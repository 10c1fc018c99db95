//! Band-limited resampling: the Lanczos kernel, separable resizing, square
//! crops, and the patch-to-base-frame warp used by the teacher loss.
//!
//! All resampling is expressed through [`AxisWeights`], a sparse 1-D weight
//! table. Taps falling outside the source are clamped to the nearest edge
//! sample and every output's weights are renormalized to sum to one.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::PatchSpec;
use crate::image::{Image, MaskedImage, CHANNELS};

/// Lanczos window half-width used throughout.
pub const LANCZOS_A: usize = 3;

const COVER_TOL: f64 = 1e-9;

#[inline]
fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// `sinc(x) sinc(x/a)` on `|x| < a`, zero elsewhere. Exactly zero at nonzero
/// integers so that integer-aligned resampling is an exact copy.
pub fn lanczos_kernel(x: f64, a: usize) -> f64 {
    let a = a.max(1) as f64;
    if x == 0.0 {
        return 1.0;
    }
    if x.abs() >= a || x.fract() == 0.0 {
        return 0.0;
    }
    sinc(x) * sinc(x / a)
}

/// Sparse one-dimensional resampling matrix: `taps[o]` lists `(source index,
/// weight)` pairs for output `o`.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisWeights {
    pub in_len: usize,
    pub taps: Vec<Vec<(usize, f64)>>,
}

impl AxisWeights {
    /// Weights for outputs whose centers sit at the given continuous source
    /// positions (source sample `k` is centered at `k`). `stretch >= 1` widens
    /// the kernel for anti-aliased downsampling.
    pub fn from_positions(in_len: usize, positions: &[f64], stretch: f64, a: usize) -> Self {
        assert!(in_len >= 1);
        let stretch = stretch.max(1.0);
        let reach = a as f64 * stretch;
        let last = in_len as isize - 1;
        let taps = positions
            .iter()
            .map(|&u| {
                let lo = (u - reach).floor() as isize;
                let hi = (u + reach).ceil() as isize;
                let mut row: Vec<(usize, f64)> = Vec::with_capacity((hi - lo + 1) as usize);
                let mut total = 0.0;
                for k in lo..=hi {
                    let w = lanczos_kernel((k as f64 - u) / stretch, a);
                    if w == 0.0 {
                        continue;
                    }
                    total += w;
                    let idx = k.clamp(0, last) as usize;
                    match row.iter_mut().find(|(i, _)| *i == idx) {
                        Some(entry) => entry.1 += w,
                        None => row.push((idx, w)),
                    }
                }
                if total == 0.0 {
                    // Degenerate only when the window misses every sample.
                    let idx = u.round().clamp(0.0, last as f64) as usize;
                    return vec![(idx, 1.0)];
                }
                row.iter_mut().for_each(|(_, w)| *w /= total);
                row
            })
            .collect();
        Self { in_len, taps }
    }

    /// Pixel-center aligned resize of `in_len` samples to `out_len`.
    pub fn resize(in_len: usize, out_len: usize, a: usize) -> Self {
        let ratio = in_len as f64 / out_len as f64;
        let positions: Vec<f64> = (0..out_len).map(|o| (o as f64 + 0.5) * ratio - 0.5).collect();
        Self::from_positions(in_len, &positions, ratio, a)
    }

    pub fn out_len(&self) -> usize {
        self.taps.len()
    }
}

/// Apply horizontal weights to every row: `h x in_w -> h x out_w`.
fn apply_rows(src: &[f64], h: usize, in_w: usize, wx: &AxisWeights) -> Vec<f64> {
    debug_assert_eq!(wx.in_len, in_w);
    let out_w = wx.out_len();
    let mut out = vec![0.0; h * out_w * CHANNELS];
    for y in 0..h {
        let row = &src[y * in_w * CHANNELS..(y + 1) * in_w * CHANNELS];
        let dst = &mut out[y * out_w * CHANNELS..(y + 1) * out_w * CHANNELS];
        for (o, taps) in wx.taps.iter().enumerate() {
            let mut acc = [0.0; CHANNELS];
            for &(k, w) in taps {
                for c in 0..CHANNELS {
                    acc[c] += w * row[k * CHANNELS + c];
                }
            }
            dst[o * CHANNELS..o * CHANNELS + CHANNELS].copy_from_slice(&acc);
        }
    }
    out
}

/// Apply vertical weights: `in_h x w -> out_h x w`.
fn apply_cols(src: &[f64], in_h: usize, w: usize, wy: &AxisWeights) -> Vec<f64> {
    debug_assert_eq!(wy.in_len, in_h);
    let out_h = wy.out_len();
    let stride = w * CHANNELS;
    let mut out = vec![0.0; out_h * stride];
    for (o, taps) in wy.taps.iter().enumerate() {
        let dst = &mut out[o * stride..(o + 1) * stride];
        for &(k, wt) in taps {
            let row = &src[k * stride..(k + 1) * stride];
            for (d, s) in dst.iter_mut().zip(row) {
                *d += wt * s;
            }
        }
    }
    out
}

/// Separable resampling with explicit per-axis weights.
pub fn resample_with(img: &Image, wy: &AxisWeights, wx: &AxisWeights) -> Image {
    let tmp = apply_rows(img.data(), img.height(), img.width(), wx);
    let out = apply_cols(&tmp, img.height(), wx.out_len(), wy);
    Image::from_vec(wy.out_len(), wx.out_len(), out).expect("resample output shape")
}

/// Lanczos resize to `out_h x out_w`.
pub fn resample(img: &Image, out_h: usize, out_w: usize) -> Result<Image> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::invalid(format!("target size {out_h}x{out_w} must be positive")));
    }
    let wy = AxisWeights::resize(img.height(), out_h, LANCZOS_A);
    let wx = AxisWeights::resize(img.width(), out_w, LANCZOS_A);
    Ok(resample_with(img, &wy, &wx))
}

/// The `h x w` window at `(top, left)` of `img` resized to `full_h x full_w`,
/// without materializing the whole resized image. Identical to resizing and
/// then cropping, since each output's weights depend only on its position.
pub fn resample_region(
    img: &Image,
    full_h: usize,
    full_w: usize,
    top: usize,
    left: usize,
    h: usize,
    w: usize,
) -> Result<Image> {
    if h == 0 || w == 0 || top + h > full_h || left + w > full_w {
        return Err(Error::invalid(format!(
            "window {h}x{w} at ({top}, {left}) outside a {full_h}x{full_w} target"
        )));
    }
    let window = |in_len: usize, full: usize, start: usize, len: usize| {
        let ratio = in_len as f64 / full as f64;
        let positions: Vec<f64> = (start..start + len)
            .map(|o| (o as f64 + 0.5) * ratio - 0.5)
            .collect();
        AxisWeights::from_positions(in_len, &positions, ratio, LANCZOS_A)
    };
    let wy = window(img.height(), full_h, top, h);
    let wx = window(img.width(), full_w, left, w);
    Ok(resample_with(img, &wy, &wx))
}

/// Exact copy of the `size x size` window at `(top, left)`.
pub fn square_crop(img: &Image, top: usize, left: usize, size: usize) -> Result<Image> {
    crop(img, top, left, size, size)
}

pub fn crop(img: &Image, top: usize, left: usize, height: usize, width: usize) -> Result<Image> {
    if height == 0 || width == 0 || top + height > img.height() || left + width > img.width() {
        return Err(Error::invalid(format!(
            "crop {height}x{width} at ({top}, {left}) does not fit a {}x{} image",
            img.height(),
            img.width()
        )));
    }
    let mut data = Vec::with_capacity(height * width * CHANNELS);
    for y in top..top + height {
        let start = (y * img.width() + left) * CHANNELS;
        data.extend_from_slice(&img.data()[start..start + width * CHANNELS]);
    }
    Image::from_vec(height, width, data)
}

/// The fixed linear map that projects a generated `p x p` patch into the
/// `p x p` frame of the global base image.
///
/// The patch covers `[v - p/(2s), v + p/(2s)]^2`; it is Lanczos-downsampled by
/// `s/p` and written to the base pixels whose centers fall inside that extent.
/// All other base pixels are masked out.
#[derive(Clone, Debug)]
pub struct BaseWarp {
    patch: usize,
    rows: AxisWeights,
    cols: AxisWeights,
    /// Covered base rows / columns as half-open ranges.
    row_range: (usize, usize),
    col_range: (usize, usize),
}

impl BaseWarp {
    pub fn new(spec: &PatchSpec) -> Result<Self> {
        spec.validate()?;
        let p = spec.patch as usize;
        let s = spec.scale as f64;
        let ratio = s / p as f64;
        let axis = |v: f64| -> (AxisWeights, (usize, usize)) {
            // Offset of the patch's left edge in s-resolution pixels.
            let origin = v * s - p as f64 / 2.0;
            let positions: Vec<f64> = (0..p)
                .map(|i| (i as f64 + 0.5) * ratio - origin - 0.5)
                .collect();
            let covered: Vec<usize> = positions
                .iter()
                .enumerate()
                .filter(|(_, &u)| u >= -0.5 - COVER_TOL && u < p as f64 - 0.5 - COVER_TOL)
                .map(|(i, _)| i)
                .collect();
            let range = match (covered.first(), covered.last()) {
                (Some(&a), Some(&b)) => (a, b + 1),
                _ => (0, 0),
            };
            let inside = &positions[range.0..range.1];
            (AxisWeights::from_positions(p, inside, ratio, LANCZOS_A), range)
        };
        let (cols, col_range) = axis(spec.center[0]);
        let (rows, row_range) = axis(spec.center[1]);
        Ok(Self {
            patch: p,
            rows,
            cols,
            row_range,
            col_range,
        })
    }

    pub fn mask(&self) -> Vec<bool> {
        let p = self.patch;
        let mut mask = vec![false; p * p];
        for y in self.row_range.0..self.row_range.1 {
            for x in self.col_range.0..self.col_range.1 {
                mask[y * p + x] = true;
            }
        }
        mask
    }

    /// Number of covered base pixels.
    pub fn covered(&self) -> usize {
        (self.row_range.1 - self.row_range.0) * (self.col_range.1 - self.col_range.0)
    }

    pub fn apply(&self, patch: &Image) -> Result<MaskedImage> {
        let p = self.patch;
        if patch.height() != p || patch.width() != p {
            return Err(Error::invalid(format!(
                "warp expects a {p}x{p} patch, got {}x{}",
                patch.height(),
                patch.width()
            )));
        }
        let mut canvas = Image::new(p, p);
        if self.covered() > 0 {
            let block = resample_with(patch, &self.rows, &self.cols);
            canvas.paste(&block, self.row_range.0, self.col_range.0);
        }
        Ok(MaskedImage {
            pixels: canvas,
            mask: self.mask(),
        })
    }

    /// Transpose of [`BaseWarp::apply`]: pulls a gradient on the base canvas
    /// back onto the patch. Gradient on masked-out pixels is ignored.
    pub fn adjoint(&self, grad: &Image) -> Image {
        let p = self.patch;
        let mut out = vec![0.0; p * p * CHANNELS];
        if self.covered() == 0 {
            return Image::from_vec(p, p, out).unwrap();
        }
        let (r0, r1) = self.row_range;
        let (c0, c1) = self.col_range;
        let bw = c1 - c0;
        // Vertical transpose: block rows -> patch rows (restricted to covered columns).
        let mut tmp = vec![0.0; p * bw * CHANNELS];
        for (o, taps) in self.rows.taps.iter().enumerate() {
            let gy = r0 + o;
            let src = &grad.data()[(gy * p + c0) * CHANNELS..(gy * p + c1) * CHANNELS];
            for &(k, w) in taps {
                let dst = &mut tmp[k * bw * CHANNELS..(k + 1) * bw * CHANNELS];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
        // Horizontal transpose.
        for y in 0..p {
            let row = &tmp[y * bw * CHANNELS..(y + 1) * bw * CHANNELS];
            let dst = &mut out[y * p * CHANNELS..(y + 1) * p * CHANNELS];
            for (o, taps) in self.cols.taps.iter().enumerate() {
                for &(k, w) in taps {
                    for c in 0..CHANNELS {
                        dst[k * CHANNELS + c] += w * row[o * CHANNELS + c];
                    }
                }
            }
        }
        debug_assert!(r1 <= p);
        Image::from_vec(p, p, out).unwrap()
    }
}

/// Project a generated patch into the base image frame with its validity mask.
pub fn warp_to_base(patch: &Image, spec: &PatchSpec) -> Result<MaskedImage> {
    BaseWarp::new(spec)?.apply(patch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Image {
        Image::from_fn(h, w, |_, _| [rng.random(), rng.random(), rng.random()])
    }

    /// Naive 2-D evaluation of the same filter, straight from the kernel
    /// definition, with clamp-to-edge indexing.
    fn direct_resample(img: &Image, out_h: usize, out_w: usize) -> Image {
        let a = LANCZOS_A as f64;
        let (in_h, in_w) = (img.height(), img.width());
        let ry = in_h as f64 / out_h as f64;
        let rx = in_w as f64 / out_w as f64;
        let (fy, fx) = (ry.max(1.0), rx.max(1.0));
        Image::from_fn(out_h, out_w, |oy, ox| {
            let cy = (oy as f64 + 0.5) * ry - 0.5;
            let cx = (ox as f64 + 0.5) * rx - 0.5;
            let mut acc = [0.0; 3];
            let mut total = 0.0;
            let ylo = (cy - a * fy).floor() as isize;
            let yhi = (cy + a * fy).ceil() as isize;
            let xlo = (cx - a * fx).floor() as isize;
            let xhi = (cx + a * fx).ceil() as isize;
            for ky in ylo..=yhi {
                let wy = lanczos_kernel((ky as f64 - cy) / fy, LANCZOS_A);
                for kx in xlo..=xhi {
                    let w = wy * lanczos_kernel((kx as f64 - cx) / fx, LANCZOS_A);
                    let px = img.get(
                        ky.clamp(0, in_h as isize - 1) as usize,
                        kx.clamp(0, in_w as isize - 1) as usize,
                    );
                    for c in 0..3 {
                        acc[c] += w * px[c];
                    }
                    total += w;
                }
            }
            [acc[0] / total, acc[1] / total, acc[2] / total]
        })
    }

    #[test]
    fn kernel_values() {
        assert_eq!(lanczos_kernel(0.0, 3), 1.0);
        assert_eq!(lanczos_kernel(1.0, 3), 0.0);
        assert_eq!(lanczos_kernel(3.0, 3), 0.0);
        assert_eq!(lanczos_kernel(-2.0, 3), 0.0);
        assert_eq!(lanczos_kernel(3.5, 3), 0.0);
        assert!(lanczos_kernel(0.5, 3) > 0.6);
        assert!(lanczos_kernel(1.5, 3) < 0.0);
    }

    #[test]
    fn constant_is_preserved() {
        let img = Image::filled(128, 128, [0.37, 0.37, 0.37]);
        let out = resample(&img, 37, 37).unwrap();
        assert!(out.data().iter().all(|v| (v - 0.37).abs() <= 1e-6));
        let up = resample(&img, 200, 150).unwrap();
        assert!(up.data().iter().all(|v| (v - 0.37).abs() <= 1e-6));
    }

    #[test]
    fn equal_size_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img = random_image(&mut rng, 64, 64);
        assert_eq!(resample(&img, 64, 64).unwrap(), img);
        let img = random_image(&mut rng, 13, 29);
        assert_eq!(resample(&img, 13, 29).unwrap(), img);
    }

    #[test]
    fn ramp_matches_direct_convolution() {
        let img = Image::from_fn(32, 32, |_, x| {
            let v = x as f64 / 31.0;
            [v, v, v]
        });
        let fast = resample(&img, 16, 16).unwrap();
        let slow = direct_resample(&img, 16, 16);
        assert!(fast.max_abs_diff(&slow) <= 1e-6);
    }

    #[test]
    fn random_images_match_direct_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let (h, w) = (rng.random_range(2..24), rng.random_range(2..24));
            let (oh, ow) = (rng.random_range(1..30), rng.random_range(1..30));
            let img = random_image(&mut rng, h, w);
            let d = resample(&img, oh, ow).unwrap().max_abs_diff(&direct_resample(&img, oh, ow));
            assert!(d <= 1e-6, "{h}x{w} -> {oh}x{ow}: {d}");
        }
    }

    #[test]
    fn resample_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_image(&mut rng, 20, 17);
        let b = random_image(&mut rng, 20, 17);
        let (alpha, beta) = (0.7, -1.3);
        let combo = Image::from_fn(20, 17, |y, x| {
            let (pa, pb) = (a.get(y, x), b.get(y, x));
            [0, 1, 2].map(|c| alpha * pa[c] + beta * pb[c])
        });
        let lhs = resample(&combo, 9, 11).unwrap();
        let (ra, rb) = (resample(&a, 9, 11).unwrap(), resample(&b, 9, 11).unwrap());
        let rhs = Image::from_fn(9, 11, |y, x| {
            let (pa, pb) = (ra.get(y, x), rb.get(y, x));
            [0, 1, 2].map(|c| alpha * pa[c] + beta * pb[c])
        });
        assert!(lhs.max_abs_diff(&rhs) <= 1e-6);
    }

    #[test]
    fn region_equals_resize_then_crop() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let img = random_image(&mut rng, 40, 40);
        let full = resample(&img, 27, 27).unwrap();
        let region = resample_region(&img, 27, 27, 5, 9, 12, 12).unwrap();
        assert_eq!(region, crop(&full, 5, 9, 12, 12).unwrap());
    }

    #[test]
    fn invalid_sizes() {
        let img = Image::new(4, 4);
        assert!(resample(&img, 0, 3).is_err());
        assert!(square_crop(&img, 2, 2, 3).is_err());
    }

    #[test]
    fn crops() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let img = random_image(&mut rng, 10, 10);
        assert_eq!(square_crop(&img, 0, 0, 10).unwrap(), img);
        let one = square_crop(&img, 2, 3, 1).unwrap();
        assert_eq!(one.get(0, 0), img.get(2, 3));
        let twice = square_crop(&square_crop(&img, 1, 2, 7).unwrap(), 2, 1, 4).unwrap();
        assert_eq!(twice, square_crop(&img, 3, 3, 4).unwrap());
    }

    #[test]
    fn global_warp_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let patch = random_image(&mut rng, 16, 16);
        let out = warp_to_base(&patch, &PatchSpec::global(16)).unwrap();
        assert_eq!(out.pixels, patch);
        assert!(out.mask.iter().all(|&m| m));
    }

    #[test]
    fn quarter_warp_is_downsampled_into_corner() {
        let p = 16;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let patch = random_image(&mut rng, p, p);
        let spec = PatchSpec::new(2 * p as u32, [0.25, 0.25], p as u32).unwrap();
        let out = warp_to_base(&patch, &spec).unwrap();
        let half = resample(&patch, p / 2, p / 2).unwrap();
        for y in 0..p {
            for x in 0..p {
                let inside = y < p / 2 && x < p / 2;
                assert_eq!(out.mask[y * p + x], inside);
                if inside {
                    let (a, b) = (out.pixels.get(y, x), half.get(y, x));
                    for c in 0..3 {
                        assert!((a[c] - b[c]).abs() < 1e-12);
                    }
                } else {
                    assert_eq!(out.pixels.get(y, x), [0.0; 3]);
                }
            }
        }
    }

    #[test]
    fn mask_area_tracks_extent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = 32u32;
        for _ in 0..200 {
            let s = rng.random_range(p..8 * p);
            let (lo, hi) = crate::geometry::center_bounds(s, p);
            let v = [rng.random_range(lo..=hi), rng.random_range(lo..=hi)];
            let warp = BaseWarp::new(&PatchSpec::new(s, v, p).unwrap()).unwrap();
            let per_axis = p as f64 * p as f64 / s as f64;
            let rows = warp.row_range.1 - warp.row_range.0;
            let cols = warp.col_range.1 - warp.col_range.0;
            assert!((rows as f64 - per_axis).abs() <= 1.0, "s={s} rows={rows} want {per_axis}");
            assert!((cols as f64 - per_axis).abs() <= 1.0);
        }
    }

    #[test]
    fn adjoint_is_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = 12u32;
        for s in [12u32, 20, 31, 48] {
            let (lo, hi) = crate::geometry::center_bounds(s, p);
            let v = [rng.random_range(lo..=hi), rng.random_range(lo..=hi)];
            let warp = BaseWarp::new(&PatchSpec::new(s, v, p).unwrap()).unwrap();
            let x = random_image(&mut rng, 12, 12);
            let g = random_image(&mut rng, 12, 12);
            let ax = warp.apply(&x).unwrap();
            let lhs: f64 = ax.pixels.data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
            let atg = warp.adjoint(&g);
            let rhs: f64 = x.data().iter().zip(atg.data()).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-10, "s={s}: {lhs} vs {rhs}");
        }
    }
}
