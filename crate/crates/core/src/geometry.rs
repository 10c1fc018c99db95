//! The continuous image domain `[0,1]^2` and the maps that turn a patch
//! description into generator inputs.
//!
//! A patch is identified by the resolution `s` of the implicit full image, its
//! center `v` in normalized units and the fixed pixel size `p`. The canonical
//! `p x p` lattice spans `[-0.5, 0.5]^2` at pixel centers; scaling it by `p/s`
//! and translating by `v` yields the patch's domain coordinates.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::FeatureMap;

const CONTAINMENT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchSpec {
    /// Resolution of the implicit full image, in pixels.
    pub scale: u32,
    /// Patch center `(v_x, v_y)` in normalized domain units.
    pub center: [f64; 2],
    /// Patch resolution in pixels.
    pub patch: u32,
}

impl PatchSpec {
    pub fn new(scale: u32, center: [f64; 2], patch: u32) -> Result<Self> {
        let spec = Self {
            scale,
            center,
            patch,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The whole domain rendered at patch resolution.
    pub fn global(patch: u32) -> Self {
        Self {
            scale: patch,
            center: [0.5, 0.5],
            patch,
        }
    }

    /// Spec for the `p x p` window at integer pixel offset `(top, left)` of an
    /// `s x s` image.
    pub fn from_pixel_offset(scale: u32, patch: u32, top: u32, left: u32) -> Result<Self> {
        if top + patch > scale || left + patch > scale {
            return Err(Error::invalid(format!(
                "window at ({top}, {left}) of size {patch} exceeds a {scale}px image"
            )));
        }
        let s = scale as f64;
        let half = patch as f64 / 2.0;
        Self::new(scale, [(left as f64 + half) / s, (top as f64 + half) / s], patch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch == 0 {
            return Err(Error::invalid("patch size must be positive"));
        }
        if self.scale < self.patch {
            return Err(Error::invalid(format!(
                "scale {} is smaller than patch size {}",
                self.scale, self.patch
            )));
        }
        let (lo, hi) = center_bounds(self.scale, self.patch);
        for (axis, &v) in self.center.iter().enumerate() {
            if !v.is_finite() || v < lo - CONTAINMENT_TOL || v > hi + CONTAINMENT_TOL {
                return Err(Error::invalid(format!(
                    "center component {axis} = {v} outside [{lo}, {hi}] for s={}, p={}",
                    self.scale, self.patch
                )));
            }
        }
        Ok(())
    }

    /// Side length `p/s` of the patch in normalized units.
    pub fn extent(&self) -> f64 {
        self.patch as f64 / self.scale as f64
    }

    pub fn is_global(&self) -> bool {
        self.scale == self.patch
    }

    /// Map a canonical coordinate into the domain: `c' = (p/s) c + v`.
    #[inline]
    pub fn transform(&self, c: [f64; 2]) -> [f64; 2] {
        let step = self.extent();
        [step * c[0] + self.center[0], step * c[1] + self.center[1]]
    }

    /// Normalized bounding box `([x0, y0], [x1, y1])` covered by the patch.
    pub fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        let half = self.extent() / 2.0;
        (
            [self.center[0] - half, self.center[1] - half],
            [self.center[0] + half, self.center[1] + half],
        )
    }
}

/// Admissible range of each center component so that the patch stays inside
/// the unit domain.
pub fn center_bounds(scale: u32, patch: u32) -> (f64, f64) {
    let half = patch as f64 / (2.0 * scale as f64);
    (half, 1.0 - half)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    /// Zero-centered lattice spanning `[-0.5, 0.5]^2`.
    Canonical,
    /// Normalized image-domain coordinates.
    Domain,
}

/// A rectangular field of 2-D coordinates `(x, y)`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateGrid {
    pub height: usize,
    pub width: usize,
    pub coords: Vec<[f64; 2]>,
    pub frame: Frame,
}

impl CoordinateGrid {
    #[inline]
    pub fn at(&self, row: usize, col: usize) -> [f64; 2] {
        self.coords[row * self.width + col]
    }
}

/// Pixel-center lattice of a `p x p` grid centered on the origin.
pub fn make_canonical_grid(p: usize) -> Result<CoordinateGrid> {
    if p == 0 {
        return Err(Error::invalid("grid size must be positive"));
    }
    let axis: Vec<f64> = (0..p).map(|i| (i as f64 + 0.5) / p as f64 - 0.5).collect();
    let mut coords = Vec::with_capacity(p * p);
    for &y in &axis {
        for &x in &axis {
            coords.push([x, y]);
        }
    }
    Ok(CoordinateGrid {
        height: p,
        width: p,
        coords,
        frame: Frame::Canonical,
    })
}

/// Domain coordinates of the patch's pixel centers.
pub fn patch_grid(spec: &PatchSpec) -> Result<CoordinateGrid> {
    patch_grid_with_margin(spec, 0)
}

/// Like [`patch_grid`] but extended by `margin` pixels on every side; the
/// extra ring continues the same lattice and may leave `[0,1]^2`.
pub fn patch_grid_with_margin(spec: &PatchSpec, margin: usize) -> Result<CoordinateGrid> {
    spec.validate()?;
    let p = spec.patch as usize;
    let step = spec.extent();
    let m = margin as isize;
    let axis = |v: f64| -> Vec<f64> {
        (-m..p as isize + m)
            .map(|i| step * ((i as f64 + 0.5) / p as f64 - 0.5) + v)
            .collect()
    };
    let xs = axis(spec.center[0]);
    let ys = axis(spec.center[1]);
    let mut coords = Vec::with_capacity(xs.len() * ys.len());
    for &y in &ys {
        for &x in &xs {
            coords.push([x, y]);
        }
    }
    Ok(CoordinateGrid {
        height: ys.len(),
        width: xs.len(),
        coords,
        frame: Frame::Domain,
    })
}

/// Lowest radial frequency of a random Fourier basis, cycles per unit.
pub const FREQUENCY_FLOOR: f64 = 1.0;

/// Random Fourier feature basis `F(c) = sin(2 pi B c + phi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierBasis {
    /// `K x 2` frequency matrix, one `(f_x, f_y)` row per channel, in cycles per unit.
    pub frequencies: Vec<[f64; 2]>,
    /// Phase per channel, radians.
    pub phases: Vec<f64>,
}

impl FourierBasis {
    /// Frequencies with uniformly random direction and magnitude log-uniform
    /// on `[FREQUENCY_FLOOR, bandwidth]`, so coarse layout and fine detail
    /// both get channels; phases uniform on `[0, 2 pi)`.
    pub fn random<R: Rng + ?Sized>(channels: usize, bandwidth: f64, rng: &mut R) -> Self {
        let octaves = (bandwidth / FREQUENCY_FLOOR).ln();
        let mut frequencies = Vec::with_capacity(channels);
        let mut phases = Vec::with_capacity(channels);
        for _ in 0..channels {
            let radius = FREQUENCY_FLOOR * (rng.random::<f64>() * octaves).exp();
            let angle = rng.random::<f64>() * 2.0 * PI;
            frequencies.push([radius * angle.cos(), radius * angle.sin()]);
            phases.push(rng.random::<f64>() * 2.0 * PI);
        }
        Self {
            frequencies,
            phases,
        }
    }

    pub fn channels(&self) -> usize {
        self.frequencies.len()
    }

    /// Radial frequency of channel `k`.
    pub fn magnitude(&self, k: usize) -> f64 {
        let f = self.frequencies[k];
        f[0].hypot(f[1])
    }
}

/// Amplitude of a channel of radial frequency `freq` on a lattice of `rate`
/// samples per unit: 1 up to half the Nyquist frequency, a raised-cosine
/// taper above, and exactly 0 from Nyquist on.
pub fn band_limit_gain(freq: f64, rate: f64) -> f64 {
    let t = freq / (rate / 2.0);
    if t <= 0.5 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        0.5 * (1.0 + (PI * (t - 0.5) / 0.5).cos())
    }
}

/// Evaluate the Fourier channels at every grid coordinate (`h x w x K`).
pub fn fourier_embed(grid: &CoordinateGrid, basis: &FourierBasis) -> FeatureMap {
    let k = basis.channels();
    let mut data = Vec::with_capacity(grid.coords.len() * k);
    for c in &grid.coords {
        for (f, phi) in basis.frequencies.iter().zip(&basis.phases) {
            data.push((2.0 * PI * (f[0] * c[0] + f[1] * c[1]) + phi).sin());
        }
    }
    FeatureMap::from_vec(grid.height, grid.width, k, data)
}

/// [`fourier_embed`] with each channel scaled by [`band_limit_gain`] for a
/// lattice of `rate` samples per unit, so no channel aliases at any scale.
pub fn fourier_embed_sampled(grid: &CoordinateGrid, basis: &FourierBasis, rate: f64) -> FeatureMap {
    let gains: Vec<f64> = (0..basis.channels())
        .map(|k| band_limit_gain(basis.magnitude(k), rate))
        .collect();
    let mut map = fourier_embed(grid, basis);
    for px in map.data.chunks_exact_mut(gains.len()) {
        for (v, g) in px.iter_mut().zip(&gains) {
            *v *= g;
        }
    }
    map
}

/// Affine remap of `s` so that `s = p` gives -1 and `s = s_max` gives +1.
/// Scales beyond `s_max` map above 1 (extrapolation).
pub fn normalize_scale(s: f64, p: f64, s_max: f64) -> Result<f64> {
    if !(s_max > p) {
        return Err(Error::invalid(format!("s_max {s_max} must exceed patch size {p}")));
    }
    Ok(2.0 * (s - p) / (s_max - p) - 1.0)
}

/// Panorama encoding: the x component is read as `theta / (2 pi) + 0.5` and
/// replaced by `(sin theta, cos theta)`; y passes through. Output channels are
/// `(sin theta, cos theta, y)`.
pub fn cylindrical_encode(grid: &CoordinateGrid) -> FeatureMap {
    let mut data = Vec::with_capacity(grid.coords.len() * 3);
    for c in &grid.coords {
        // Wrapping x into [0, 1) makes theta = -pi and theta = pi the same input.
        let theta = 2.0 * PI * (c[0].rem_euclid(1.0) - 0.5);
        data.extend_from_slice(&[theta.sin(), theta.cos(), c[1]]);
    }
    FeatureMap::from_vec(grid.height, grid.width, 3, data)
}

/// Grid x component corresponding to panorama angle `theta`.
pub fn angle_to_x(theta: f64) -> f64 {
    theta / (2.0 * PI) + 0.5
}
