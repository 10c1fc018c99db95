use serde::{Deserialize, Serialize};

use super::embedder::Embedder;
use super::font::{draw_text, text_width, GLYPH_H};
use super::metrics::{patch_fid, GeneratorSource, MetricValue, PatchMetricOptions};
use crate::datapipe::{Dataset, SamplingPolicy};
use crate::error::{Error, Result};
use crate::geometry::{center_bounds, PatchSpec};
use crate::image::Image;
use crate::netcore::Generator;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub scale: u32,
    pub s_bar: f64,
    /// Center actually used (clamped so the patch stays inside the domain).
    pub center: [f64; 2],
    pub exceeds_expected_scale: bool,
    pub exceeds_max_scale: bool,
    /// pFID at this single scale, when real data at the scale exists.
    pub proxy_pfid: Option<MetricValue>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub center: [f64; 2],
    pub expected_scale: f64,
    pub max_scale: u32,
    pub entries: Vec<SweepEntry>,
}

/// Evaluation data for per-scale pFID in a sweep.
pub struct SweepMetric<'a> {
    pub dataset: &'a Dataset,
    pub embedder: &'a Embedder,
    pub n: usize,
    pub seed: u64,
}

/// Clamp a center into the containment range of scale `s`.
pub fn clamp_center(center: [f64; 2], scale: u32, patch: u32) -> [f64; 2] {
    let (lo, hi) = center_bounds(scale, patch);
    center.map(|c| c.clamp(lo, hi))
}

/// pFID using only real and generated patches at exactly scale `s`.
pub fn pfid_at_scale(g: &Generator, scale: u32, metric: &SweepMetric) -> Result<MetricValue> {
    let policy = SamplingPolicy::new(metric.dataset.manifest(), g.patch(), 0.0, scale, Some(scale))?;
    let source = GeneratorSource::new(g, metric.seed);
    patch_fid(
        metric.dataset,
        &policy,
        &source,
        metric.embedder,
        PatchMetricOptions::pfid(metric.n, metric.seed),
    )
}

/// Render the same region at every scale for every latent. The contact
/// sheet has one row per latent and one column per scale, each cell
/// captioned with its `(s, v)`; scales beyond the training maximum get a
/// `*` marker.
pub fn extrapolation_sweep(
    g: &Generator,
    latents: &[Vec<f64>],
    scales: &[u32],
    center: [f64; 2],
    expected_scale: f64,
    max_scale: u32,
    metric: Option<&SweepMetric>,
) -> Result<(Image, SweepReport)> {
    if scales.is_empty() {
        return Err(Error::invalid("scale list is empty"));
    }
    if scales.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("scale list must be strictly ascending"));
    }
    let p = g.patch();
    if scales[0] < p {
        return Err(Error::invalid(format!("scales must be at least the patch size {p}")));
    }
    let mut entries = Vec::with_capacity(scales.len());
    for &s in scales {
        let proxy_pfid = match metric {
            Some(m) => match pfid_at_scale(g, s, m) {
                Ok(v) => Some(v),
                Err(Error::EmptyDataset(_)) => None,
                Err(e) => return Err(e),
            },
            None => None,
        };
        entries.push(SweepEntry {
            scale: s,
            s_bar: g.scale_bar(s as f64),
            center: clamp_center(center, s, p),
            exceeds_expected_scale: s as f64 > expected_scale,
            exceeds_max_scale: s > max_scale,
            proxy_pfid,
        });
    }
    let captions: Vec<[String; 2]> = entries
        .iter()
        .map(|e| {
            let mark = if e.exceeds_max_scale { "*" } else { "" };
            [
                format!("s={}{mark}", e.scale),
                format!("v=({:.2},{:.2})", e.center[0], e.center[1]),
            ]
        })
        .collect();
    let text_w = captions.iter().flatten().map(|c| text_width(c)).max().unwrap_or(0);
    let pad = 4;
    let cell_w = (p as usize).max(text_w) + 2 * pad;
    let cell_h = p as usize + 2 * (GLYPH_H + 2) + 2 * pad;
    let mut sheet = Image::filled(cell_h * latents.len().max(1), cell_w * scales.len(), [1.0; 3]);
    for (row, z) in latents.iter().enumerate() {
        for (col, e) in entries.iter().enumerate() {
            let spec = PatchSpec::new(e.scale, e.center, p)?;
            let img = g.synthesize_patch(z, &spec)?.map(|v| v.clamp(0.0, 1.0));
            let (top, left) = (row * cell_h + pad, col * cell_w + (cell_w - p as usize) / 2);
            sheet.paste(&img, top, left);
            let ty = top + p as usize + 2;
            for (k, line) in captions[col].iter().enumerate() {
                draw_text(&mut sheet, ty + k * (GLYPH_H + 2), col * cell_w + pad, line, [0.0; 3]);
            }
        }
    }
    Ok((
        sheet,
        SweepReport {
            center,
            expected_scale,
            max_scale,
            entries,
        },
    ))
}
