use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeedStream;

use super::manifest::{Manifest, Split};
use super::sampler::{Branch, SamplingPolicy};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    /// Inclusive lower edge of the short-side bin, pixels.
    pub lo: u32,
    /// Exclusive upper edge.
    pub hi: u32,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub n_low: usize,
    pub n_high: usize,
    /// Non-empty bins of the native short-side histogram.
    pub histogram: Vec<HistogramBin>,
    pub hr_min: Option<u32>,
    pub hr_median: Option<f64>,
    pub hr_max: Option<u32>,
    /// Monte-Carlo estimate of the average sampled scale.
    pub expected_scale: f64,
    /// Closed-form average sampled scale for the same policy.
    pub expected_scale_exact: f64,
    pub global_fraction: f64,
    pub n_draws: usize,
}

/// Composition and sampling statistics of a manifest under a policy.
pub fn dataset_stats(
    manifest: &Manifest,
    policy: &SamplingPolicy,
    n_draws: usize,
    bin_width: u32,
    stream: &SeedStream,
) -> Result<DatasetReport> {
    if n_draws == 0 {
        return Err(Error::invalid("n_draws must be at least 1"));
    }
    let bin_width = bin_width.max(1);
    let mut bins: std::collections::BTreeMap<u32, usize> = Default::default();
    for r in &manifest.records {
        *bins.entry(r.short_side() / bin_width).or_default() += 1;
    }
    let histogram = bins
        .into_iter()
        .map(|(b, count)| HistogramBin {
            lo: b * bin_width,
            hi: (b + 1) * bin_width,
            count,
        })
        .collect();

    let mut hr: Vec<u32> = manifest.high_res().map(|r| r.short_side()).collect();
    hr.sort_unstable();
    let hr_median = match hr.len() {
        0 => None,
        n if n % 2 == 1 => Some(hr[n / 2] as f64),
        n => Some((hr[n / 2 - 1] as f64 + hr[n / 2] as f64) / 2.0),
    };

    let (expected_scale, global_fraction) = if policy.has_patch_branch() {
        let mut total = 0.0;
        let mut globals = 0usize;
        for i in 0..n_draws {
            let plan = policy.draw(Branch::Mixed, &mut stream.rng("stats", 0, i as u64))?;
            total += plan.spec.scale as f64;
            globals += plan.global as usize;
        }
        (total / n_draws as f64, globals as f64 / n_draws as f64)
    } else {
        // Only global draws are possible.
        (policy.patch as f64, 1.0)
    };

    Ok(DatasetReport {
        n_low: manifest.count(Split::Low),
        n_high: manifest.count(Split::High),
        histogram,
        hr_min: hr.first().copied(),
        hr_median,
        hr_max: hr.last().copied(),
        expected_scale,
        expected_scale_exact: policy.expected_scale(),
        global_fraction,
        n_draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapipe::ImageRecord;

    fn record(i: usize, size: u32, split: Split) -> ImageRecord {
        ImageRecord {
            id: format!("{i}"),
            path: format!("{i}.png"),
            width: size,
            height: size,
            split,
        }
    }

    #[test]
    fn faces_style_composition() {
        let mut records = Vec::new();
        for i in 0..70_000 {
            records.push(record(i, 256, Split::Low));
        }
        for i in 0..5_000 {
            records.push(record(70_000 + i, 512 + (i as u32 * 512) / 4_999, Split::High));
        }
        for i in 0..1_000 {
            records.push(record(75_000 + i, 1024, Split::High));
        }
        let m = Manifest::new(records);
        let policy = SamplingPolicy::new(&m, 256, 0.5, 256, None).unwrap();
        let report = dataset_stats(&m, &policy, 2_000, 128, &SeedStream::new(1)).unwrap();
        assert_eq!(report.hr_min, Some(512));
        assert_eq!(report.hr_max, Some(1024));
        assert_eq!(report.n_low, 70_000);
        assert_eq!(report.n_high, 6_000);
    }

    #[test]
    fn single_record() {
        let m = Manifest::new(vec![record(0, 1024, Split::High)]);
        let policy = SamplingPolicy::new(&m, 256, 0.5, 256, None).unwrap();
        let report = dataset_stats(&m, &policy, 10_000, 128, &SeedStream::new(2)).unwrap();
        assert_eq!(report.histogram.len(), 1);
        assert!((report.expected_scale - 448.0).abs() <= 10.0);
        assert_eq!(report.expected_scale_exact, 448.0);
    }

    #[test]
    fn no_hr_means_only_global_draws() {
        let m = Manifest::new(vec![record(0, 64, Split::Low), record(1, 80, Split::Low)]);
        let policy = SamplingPolicy::new(&m, 64, 0.5, 64, None).unwrap();
        let report = dataset_stats(&m, &policy, 100, 128, &SeedStream::new(3)).unwrap();
        assert_eq!(report.expected_scale, 64.0);
        assert_eq!(report.hr_min, None);
        assert!(dataset_stats(&m, &policy, 0, 128, &SeedStream::new(3)).is_err());
    }
}
