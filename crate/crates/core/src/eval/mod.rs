//! Frechet statistics, patch and global FID, extrapolation sweeps and
//! frequency spectra.

mod embedder;
pub mod font;
mod metrics;
mod report;
mod spectrum;
mod stats;
mod sweep;

pub use embedder::Embedder;
pub use metrics::{
    fid_at_res, patch_fid, real_global_image, sample_latent, GeneratorSource, ImageSource, MetricValue,
    PatchMetricOptions, PatchSource, RealPatchSource,
};
pub use report::EvalReport;
pub use spectrum::{plot_spectra, spectrum_csv, spectrum_profile, SpectrumPoint};
pub use stats::{frechet_distance, sqrt_psd, FeatureAccumulator, FeatureStats, EIGEN_CLAMP, EIGEN_ERROR};
pub use sweep::{clamp_center, extrapolation_sweep, pfid_at_scale, SweepEntry, SweepMetric, SweepReport};
