//! Variable-resolution datasets: ingestion into a manifest, the stochastic
//! patch sampling policy and dataset statistics.

mod corpus;
mod dataset;
mod manifest;
mod sampler;
mod stats;

pub use corpus::{render_scene, write_corpus, CorpusConfig, Scene};
pub use dataset::Dataset;
pub use manifest::{ingest, ImageRecord, IngestSummary, Manifest, Split, SplitRule};
pub use sampler::{sample_fake_spec, sample_real_patch, Branch, PatchBatchItem, SamplePlan, SamplingPolicy};
pub use stats::{dataset_stats, DatasetReport, HistogramBin};
