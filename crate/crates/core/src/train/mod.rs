//! Two-phase adversarial training: fixed-resolution pretraining on global
//! views, then mixed-scale patch training against a frozen teacher.

mod config;
mod losses;
mod run;
mod state;

pub use config::TrainConfig;
pub use losses::{
    nonsat_grads, nonsat_losses, sigmoid, softplus, teacher_loss, PerceptualDistance, RandomConvDistance, TeacherLoss,
    TeacherWeights,
};
pub use run::{latest_checkpoint, read_metrics, run_phase, MetricRow, PhaseOutcome, RunOptions, METRIC_HEADER};
pub use state::{global_drift, StepStats, TrainState};

#[cfg(test)]
pub(crate) mod fixtures {
    use super::TrainConfig;
    use crate::datapipe::{CorpusConfig, Dataset, Split};

    pub fn tiny_config() -> TrainConfig {
        TrainConfig {
            patch: 16,
            z_dim: 8,
            w_dim: 8,
            mapping_layers: 1,
            fourier_channels: 8,
            bandwidth: 4.0,
            layers: 2,
            channels: 8,
            d_channels: vec![4, 8],
            batch: 2,
            r1_interval: 2,
            pretrain_steps: 4,
            patch_steps: 4,
            log_every: 1,
            proxy_every: 2,
            proxy_n: 0,
            checkpoint_every: 2,
            sample_every: 2,
            ..TrainConfig::default()
        }
    }

    /// Four LR images at 16 px and four HR images at 32 or 48 px.
    pub fn tiny_dataset() -> Dataset {
        let low = CorpusConfig {
            count: 4,
            sizes: vec![16],
            seed: 1,
            ..CorpusConfig::default()
        };
        let high = CorpusConfig {
            count: 4,
            sizes: vec![32, 48],
            seed: 2,
            ..CorpusConfig::default()
        };
        let mut items = Vec::new();
        for i in 0..4 {
            items.push((format!("lr{i}"), Split::Low, low.render(i)));
            items.push((format!("hr{i}"), Split::High, high.render(i)));
        }
        Dataset::from_images(items).unwrap()
    }
}
