use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::netcore::{DiscriminatorConfig, GeneratorConfig};
use crate::nn::AdamConfig;

/// Every training hyperparameter; read from a flat JSON object in which
/// unknown keys are an error and missing keys take these defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub seed: u64,
    pub patch: u32,

    pub z_dim: usize,
    pub w_dim: usize,
    pub mapping_layers: usize,
    pub fourier_channels: usize,
    pub bandwidth: f64,
    pub layers: usize,
    pub channels: usize,
    pub kernel: usize,
    pub d_channels: Vec<usize>,

    pub global_prob: f64,
    /// Smallest patch-branch scale; `p` when absent.
    pub s_lo: Option<u32>,
    /// Largest patch-branch scale; the record's short side when absent.
    pub s_hi: Option<u32>,

    pub batch: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lambda_r1: f64,
    /// Lazy regularization interval: R1 every this many D steps, scaled up by it.
    pub r1_interval: u64,
    pub lambda_teacher: f64,
    pub w_l1: f64,
    pub w_perc: f64,

    pub pretrain_steps: u64,
    pub patch_steps: u64,
    pub log_every: u64,
    pub proxy_every: u64,
    pub proxy_n: usize,
    pub checkpoint_every: u64,
    pub sample_every: u64,
    pub embed_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let g = GeneratorConfig::default();
        Self {
            seed: 0,
            patch: g.patch,
            z_dim: g.z_dim,
            w_dim: g.w_dim,
            mapping_layers: g.mapping_layers,
            fourier_channels: g.fourier_channels,
            bandwidth: g.bandwidth,
            layers: g.layers,
            channels: g.channels,
            kernel: g.kernel,
            d_channels: DiscriminatorConfig::default().channels,
            global_prob: 0.5,
            s_lo: None,
            s_hi: None,
            batch: 8,
            lr_g: 2.5e-3,
            lr_d: 2.5e-3,
            beta1: 0.0,
            beta2: 0.99,
            eps: 1e-8,
            lambda_r1: 1.0,
            r1_interval: 4,
            lambda_teacher: 5.0,
            w_l1: 1.0,
            w_perc: 1.0,
            pretrain_steps: 2000,
            patch_steps: 2000,
            log_every: 10,
            proxy_every: 250,
            proxy_n: 256,
            checkpoint_every: 500,
            sample_every: 500,
            embed_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        if !(0.0..=1.0).contains(&self.global_prob) {
            return bad(format!("global_prob {} outside [0, 1]", self.global_prob));
        }
        if !(self.lambda_teacher >= 0.0) || !(self.lambda_r1 >= 0.0) {
            return bad("lambda_teacher and lambda_r1 must be non-negative".into());
        }
        if self.w_l1 < 0.0 || self.w_perc < 0.0 {
            return bad("teacher distance weights must be non-negative".into());
        }
        if self.batch == 0 || self.r1_interval == 0 || self.log_every == 0 {
            return bad("batch, r1_interval and log_every must be positive".into());
        }
        if let (Some(lo), Some(hi)) = (self.s_lo, self.s_hi) {
            if lo > hi {
                return bad(format!("s_lo {lo} exceeds s_hi {hi}"));
            }
        }
        if self.s_hi.is_some_and(|h| h < self.patch) {
            return bad("s_hi below patch size".into());
        }
        if self.proxy_n != 0 && self.proxy_n < 4 {
            return bad("proxy_n must be 0 (disabled) or at least 4".into());
        }
        self.generator_config(self.patch + 1).validate()?;
        self.discriminator_config().validate()
    }

    pub fn s_lo(&self) -> u32 {
        self.s_lo.unwrap_or(self.patch).max(self.patch)
    }

    pub fn generator_config(&self, scale_max: u32) -> GeneratorConfig {
        GeneratorConfig {
            patch: self.patch,
            z_dim: self.z_dim,
            w_dim: self.w_dim,
            mapping_layers: self.mapping_layers,
            fourier_channels: self.fourier_channels,
            bandwidth: self.bandwidth,
            layers: self.layers,
            channels: self.channels,
            kernel: self.kernel,
            scale_max,
        }
    }

    pub fn discriminator_config(&self) -> DiscriminatorConfig {
        DiscriminatorConfig {
            patch: self.patch,
            channels: self.d_channels.clone(),
        }
    }

    pub fn adam_g(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr_g,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn adam_d(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr_d,
            ..self.adam_g()
        }
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = TrainConfig::from_json(r#"{"lambda_teacher": 2.0, "seed": 4}"#).unwrap();
        assert_eq!(c.lambda_teacher, 2.0);
        assert_eq!(c.seed, 4);
        assert_eq!(c.global_prob, 0.5);
        assert_eq!(TrainConfig::default().lambda_teacher, 5.0);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(TrainConfig::from_json(r#"{"lambda_techer": 2.0}"#).is_err());
        assert!(TrainConfig::from_json(r#"{"global_prob": 1.5}"#).is_err());
        assert!(TrainConfig::from_json(r#"{"lambda_teacher": -1}"#).is_err());
        assert!(TrainConfig::from_json(r#"{"kernel": 5}"#).is_err());
        assert!(TrainConfig::from_json(r#"{"patch": 60}"#).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = TrainConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.lambda_teacher = 0.0;
        assert_ne!(a.hash(), b.hash());
    }
}
