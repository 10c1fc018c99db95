use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::losses::{nonsat_grads, nonsat_losses, softplus, teacher_loss, RandomConvDistance, TeacherWeights};
use crate::datapipe::{sample_fake_spec, sample_real_patch, Branch, Dataset, Manifest, PatchBatchItem, SamplingPolicy};
use crate::error::{Error, Result};
use crate::eval::{
    extrapolation_sweep, patch_fid, sample_latent, Embedder, GeneratorSource, MetricValue, PatchMetricOptions,
};
use crate::geometry::PatchSpec;
use crate::image::Image;
use crate::netcore::{Checkpoint, CheckpointMeta, Discriminator, Generator};
use crate::nn::{Adam, ParamHash, Params};
use crate::rng::SeedStream;

/// Losses of one training step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepStats {
    pub loss_d: f64,
    pub loss_g: f64,
    /// Mean R1 over the real batch, on steps where it was applied.
    pub r1: Option<f64>,
    /// Mean teacher distance (phase 2 only).
    pub teacher: Option<f64>,
}

/// Scalar training state stored alongside the tensors in a checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExtraState {
    opt_g_step: u64,
    opt_d_step: u64,
    expected_scale: f64,
    max_scale: u32,
    teacher_hash: Option<String>,
}

/// Everything the training loop mutates, plus the frozen teacher.
pub struct TrainState {
    pub config: TrainConfig,
    pub config_hash: String,
    pub phase: u32,
    pub step: u64,
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub teacher: Option<Generator>,
    teacher_hash: Option<String>,
    pub opt_g: Adam,
    pub opt_d: Adam,
    pub policy: SamplingPolicy,
    stream: SeedStream,
    perceptual: RandomConvDistance,
}

fn check_finite(what: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} is {v}")))
    }
}

fn build_policy(config: &TrainConfig, manifest: &Manifest) -> Result<SamplingPolicy> {
    SamplingPolicy::new(manifest, config.patch, config.global_prob, config.s_lo(), config.s_hi)
}

impl TrainState {
    /// Fresh phase-1 state: random G and D, global views only.
    pub fn phase1(config: &TrainConfig, manifest: &Manifest) -> Result<Self> {
        config.validate()?;
        let policy = build_policy(config, manifest)?;
        let stream = SeedStream::new(config.seed);
        let mut rng = stream.rng("init", 0, 0);
        let scale_max = policy.max_scale().max(config.patch + 1);
        let generator = Generator::new(config.generator_config(scale_max), &mut rng)?;
        let discriminator = Discriminator::new(config.discriminator_config(), &mut rng)?;
        Ok(Self::assemble(config, 1, generator, discriminator, None, policy))
    }

    /// Phase-2 state initialized from a phase-1 checkpoint. G and D are
    /// carried over, the teacher is a frozen copy of G, and the scale
    /// normalization is set to the largest scale the policy can draw.
    pub fn phase2(config: &TrainConfig, manifest: &Manifest, init: &Checkpoint) -> Result<Self> {
        config.validate()?;
        if init.meta.phase != 1 {
            return Err(Error::invalid(format!(
                "initial checkpoint is from phase {}, expected phase 1",
                init.meta.phase
            )));
        }
        let policy = build_policy(config, manifest)?;
        if !policy.has_patch_branch() || policy.max_scale() <= config.patch {
            return Err(Error::EmptyDataset(format!(
                "patch training needs HR records with short side above {}",
                config.patch
            )));
        }
        let mut generator = init.generator("G")?;
        let expected = config.generator_config(generator.config.scale_max);
        if generator.config != expected {
            return Err(Error::invalid("checkpoint generator architecture differs from the config"));
        }
        if init.meta.discriminator != config.discriminator_config() {
            return Err(Error::invalid("checkpoint discriminator architecture differs from the config"));
        }
        let mut nonzero = false;
        generator.visit(&mut |name, t| {
            if name.starts_with("affine_s.") {
                nonzero |= t.data.iter().any(|&v| v != 0.0);
            }
        });
        if nonzero {
            return Err(Error::invalid("initial generator has a non-zero scale branch"));
        }
        generator.config.scale_max = policy.max_scale();
        let discriminator = init.discriminator("D")?;
        let teacher = generator.clone();
        Ok(Self::assemble(config, 2, generator, discriminator, Some(teacher), policy))
    }

    fn assemble(
        config: &TrainConfig,
        phase: u32,
        generator: Generator,
        discriminator: Discriminator,
        teacher: Option<Generator>,
        policy: SamplingPolicy,
    ) -> Self {
        let teacher_hash = teacher.as_ref().map(|t| t.content_hash());
        Self {
            config: config.clone(),
            config_hash: config.hash(),
            phase,
            step: 0,
            opt_g: Adam::new(config.adam_g(), &generator),
            opt_d: Adam::new(config.adam_d(), &discriminator),
            generator,
            discriminator,
            teacher,
            teacher_hash,
            policy,
            stream: SeedStream::new(config.seed).derive(&format!("phase{phase}")),
            perceptual: RandomConvDistance::new(config.seed ^ 0x7065_7263),
        }
    }

    pub fn teacher_hash(&self) -> Option<&str> {
        self.teacher_hash.as_deref()
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let extra = ExtraState {
            opt_g_step: self.opt_g.step,
            opt_d_step: self.opt_d.step,
            expected_scale: self.policy.expected_scale(),
            max_scale: self.policy.max_scale(),
            teacher_hash: self.teacher_hash.clone(),
        };
        let mut ck = Checkpoint::new(CheckpointMeta {
            phase: self.phase,
            step: self.step,
            seed: self.config.seed,
            config_hash: self.config_hash.clone(),
            generator: self.generator.config.clone(),
            discriminator: self.discriminator.config.clone(),
            extra: serde_json::to_value(extra)?,
        });
        ck.push_generator("G", &self.generator);
        ck.push_params("D", &self.discriminator);
        if let Some(t) = &self.teacher {
            ck.push_generator("T", t);
        }
        push_moments(&mut ck, "opt_g", &self.opt_g, &self.generator.names());
        push_moments(&mut ck, "opt_d", &self.opt_d, &self.discriminator.names());
        Ok(ck)
    }

    /// Restore a state written by [`TrainState::to_checkpoint`] so that
    /// training continues exactly as if it had not stopped.
    pub fn from_checkpoint(config: &TrainConfig, manifest: &Manifest, ck: &Checkpoint) -> Result<Self> {
        config.validate()?;
        if ck.meta.config_hash != config.hash() {
            return Err(Error::invalid("checkpoint was written with a different config"));
        }
        let extra: ExtraState = serde_json::from_value(ck.meta.extra.clone())?;
        let policy = build_policy(config, manifest)?;
        let generator = ck.generator("G")?;
        let discriminator = ck.discriminator("D")?;
        let teacher = if ck.has_prefix("T") { Some(ck.generator("T")?) } else { None };
        let mut state = Self::assemble(config, ck.meta.phase, generator, discriminator, teacher, policy);
        if state.teacher_hash != extra.teacher_hash {
            return Err(Error::CorruptCheckpoint("teacher hash mismatch".into()));
        }
        state.step = ck.meta.step;
        load_moments(ck, "opt_g", &mut state.opt_g, &state.generator.names())?;
        load_moments(ck, "opt_d", &mut state.opt_d, &state.discriminator.names())?;
        state.opt_g.step = extra.opt_g_step;
        state.opt_d.step = extra.opt_d_step;
        Ok(state)
    }

    fn real_batch(&self, dataset: &Dataset) -> Result<Vec<PatchBatchItem>> {
        let branch = if self.phase == 1 { Branch::Global } else { Branch::Mixed };
        let mut rng = self.stream.rng("real", 0, self.step);
        (0..self.config.batch)
            .map(|_| sample_real_patch(dataset, &self.policy, branch, &mut rng))
            .collect()
    }

    fn fake_batch(&self, tag: &str) -> Result<(Vec<Vec<f64>>, Vec<PatchSpec>)> {
        let mut zr = self.stream.rng(&format!("z-{tag}"), 0, self.step);
        let mut sr = self.stream.rng(&format!("spec-{tag}"), 0, self.step);
        let mut zs = Vec::with_capacity(self.config.batch);
        let mut specs = Vec::with_capacity(self.config.batch);
        for _ in 0..self.config.batch {
            zs.push(sample_latent(self.config.z_dim, &mut zr));
            specs.push(if self.phase == 1 {
                PatchSpec::global(self.config.patch)
            } else {
                sample_fake_spec(&self.policy, &mut sr)?
            });
        }
        Ok((zs, specs))
    }

    fn d_step(&mut self, real: &[PatchBatchItem]) -> Result<(f64, Option<f64>)> {
        let b = self.config.batch as f64;
        let (zs, specs) = self.fake_batch("d")?;
        let d = &self.discriminator;
        let mut grad = d.zeros_like();
        let mut loss = 0.0;
        for (item, (z, spec)) in real.iter().zip(zs.iter().zip(&specs)) {
            let fake = self.generator.synthesize_patch(z, spec)?;
            let (lr, cr) = d.forward(&item.pixels)?;
            let (lf, cf) = d.forward(&fake)?;
            let (dr, df, _) = nonsat_grads(lr, lf);
            loss += nonsat_losses(lr, lf).0 / b;
            d.backward(&cr, dr / b, &mut grad);
            d.backward(&cf, df / b, &mut grad);
        }
        let interval = self.config.r1_interval;
        let r1 = if self.config.lambda_r1 > 0.0 && self.step % interval == 0 {
            let coef = 0.5 * self.config.lambda_r1 * interval as f64 / b;
            let mut sum = 0.0;
            for item in real {
                sum += d.r1_backward(&item.pixels, coef, &mut grad)?;
            }
            Some(sum / b)
        } else {
            None
        };
        check_finite("discriminator loss", loss)?;
        if let Some(r) = r1 {
            check_finite("R1 penalty", r)?;
        }
        if !grad.all_finite() {
            return Err(Error::NonFinite("discriminator gradient".into()));
        }
        self.opt_d.update(&mut self.discriminator, &grad, |_| true);
        Ok((loss, r1))
    }

    fn g_step(&mut self) -> Result<(f64, Option<f64>)> {
        let b = self.config.batch as f64;
        let (zs, specs) = self.fake_batch("g")?;
        let g = &self.generator;
        let d = &self.discriminator;
        let lambda = self.config.lambda_teacher;
        let weights = TeacherWeights {
            l1: self.config.w_l1,
            perceptual: self.config.w_perc,
        };
        let mut grad = g.zeros_like();
        let mut adv = 0.0;
        let mut teacher_sum = 0.0;
        for (z, spec) in zs.iter().zip(&specs) {
            let (img, cache) = g.forward_patch(z, spec)?;
            let (lf, dc) = d.forward(&img)?;
            adv += softplus(-lf) / b;
            let mut d_img = d.backward_input(&dc, nonsat_grads(0.0, lf).2 / b);
            if let Some(teacher) = &self.teacher {
                let base = teacher.synthesize_patch(z, &PatchSpec::global(self.config.patch))?;
                let tl = teacher_loss(&img, spec, &base, weights, Some(&self.perceptual))?;
                teacher_sum += tl.value;
                if lambda > 0.0 {
                    for (a, t) in d_img.data_mut().iter_mut().zip(tl.grad.data()) {
                        *a += lambda / b * t;
                    }
                }
            }
            g.backward(&cache, &d_img, &mut grad);
        }
        let teacher = self.teacher.as_ref().map(|_| teacher_sum / b);
        let loss = adv + lambda * teacher.unwrap_or(0.0);
        check_finite("generator loss", loss)?;
        if !grad.all_finite() {
            return Err(Error::NonFinite("generator gradient".into()));
        }
        if self.phase == 1 {
            self.opt_g
                .update(&mut self.generator, &grad, |name| !Generator::is_scale_branch(name));
        } else {
            self.opt_g.update(&mut self.generator, &grad, |_| true);
        }
        Ok((loss, teacher))
    }

    /// One D update followed by one G update.
    pub fn train_step(&mut self, dataset: &Dataset) -> Result<StepStats> {
        let real = self.real_batch(dataset)?;
        let (loss_d, r1) = self.d_step(&real)?;
        let (loss_g, teacher) = self.g_step()?;
        if let (Some(t), Some(h)) = (&self.teacher, &self.teacher_hash) {
            if &t.content_hash() != h {
                return Err(Error::Numerical("teacher parameters changed during training".into()));
            }
        }
        self.step += 1;
        Ok(StepStats {
            loss_d,
            loss_g,
            r1,
            teacher,
        })
    }

    /// Fixed-resolution step on global views.
    pub fn pretrain_step(&mut self, dataset: &Dataset) -> Result<StepStats> {
        if self.phase != 1 {
            return Err(Error::invalid("pretrain_step called outside phase 1"));
        }
        self.train_step(dataset)
    }

    /// Mixed-scale step with the teacher term.
    pub fn patch_train_step(&mut self, dataset: &Dataset) -> Result<StepStats> {
        if self.phase != 2 || self.teacher.is_none() {
            return Err(Error::invalid("patch_train_step needs a phase-2 state with a teacher"));
        }
        self.train_step(dataset)
    }

    /// Low-sample pFID tracked during training (global views in phase 1).
    /// Latents and real draws are fixed for the whole run.
    pub fn proxy_pfid(&self, dataset: &Dataset, embedder: &Embedder) -> Result<MetricValue> {
        let seed = self.config.seed.wrapping_add(0x5052_4f58);
        let mut options = PatchMetricOptions::pfid(self.config.proxy_n, seed);
        if self.phase == 1 {
            options.branch = Branch::Global;
        }
        let source = GeneratorSource::new(&self.generator, seed);
        patch_fid(dataset, &self.policy, &source, embedder, options)
    }

    /// Captioned grid of samples for fixed latents: the base image, and in
    /// phase 2 also centered crops at intermediate and maximum scale.
    pub fn sample_sheet(&self) -> Result<Image> {
        let p = self.config.patch;
        let mut rng = SeedStream::new(self.config.seed).rng("sample-sheet", 0, 0);
        let latents: Vec<Vec<f64>> = (0..4).map(|_| sample_latent(self.config.z_dim, &mut rng)).collect();
        let mut scales = vec![p];
        if self.phase == 2 {
            let hi = self.policy.max_scale();
            let mid = (p + hi) / 2;
            scales.extend([mid, hi].into_iter().filter(|&s| s > p));
            scales.dedup();
        }
        let (sheet, _) = extrapolation_sweep(
            &self.generator,
            &latents,
            &scales,
            [0.5, 0.5],
            self.policy.expected_scale(),
            self.policy.max_scale(),
            None,
        )?;
        Ok(sheet)
    }
}

fn push_moments(ck: &mut Checkpoint, prefix: &str, opt: &Adam, names: &[String]) {
    for (i, name) in names.iter().enumerate() {
        ck.blobs.push((format!("{prefix}.m.{name}"), opt.first[i].clone()));
        ck.blobs.push((format!("{prefix}.v.{name}"), opt.second[i].clone()));
    }
}

fn load_moments(ck: &Checkpoint, prefix: &str, opt: &mut Adam, names: &[String]) -> Result<()> {
    for (i, name) in names.iter().enumerate() {
        let m = ck.blob(&format!("{prefix}.m.{name}"))?;
        let v = ck.blob(&format!("{prefix}.v.{name}"))?;
        if m.shape != opt.first[i].shape || v.shape != opt.second[i].shape {
            return Err(Error::CorruptCheckpoint(format!("optimizer moment shape for {name}")));
        }
        opt.first[i] = m.clone();
        opt.second[i] = v.clone();
    }
    Ok(())
}

/// Mean absolute difference between the base images of `g` and `teacher`
/// over `n` latents.
pub fn global_drift(g: &Generator, teacher: &Generator, n: usize, seed: u64) -> Result<f64> {
    let stream = SeedStream::new(seed).derive("drift");
    let spec = PatchSpec::global(g.patch());
    let mut total = 0.0;
    for i in 0..n {
        let z = sample_latent(g.config.z_dim, &mut stream.rng("z", 0, i as u64));
        total += g.synthesize_patch(&z, &spec)?.mean_abs_diff(&teacher.synthesize_patch(&z, &spec)?);
    }
    Ok(total / n.max(1) as f64)
}
