use std::path::{Path, PathBuf};

use anyres::datapipe::{
    dataset_stats, ingest, write_corpus, CorpusConfig, Dataset, Manifest, SamplingPolicy, SplitRule,
};
use anyres::eval::{
    extrapolation_sweep, fid_at_res, patch_fid, plot_spectra, real_global_image, spectrum_csv,
    spectrum_profile, Embedder, EvalReport, GeneratorSource, PatchMetricOptions, SpectrumPoint,
    SweepMetric, SweepReport,
};
use anyres::netcore::{Checkpoint, Generator};
use anyres::train::{run_phase, RunOptions};
use anyres::{Image, PatchSpec, SeedStream};
use serde_json::{json, Value};

use crate::args::*;
use crate::error::{CliError, CliResult};
use crate::provenance;
use crate::runconfig::{default_out_root, RunConfig};

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::usage(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, text)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

pub fn ingest_cmd(a: &IngestArgs) -> CliResult<()> {
    let rule: SplitRule = a.split_rule.parse()?;
    let summary = ingest(&a.dir, rule)?;
    for (path, why) in &summary.skipped {
        log::warn!("skipped {}: {why}", path.display());
    }
    summary.manifest.save(&a.out_manifest)?;
    let config = json!({"dir": a.dir, "split_rule": rule.to_string()});
    provenance::write_sidecar(&a.out_manifest, "ingest", None, &config)?;
    let m = &summary.manifest;
    println!(
        "{} records ({} LR, {} HR), {} skipped",
        m.len(),
        m.count(anyres::datapipe::Split::Low),
        m.count(anyres::datapipe::Split::High),
        summary.skipped.len()
    );
    Ok(())
}

pub fn corpus_cmd(a: &CorpusArgs) -> CliResult<()> {
    let cfg = CorpusConfig {
        count: a.count,
        min_size: a.min_size,
        max_size: a.max_size,
        non_square_fraction: a.non_square,
        seed: a.seed,
        sizes: a.sizes.clone(),
    };
    let paths = write_corpus(&a.out, &cfg)?;
    provenance::write(
        &a.out,
        "provenance.json",
        "corpus",
        None,
        &serde_json::to_value(&cfg)?,
    )?;
    println!("wrote {} images to {}", paths.len(), a.out.display());
    Ok(())
}

pub fn stats_cmd(a: &StatsArgs) -> CliResult<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let policy = SamplingPolicy::new(
        &manifest,
        a.patch,
        a.global_prob,
        a.s_lo.unwrap_or(a.patch),
        a.s_hi,
    )?;
    let report = dataset_stats(&manifest, &policy, a.draws, 64, &SeedStream::new(a.seed))?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn train_phase(
    config: &RunConfig,
    phase: u32,
    init: Option<PathBuf>,
    resume: bool,
    stop_after: Option<u64>,
) -> CliResult<()> {
    let manifest = Manifest::load(&config.manifest)?;
    manifest.validate_for(config.train.patch)?;
    let dataset = Dataset::load(manifest)?;
    let command = if phase == 1 {
        "pretrain"
    } else {
        "train-patches"
    };
    provenance::write(
        &config.out_dir,
        "config.json",
        command,
        Some(&config.train.hash()),
        &config.resolved(),
    )?;
    let opts = RunOptions {
        out_dir: config.out_dir.clone(),
        init_checkpoint: init,
        resume,
        stop_after,
    };
    let outcome = run_phase(&config.train, &dataset, phase, &opts)?;
    match &outcome.final_checkpoint {
        Some(p) => println!(
            "phase {phase} finished at step {}: {}",
            outcome.state.step,
            p.display()
        ),
        None => println!("phase {phase} stopped at step {}", outcome.state.step),
    }
    Ok(())
}

pub fn pretrain_cmd(a: &PretrainArgs) -> CliResult<()> {
    let config = RunConfig::load(&a.config, default_out_root().join("pretrain"))?;
    train_phase(&config, 1, None, a.resume, a.stop_after)
}

pub fn train_patches_cmd(a: &TrainPatchesArgs) -> CliResult<()> {
    let mut config = RunConfig::load(&a.config, default_out_root().join("train-patches"))?;
    if let Some(l) = a.lambda_teacher {
        config.train.lambda_teacher = l;
    }
    if !a.init_checkpoint.is_file() {
        return Err(CliError::usage(format!(
            "initial checkpoint {} does not exist",
            a.init_checkpoint.display()
        )));
    }
    train_phase(
        &config,
        2,
        Some(a.init_checkpoint.clone()),
        a.resume,
        a.stop_after,
    )
}

/// Generator, latent and config hash for a checkpoint and seed.
pub fn load_generator(path: &Path) -> CliResult<(Checkpoint, Generator)> {
    let ck = Checkpoint::load(path)?;
    let g = ck.generator("G")?;
    Ok((ck, g))
}

pub fn latent(g: &Generator, seed: u64) -> Vec<f64> {
    GeneratorSource::new(g, seed).latent(0)
}

/// The patch written by `sample`.
pub fn sample_patch(g: &Generator, seed: u64, scale: u32, center: [f64; 2]) -> CliResult<Image> {
    let spec = PatchSpec::new(scale, center, g.patch())?;
    Ok(g.synthesize_patch(&latent(g, seed), &spec)?)
}

/// The full image written by `render`.
pub fn render_image(g: &Generator, seed: u64, res: u32) -> CliResult<Image> {
    Ok(g.synthesize_image(&latent(g, seed), res)?)
}

fn output_config(ck: &Checkpoint, extra: Value) -> Value {
    json!({"checkpoint_meta": ck.meta, "options": extra})
}

pub fn sample_cmd(a: &SampleArgs) -> CliResult<()> {
    let (ck, g) = load_generator(&a.checkpoint)?;
    let scale = a.scale.unwrap_or(g.patch());
    let img = sample_patch(&g, a.seed, scale, a.center)?;
    img.save_png(&a.out)?;
    let opts =
        json!({"seed": a.seed, "scale": scale, "center": a.center, "checkpoint": a.checkpoint});
    provenance::write_sidecar(
        &a.out,
        "sample",
        Some(&ck.meta.config_hash),
        &output_config(&ck, opts),
    )
}

pub fn render_cmd(a: &RenderArgs) -> CliResult<()> {
    let (ck, g) = load_generator(&a.checkpoint)?;
    if a.res == 0 {
        return Err(CliError::usage("--res must be positive"));
    }
    render_image(&g, a.seed, a.res)?.save_png(&a.out)?;
    let opts = json!({"seed": a.seed, "res": a.res, "checkpoint": a.checkpoint});
    provenance::write_sidecar(
        &a.out,
        "render",
        Some(&ck.meta.config_hash),
        &output_config(&ck, opts),
    )
}

/// Mean absolute gap between two log-power curves over their common bins.
pub fn spectrum_gap(a: &[SpectrumPoint], b: &[SpectrumPoint]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| (x.log_power - y.log_power).abs())
        .sum::<f64>()
        / n as f64
}

pub fn eval_report(a: &EvalArgs) -> CliResult<EvalReport> {
    let (ck, g) = load_generator(&a.checkpoint)?;
    let manifest = Manifest::load(&a.manifest)?;
    let dataset = Dataset::load(manifest)?;
    let embedder = Embedder::standard(a.embed_seed);
    let p = g.patch();
    let res = a.res.unwrap_or(p);
    let source = GeneratorSource::new(&g, a.seed);
    let patch_policy = || SamplingPolicy::new(dataset.manifest(), p, 0.5, p, a.s_hi);
    let (value, baseline) = match a.metric {
        Metric::Pfid => {
            let m = patch_fid(
                &dataset,
                &patch_policy()?,
                &source,
                &embedder,
                PatchMetricOptions::pfid(a.n, a.seed),
            )?;
            (m.value, Some(m.baseline))
        }
        Metric::DsPfid => {
            let opts = PatchMetricOptions::ds_pfid(a.n, a.seed, a.factor);
            let m = patch_fid(&dataset, &patch_policy()?, &source, &embedder, opts)?;
            (m.value, Some(m.baseline))
        }
        Metric::Fid => {
            let m = fid_at_res(&dataset, &source, res, &embedder, a.n, a.seed)?;
            (m.value, Some(m.baseline))
        }
        Metric::Spectrum => {
            let out = a.out.as_ref().ok_or_else(|| {
                CliError::usage("--metric spectrum needs --out for the CSV and plot")
            })?;
            let stream = SeedStream::new(a.seed).derive("spectrum");
            let mut fake = Vec::with_capacity(a.n);
            let mut real = Vec::with_capacity(a.n);
            for i in 0..a.n {
                fake.push(anyres::eval::ImageSource::image(&source, res, i as u64)?);
                real.push(real_global_image(
                    &dataset,
                    res,
                    &mut stream.rng("real", 0, i as u64),
                )?);
            }
            let fp = spectrum_profile(&fake)?;
            let rp = spectrum_profile(&real)?;
            write_text(&out.join("spectrum_generated.csv"), &spectrum_csv(&fp))?;
            write_text(&out.join("spectrum_real.csv"), &spectrum_csv(&rp))?;
            plot_spectra(&[(&rp, [0.1, 0.3, 0.9]), (&fp, [0.9, 0.2, 0.1])], 480, 320)
                .save_png(out.join("spectrum.png"))?;
            (spectrum_gap(&fp, &rp), None)
        }
    };
    Ok(EvalReport {
        metric: a.metric.name().to_string(),
        value,
        n: a.n,
        seed: a.seed,
        baseline,
        embedder_id: embedder.id().to_string(),
        config_hash: ck.meta.config_hash.clone(),
    })
}

pub fn eval_cmd(a: &EvalArgs) -> CliResult<()> {
    let report = eval_report(a)?;
    let text = serde_json::to_string(&report)?;
    println!("{text}");
    if let Some(out) = &a.out {
        write_text(
            &out.join(format!("{}.json", a.metric.name())),
            &(text + "\n"),
        )?;
        let opts = json!({
            "metric": a.metric.name(), "n": a.n, "res": a.res, "seed": a.seed, "embed_seed": a.embed_seed,
            "s_hi": a.s_hi, "factor": a.factor, "manifest": a.manifest, "checkpoint": a.checkpoint,
        });
        let (ck, _) = load_generator(&a.checkpoint)?;
        provenance::write(
            out,
            "provenance.json",
            "eval",
            Some(&ck.meta.config_hash),
            &output_config(&ck, opts),
        )?;
    }
    Ok(())
}

/// Expected and maximum training scale recorded in a checkpoint. A
/// pretrained model has only seen global views, so both are `p`.
pub fn training_scales(ck: &Checkpoint, g: &Generator) -> (f64, u32) {
    let p = g.patch();
    if ck.meta.phase < 2 {
        return (p as f64, p);
    }
    let expected = ck
        .meta
        .extra
        .get("expected_scale")
        .and_then(Value::as_f64)
        .unwrap_or(p as f64);
    let max = ck
        .meta
        .extra
        .get("max_scale")
        .and_then(Value::as_u64)
        .map(|v| v as u32)
        .unwrap_or(g.config.scale_max);
    (expected, max)
}

pub fn extrapolate_sheet(a: &ExtrapolateArgs) -> CliResult<(Image, SweepReport)> {
    let (ck, g) = load_generator(&a.checkpoint)?;
    if a.rows == 0 {
        return Err(CliError::usage("--rows must be positive"));
    }
    let source = GeneratorSource::new(&g, a.seed);
    let latents: Vec<Vec<f64>> = (0..a.rows as u64).map(|i| source.latent(i)).collect();
    let (expected, max) = training_scales(&ck, &g);
    let dataset = match &a.manifest {
        Some(m) => Some(Dataset::load(Manifest::load(m)?)?),
        None => None,
    };
    let embedder = Embedder::standard(a.embed_seed);
    let metric = dataset.as_ref().map(|d| SweepMetric {
        dataset: d,
        embedder: &embedder,
        n: a.n,
        seed: a.seed,
    });
    Ok(extrapolation_sweep(
        &g,
        &latents,
        &a.scales,
        a.center,
        expected,
        max,
        metric.as_ref(),
    )?)
}

pub fn extrapolate_cmd(a: &ExtrapolateArgs) -> CliResult<()> {
    let (sheet, report) = extrapolate_sheet(a)?;
    std::fs::create_dir_all(&a.out)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", a.out.display())))?;
    sheet.save_png(a.out.join("sheet.png"))?;
    let text = serde_json::to_string_pretty(&report)? + "\n";
    write_text(&a.out.join("report.json"), &text)?;
    let (ck, _) = load_generator(&a.checkpoint)?;
    let opts = json!({
        "scales": a.scales, "seed": a.seed, "center": a.center, "rows": a.rows,
        "manifest": a.manifest, "n": a.n, "embed_seed": a.embed_seed, "checkpoint": a.checkpoint,
    });
    provenance::write(
        &a.out,
        "provenance.json",
        "extrapolate",
        Some(&ck.meta.config_hash),
        &output_config(&ck, opts),
    )?;
    print!("{text}");
    Ok(())
}
