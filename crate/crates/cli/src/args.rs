use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "anyres",
    version,
    about = "Any-resolution image generation: data, training, sampling and evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scan an image directory into a JSON-lines manifest.
    Ingest(IngestArgs),
    /// Write a procedural multi-resolution image corpus.
    Corpus(CorpusArgs),
    /// Report resolution histogram and sampling statistics for a manifest.
    Stats(StatsArgs),
    /// Phase 1: fixed-resolution training on global views.
    Pretrain(PretrainArgs),
    /// Phase 2: mixed-scale patch training from a pretrained checkpoint.
    TrainPatches(TrainPatchesArgs),
    /// Synthesize one patch at a given scale and center.
    Sample(SampleArgs),
    /// Render a full image at any resolution by tiling.
    Render(RenderArgs),
    /// Compute an evaluation metric and print a JSON report.
    Eval(EvalArgs),
    /// Contact sheet of one region rendered at several scales.
    Extrapolate(ExtrapolateArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long)]
    pub out_manifest: PathBuf,
    /// `hr>=N` (or just `N`), `all-lr` or `all-hr`.
    #[arg(long, default_value = "hr>=512")]
    pub split_rule: String,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub count: usize,
    #[arg(long, default_value_t = 64)]
    pub min_size: u32,
    #[arg(long, default_value_t = 256)]
    pub max_size: u32,
    /// Draw short sides from this list instead of the min/max range.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<u32>,
    #[arg(long, default_value_t = 0.0)]
    pub non_square: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub patch: u32,
    #[arg(long)]
    pub s_lo: Option<u32>,
    #[arg(long)]
    pub s_hi: Option<u32>,
    #[arg(long, default_value_t = 0.5)]
    pub global_prob: f64,
    #[arg(long, default_value_t = 10_000)]
    pub draws: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Continue from the newest checkpoint in the output directory.
    #[arg(long)]
    pub resume: bool,
    /// Stop after this many steps (checkpointing first), for staged runs.
    #[arg(long)]
    pub stop_after: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainPatchesArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub init_checkpoint: PathBuf,
    #[arg(long)]
    pub resume: bool,
    /// Overrides `lambda_teacher` from the config file.
    #[arg(long)]
    pub lambda_teacher: Option<f64>,
    #[arg(long)]
    pub stop_after: Option<u64>,
}

fn parse_center(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected vx,vy, got {s:?}"));
    }
    let v = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok([v(parts[0])?, v(parts[1])?])
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Scale `s` in pixels of the virtual full image; defaults to the patch size.
    #[arg(long)]
    pub scale: Option<u32>,
    #[arg(long, value_parser = parse_center, default_value = "0.5,0.5")]
    pub center: [f64; 2],
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub res: u32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Pfid,
    Fid,
    DsPfid,
    Spectrum,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Pfid => "pfid",
            Metric::Fid => "fid",
            Metric::DsPfid => "ds-pfid",
            Metric::Spectrum => "spectrum",
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub metric: Metric,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 2048)]
    pub n: usize,
    /// Image resolution for fid and spectrum; defaults to the patch size.
    #[arg(long)]
    pub res: Option<u32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub embed_seed: u64,
    /// Largest real-patch scale for pfid and ds-pfid.
    #[arg(long)]
    pub s_hi: Option<u32>,
    /// Downsampling factor for ds-pfid.
    #[arg(long, default_value_t = 2)]
    pub factor: usize,
    /// Directory for the report (and spectrum CSV/PNG).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtrapolateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub scales: Vec<u32>,
    /// Output directory for `sheet.png` and `report.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = parse_center, default_value = "0.5,0.5")]
    pub center: [f64; 2],
    /// Number of latents (sheet rows).
    #[arg(long, default_value_t = 4)]
    pub rows: usize,
    /// Real data for per-scale pFID; omitted means no metric.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub embed_seed: u64,
}
