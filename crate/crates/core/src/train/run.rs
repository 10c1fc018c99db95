use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::TrainConfig;
use super::state::{StepStats, TrainState};
use crate::datapipe::Dataset;
use crate::error::{Error, Result};
use crate::eval::Embedder;
use crate::netcore::Checkpoint;

pub const METRIC_HEADER: &str = "step,loss_D,loss_G,r1,teacher,proxy_pfid,wallclock";

/// One line of `metrics.csv`. Missing values are written as empty cells.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricRow {
    pub step: u64,
    pub loss_d: Option<f64>,
    pub loss_g: Option<f64>,
    pub r1: Option<f64>,
    pub teacher: Option<f64>,
    pub proxy_pfid: Option<f64>,
    pub wallclock: f64,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_cell(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::invalid(format!("bad metrics cell {s:?}")))
}

impl MetricRow {
    fn from_stats(step: u64, s: &StepStats) -> Self {
        Self {
            step,
            loss_d: Some(s.loss_d),
            loss_g: Some(s.loss_g),
            r1: s.r1,
            teacher: s.teacher,
            ..Default::default()
        }
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.3}",
            self.step,
            cell(self.loss_d),
            cell(self.loss_g),
            cell(self.r1),
            cell(self.teacher),
            cell(self.proxy_pfid),
            self.wallclock
        )
    }

    pub fn from_csv(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 7 {
            return Err(Error::invalid(format!("metrics row has {} fields", f.len())));
        }
        Ok(Self {
            step: f[0].parse().map_err(|_| Error::invalid(format!("bad step {:?}", f[0])))?,
            loss_d: parse_cell(f[1])?,
            loss_g: parse_cell(f[2])?,
            r1: parse_cell(f[3])?,
            teacher: parse_cell(f[4])?,
            proxy_pfid: parse_cell(f[5])?,
            wallclock: parse_cell(f[6])?.unwrap_or(0.0),
        })
    }
}

pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(METRIC_HEADER) {
        return Err(Error::invalid(format!("{}: unexpected header", path.display())));
    }
    lines.filter(|l| !l.is_empty()).map(MetricRow::from_csv).collect()
}

fn write_metrics(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let mut out = String::from(METRIC_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Phase-1 checkpoint that seeds phase 2.
    pub init_checkpoint: Option<PathBuf>,
    /// Continue from the newest checkpoint in `out_dir`.
    pub resume: bool,
    /// Stop (after checkpointing) once this step is reached.
    pub stop_after: Option<u64>,
}

pub struct PhaseOutcome {
    pub state: TrainState,
    pub rows: Vec<MetricRow>,
    /// `final.ckpt`, when the phase ran to completion.
    pub final_checkpoint: Option<PathBuf>,
}

fn checkpoint_name(step: u64) -> String {
    format!("step_{step:06}.ckpt")
}

/// Newest `step_*.ckpt` in `dir`.
pub fn latest_checkpoint(dir: impl AsRef<Path>) -> Result<Option<PathBuf>> {
    let dir = dir.as_ref();
    if !dir.exists() {
        return Ok(None);
    }
    let mut best: Option<(u64, PathBuf)> = None;
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let step = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("step_"))
            .and_then(|n| n.strip_suffix(".ckpt"))
            .and_then(|n| n.parse::<u64>().ok());
        if let Some(step) = step {
            if best.as_ref().is_none_or(|(b, _)| step > *b) {
                best = Some((step, path));
            }
        }
    }
    Ok(best.map(|(_, p)| p))
}

/// Run (or resume) one training phase, writing `metrics.csv`,
/// `checkpoints/step_*.ckpt`, `samples/step_*.png` and `final.ckpt`
/// under `opts.out_dir`.
pub fn run_phase(config: &TrainConfig, dataset: &Dataset, phase: u32, opts: &RunOptions) -> Result<PhaseOutcome> {
    config.validate()?;
    let total = match phase {
        1 => config.pretrain_steps,
        2 => config.patch_steps,
        _ => return Err(Error::invalid(format!("unknown phase {phase}"))),
    };
    let out = &opts.out_dir;
    let ck_dir = out.join("checkpoints");
    let sample_dir = out.join("samples");
    for d in [out, &ck_dir, &sample_dir] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let metrics_path = out.join("metrics.csv");
    let manifest = dataset.manifest();

    let resumed = if opts.resume {
        match latest_checkpoint(&ck_dir)? {
            Some(path) => {
                let ck = Checkpoint::load(&path)?;
                if ck.meta.phase != phase {
                    return Err(Error::invalid(format!(
                        "{} belongs to phase {}, not {phase}",
                        path.display(),
                        ck.meta.phase
                    )));
                }
                let state = TrainState::from_checkpoint(config, manifest, &ck)?;
                let rows: Vec<MetricRow> = if metrics_path.exists() {
                    read_metrics(&metrics_path)?
                        .into_iter()
                        .filter(|r| r.step <= state.step)
                        .collect()
                } else {
                    Vec::new()
                };
                log::info!("resuming phase {phase} at step {}", state.step);
                Some((state, rows))
            }
            None => {
                log::warn!("no checkpoint in {}; starting from scratch", ck_dir.display());
                None
            }
        }
    } else {
        None
    };

    let embedder = Embedder::standard(config.embed_seed);
    let (mut state, mut rows) = match resumed {
        Some(r) => r,
        None => {
            let state = match phase {
                1 => TrainState::phase1(config, manifest)?,
                _ => {
                    let path = opts
                        .init_checkpoint
                        .as_ref()
                        .ok_or_else(|| Error::invalid("patch training needs an initial checkpoint"))?;
                    TrainState::phase2(config, manifest, &Checkpoint::load(path)?)?
                }
            };
            let mut row = MetricRow::default();
            if config.proxy_n > 0 {
                row.proxy_pfid = Some(state.proxy_pfid(dataset, &embedder)?.value);
            }
            (state, vec![row])
        }
    };
    write_metrics(&metrics_path, &rows)?;

    let clock_offset = rows.last().map(|r| r.wallclock).unwrap_or(0.0);
    let start = Instant::now();
    let stop = opts.stop_after.unwrap_or(total).min(total);
    while state.step < stop {
        let stats = state.train_step(dataset)?;
        let k = state.step;
        let last = k == total;
        let want_proxy = config.proxy_n > 0 && (k % config.proxy_every == 0 || last);
        if k % config.log_every == 0 || want_proxy || last {
            let mut row = MetricRow::from_stats(k, &stats);
            if want_proxy {
                let v = state.proxy_pfid(dataset, &embedder)?.value;
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("proxy pFID at step {k}")));
                }
                row.proxy_pfid = Some(v);
            }
            row.wallclock = clock_offset + start.elapsed().as_secs_f64();
            log::info!("{}", row.to_csv());
            rows.push(row);
            write_metrics(&metrics_path, &rows)?;
        }
        if k % config.sample_every == 0 || last {
            state.sample_sheet()?.save_png(sample_dir.join(format!("step_{k:06}.png")))?;
        }
        if k % config.checkpoint_every == 0 || k == stop {
            state.to_checkpoint()?.save(ck_dir.join(checkpoint_name(k)))?;
        }
    }

    let final_checkpoint = if state.step == total {
        let path = out.join("final.ckpt");
        state.to_checkpoint()?.save(&path)?;
        Some(path)
    } else {
        None
    };
    Ok(PhaseOutcome {
        state,
        rows,
        final_checkpoint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ParamHash;
    use crate::train::fixtures::{tiny_config, tiny_dataset};

    fn strip_clock(rows: &[MetricRow]) -> Vec<MetricRow> {
        rows.iter()
            .map(|r| MetricRow {
                wallclock: 0.0,
                ..r.clone()
            })
            .collect()
    }

    #[test]
    fn csv_round_trip() {
        let row = MetricRow {
            step: 7,
            loss_d: Some(1.25),
            loss_g: Some(-0.5),
            r1: None,
            teacher: Some(0.1),
            proxy_pfid: None,
            wallclock: 2.5,
        };
        assert_eq!(row.to_csv(), "7,1.25,-0.5,,0.1,,2.500");
        assert_eq!(MetricRow::from_csv(&row.to_csv()).unwrap(), row);
        assert!(MetricRow::from_csv("1,2").is_err());
    }

    #[test]
    fn phase_run_writes_artifacts_and_resumes_identically() {
        let data = tiny_dataset();
        let mut cfg = tiny_config();
        cfg.proxy_n = 8;
        let dir = tempfile::tempdir().unwrap();
        let full = RunOptions {
            out_dir: dir.path().join("full"),
            ..Default::default()
        };
        let a = run_phase(&cfg, &data, 1, &full).unwrap();
        assert!(a.final_checkpoint.is_some());
        assert!(full.out_dir.join("checkpoints/step_000002.ckpt").exists());
        assert!(full.out_dir.join("samples/step_000004.png").exists());
        let rows = read_metrics(full.out_dir.join("metrics.csv")).unwrap();
        assert_eq!(rows.len(), 5);
        assert!(rows[0].loss_d.is_none() && rows[0].proxy_pfid.is_some());
        assert!(rows[1].proxy_pfid.is_none() && rows[2].proxy_pfid.is_some());

        let split = RunOptions {
            out_dir: dir.path().join("split"),
            stop_after: Some(3),
            ..Default::default()
        };
        let b = run_phase(&cfg, &data, 1, &split).unwrap();
        assert!(b.final_checkpoint.is_none());
        assert_eq!(b.state.step, 3);
        let resume = RunOptions {
            resume: true,
            stop_after: None,
            ..split.clone()
        };
        let c = run_phase(&cfg, &data, 1, &resume).unwrap();
        let rows_c = read_metrics(split.out_dir.join("metrics.csv")).unwrap();
        assert_eq!(strip_clock(&rows), strip_clock(&rows_c));
        assert_eq!(a.state.generator.content_hash(), c.state.generator.content_hash());
        let fa = std::fs::read(a.final_checkpoint.unwrap()).unwrap();
        let fc = std::fs::read(c.final_checkpoint.unwrap()).unwrap();
        assert_eq!(fa, fc);

        let phase2 = RunOptions {
            out_dir: dir.path().join("p2"),
            init_checkpoint: Some(full.out_dir.join("final.ckpt")),
            ..Default::default()
        };
        let p2 = run_phase(&cfg, &data, 2, &phase2).unwrap();
        let rows2 = read_metrics(phase2.out_dir.join("metrics.csv")).unwrap();
        assert!(rows2[1..].iter().all(|r| r.teacher.is_some()));
        assert_eq!(p2.state.phase, 2);
        let missing_init = RunOptions {
            out_dir: dir.path().join("p2b"),
            ..Default::default()
        };
        assert!(run_phase(&cfg, &data, 2, &missing_init).is_err());
    }

    #[test]
    fn latest_checkpoint_picks_highest_step() {
        let dir = tempfile::tempdir().unwrap();
        assert!(latest_checkpoint(dir.path()).unwrap().is_none());
        for n in ["step_000010.ckpt", "step_000002.ckpt", "other.ckpt"] {
            std::fs::write(dir.path().join(n), b"").unwrap();
        }
        let p = latest_checkpoint(dir.path()).unwrap().unwrap();
        assert!(p.ends_with("step_000010.ckpt"));
    }
}
