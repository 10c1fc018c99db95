use std::path::{Path, PathBuf};

use anyres::train::TrainConfig;
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

/// Environment variable naming the default root for output directories.
pub const OUT_ROOT_ENV: &str = "ANYRES_OUT";

/// A training config file: every `TrainConfig` key plus the paths a run
/// needs. Path keys are split off before the rest is parsed, so unknown
/// keys are still rejected.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub out_dir: PathBuf,
    pub train: TrainConfig,
}

pub fn default_out_root() -> PathBuf {
    std::env::var_os(OUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn take_path(map: &mut Map<String, Value>, key: &str, base: &Path) -> CliResult<Option<PathBuf>> {
    match map.remove(key) {
        None => Ok(None),
        Some(Value::String(s)) => {
            let p = PathBuf::from(s);
            Ok(Some(if p.is_relative() { base.join(p) } else { p }))
        }
        Some(other) => Err(CliError::usage(format!(
            "config key {key:?} must be a string, got {other}"
        ))),
    }
}

impl RunConfig {
    /// Parse config text. Relative paths resolve against `base` (the
    /// config file's directory); `default_out` is used when no `out_dir`
    /// key is present.
    pub fn parse(text: &str, base: &Path, default_out: PathBuf) -> CliResult<Self> {
        let value: Value = serde_json::from_str(text)?;
        let Value::Object(mut map) = value else {
            return Err(CliError::usage("config must be a flat JSON object"));
        };
        let manifest = take_path(&mut map, "manifest", base)?
            .ok_or_else(|| CliError::usage("config is missing the \"manifest\" key"))?;
        let out_dir = take_path(&mut map, "out_dir", base)?.unwrap_or(default_out);
        let train = TrainConfig::from_json(&Value::Object(map).to_string())?;
        Ok(Self {
            manifest,
            out_dir,
            train,
        })
    }

    pub fn load(path: &Path, default_out: PathBuf) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base, default_out)
    }

    /// Fully resolved config, as written next to every run's outputs.
    pub fn resolved(&self) -> Value {
        let mut map = match serde_json::to_value(&self.train).expect("config serializes") {
            Value::Object(m) => m,
            _ => unreachable!(),
        };
        map.insert(
            "manifest".into(),
            Value::String(self.manifest.display().to_string()),
        );
        map.insert(
            "out_dir".into(),
            Value::String(self.out_dir.display().to_string()),
        );
        Value::Object(map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_are_split_off_and_resolved() {
        let rc = RunConfig::parse(
            r#"{"manifest": "m.jsonl", "out_dir": "/abs/out", "patch": 32, "seed": 4}"#,
            Path::new("/cfg"),
            PathBuf::from("x"),
        )
        .unwrap();
        assert_eq!(rc.manifest, PathBuf::from("/cfg/m.jsonl"));
        assert_eq!(rc.out_dir, PathBuf::from("/abs/out"));
        assert_eq!(rc.train.patch, 32);
        assert_eq!(rc.train.seed, 4);
        let again = RunConfig::parse(
            &rc.resolved().to_string(),
            Path::new("/elsewhere"),
            PathBuf::new(),
        )
        .unwrap();
        assert_eq!(again, rc);
    }

    #[test]
    fn missing_manifest_unknown_keys_and_bad_types_are_errors() {
        let base = Path::new(".");
        assert!(RunConfig::parse(r#"{"patch": 32}"#, base, PathBuf::new()).is_err());
        assert!(
            RunConfig::parse(r#"{"manifest": "m", "pach": 32}"#, base, PathBuf::new()).is_err()
        );
        assert!(RunConfig::parse(r#"{"manifest": 3}"#, base, PathBuf::new()).is_err());
        assert!(RunConfig::parse(r#"[1, 2]"#, base, PathBuf::new()).is_err());
    }

    #[test]
    fn default_out_dir_used_when_absent() {
        let rc = RunConfig::parse(
            r#"{"manifest": "m"}"#,
            Path::new("."),
            PathBuf::from("runs/x"),
        )
        .unwrap();
        assert_eq!(rc.out_dir, PathBuf::from("runs/x"));
    }
}
