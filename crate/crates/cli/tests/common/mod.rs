#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn anyres(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anyres"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

pub fn ok(args: &[&str]) -> String {
    let out = anyres(args);
    assert!(
        out.status.success(),
        "anyres {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn code(args: &[&str]) -> i32 {
    anyres(args).status.code().unwrap_or(-1)
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Procedural corpus plus manifest under `dir`.
pub fn corpus(dir: &Path, count: usize, sizes: &str, threshold: u32) -> PathBuf {
    let images = dir.join("images");
    let manifest = dir.join("manifest.jsonl");
    ok(&[
        "corpus",
        "--out",
        s(&images),
        "--count",
        &count.to_string(),
        "--sizes",
        sizes,
        "--seed",
        "3",
    ]);
    ok(&[
        "ingest",
        "--dir",
        s(&images),
        "--out-manifest",
        s(&manifest),
        "--split-rule",
        &format!("hr>={threshold}"),
    ]);
    manifest
}

pub fn write_config(path: &Path, manifest: &Path, out_dir: &Path, extra: serde_json::Value) {
    let mut cfg = serde_json::json!({
        "manifest": manifest,
        "out_dir": out_dir,
    });
    for (k, v) in extra.as_object().unwrap() {
        cfg[k] = v.clone();
    }
    std::fs::write(path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
}

pub fn tiny_train_keys() -> serde_json::Value {
    serde_json::json!({
        "patch": 16, "z_dim": 8, "w_dim": 8, "mapping_layers": 1, "fourier_channels": 8,
        "bandwidth": 4.0, "layers": 2, "channels": 8, "d_channels": [4, 8], "batch": 2,
        "pretrain_steps": 4, "patch_steps": 4, "log_every": 1, "proxy_every": 2, "proxy_n": 8,
        "checkpoint_every": 2, "sample_every": 2
    })
}
