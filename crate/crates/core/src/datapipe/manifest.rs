use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Split {
    #[serde(rename = "LR")]
    Low,
    #[serde(rename = "HR")]
    High,
}

/// One dataset image at its native resolution.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub path: String,
    pub width: u32,
    pub height: u32,
    pub split: Split,
}

impl ImageRecord {
    /// Short side, the size of the largest square crop.
    pub fn short_side(&self) -> u32 {
        self.width.min(self.height)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    pub records: Vec<ImageRecord>,
}

/// Assigns LR/HR tags from native resolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitRule {
    /// Records whose short side is at least the threshold are HR.
    Threshold(u32),
    /// Everything is LR.
    AllLow,
    /// Everything is HR.
    AllHigh,
}

impl SplitRule {
    pub fn classify(&self, width: u32, height: u32) -> Split {
        match *self {
            SplitRule::Threshold(t) if width.min(height) >= t => Split::High,
            SplitRule::Threshold(_) | SplitRule::AllLow => Split::Low,
            SplitRule::AllHigh => Split::High,
        }
    }
}

impl FromStr for SplitRule {
    type Err = Error;

    /// Accepts `hr>=N`, a bare threshold `N`, `all-lr` or `all-hr`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "all-lr" => return Ok(SplitRule::AllLow),
            "all-hr" => return Ok(SplitRule::AllHigh),
            _ => {}
        }
        let digits = s.strip_prefix("hr>=").unwrap_or(s);
        digits
            .parse::<u32>()
            .map(SplitRule::Threshold)
            .map_err(|_| Error::invalid(format!("unrecognized split rule '{s}'")))
    }
}

impl fmt::Display for SplitRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitRule::Threshold(t) => write!(f, "hr>={t}"),
            SplitRule::AllLow => write!(f, "all-lr"),
            SplitRule::AllHigh => write!(f, "all-hr"),
        }
    }
}

impl Manifest {
    pub fn new(records: Vec<ImageRecord>) -> Self {
        Self { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, split: Split) -> usize {
        self.records.iter().filter(|r| r.split == split).count()
    }

    pub fn high_res(&self) -> impl Iterator<Item = &ImageRecord> {
        self.records.iter().filter(|r| r.split == Split::High)
    }

    /// HR records must be usable for patch extraction at patch size `p`.
    pub fn validate_for(&self, p: u32) -> Result<()> {
        if let Some(r) = self.high_res().find(|r| r.short_side() < p) {
            return Err(Error::invalid(format!(
                "HR record {} has short side {} < patch size {p}",
                r.id,
                r.short_side()
            )));
        }
        Ok(())
    }

    /// JSON-lines text, one record per line with fields `id, path, width, height, split`.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<Vec<ImageRecord>, _>>()?;
        Ok(Self { records })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_jsonl().as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_jsonl(&text)
    }
}

#[derive(Clone, Debug)]
pub struct IngestSummary {
    pub manifest: Manifest,
    /// Files with an image extension that failed to decode, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else if path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        {
            out.push(path);
        }
    }
    Ok(())
}

/// Scan `dir` recursively for PNG/JPEG files and record their native sizes.
///
/// Records are ordered by path. Files that fail to decode are skipped and
/// reported; pixels are never resized or rewritten.
pub fn ingest(dir: impl AsRef<Path>, rule: SplitRule) -> Result<IngestSummary> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        ));
    }
    let mut files = Vec::new();
    collect_files(dir, &mut files)?;
    files.sort();
    let mut records = Vec::with_capacity(files.len());
    let mut skipped = Vec::new();
    for path in files {
        match Image::load(&path) {
            Ok(img) => {
                let rel = path.strip_prefix(dir).unwrap_or(&path);
                let id = rel.with_extension("").to_string_lossy().replace('\\', "/");
                let (width, height) = (img.width() as u32, img.height() as u32);
                records.push(ImageRecord {
                    id,
                    path: path.to_string_lossy().into_owned(),
                    width,
                    height,
                    split: rule.classify(width, height),
                });
            }
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                skipped.push((path, e.to_string()));
            }
        }
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no decodable images under {}",
            dir.display()
        )));
    }
    Ok(IngestSummary {
        manifest: Manifest { records },
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, size: usize) {
        Image::filled(size, size, [0.2, 0.4, 0.6]).save_png(dir.join(name)).unwrap();
    }

    #[test]
    fn ingest_records_native_sizes() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "c.png", 64);
        write(dir.path(), "a.png", 16);
        write(dir.path(), "b.png", 32);
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let summary = ingest(dir.path(), SplitRule::Threshold(32)).unwrap();
        let m = &summary.manifest;
        assert_eq!(m.len(), 3);
        let sizes: Vec<u32> = m.records.iter().map(|r| r.width).collect();
        assert_eq!(sizes, vec![16, 32, 64]);
        assert_eq!(m.records[0].split, Split::Low);
        assert_eq!(m.records[1].split, Split::High);
        assert_eq!(m.records[0].id, "a");
        assert!(summary.skipped.is_empty());

        let again = ingest(dir.path(), SplitRule::Threshold(32)).unwrap();
        assert_eq!(again.manifest.to_jsonl(), m.to_jsonl());
    }

    #[test]
    fn corrupt_file_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..10 {
            write(dir.path(), &format!("img{i:02}.png"), 16 + i);
        }
        let victim = dir.path().join("img04.png");
        let bytes = std::fs::read(&victim).unwrap();
        std::fs::write(&victim, &bytes[..bytes.len() / 2]).unwrap();
        let summary = ingest(dir.path(), SplitRule::AllLow).unwrap();
        assert_eq!(summary.manifest.len(), 9);
        assert_eq!(summary.skipped.len(), 1);
        assert_eq!(summary.skipped[0].0, victim);
    }

    #[test]
    fn empty_and_missing_directories() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(ingest(dir.path(), SplitRule::AllLow), Err(Error::EmptyDataset(_))));
        assert!(matches!(
            ingest(dir.path().join("nope"), SplitRule::AllLow),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn jsonl_round_trip_and_field_order() {
        let m = Manifest::new(vec![ImageRecord {
            id: "x".into(),
            path: "d/x.png".into(),
            width: 300,
            height: 200,
            split: Split::High,
        }]);
        let text = m.to_jsonl();
        assert_eq!(
            text,
            "{\"id\":\"x\",\"path\":\"d/x.png\",\"width\":300,\"height\":200,\"split\":\"HR\"}\n"
        );
        assert_eq!(Manifest::from_jsonl(&text).unwrap(), m);
    }

    #[test]
    fn split_rule_parsing() {
        assert_eq!("hr>=512".parse::<SplitRule>().unwrap(), SplitRule::Threshold(512));
        assert_eq!("256".parse::<SplitRule>().unwrap(), SplitRule::Threshold(256));
        assert_eq!("all-hr".parse::<SplitRule>().unwrap(), SplitRule::AllHigh);
        assert!("bogus".parse::<SplitRule>().is_err());
        assert_eq!(SplitRule::Threshold(512).classify(600, 511), Split::Low);
    }
}
