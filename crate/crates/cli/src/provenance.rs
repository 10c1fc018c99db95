use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};

/// Hash of the sources this binary was built from.
pub const CODE_HASH: &str = env!("ANYRES_CODE_HASH");

#[derive(Clone, Debug, Serialize)]
pub struct Provenance<'a> {
    pub command: &'a str,
    pub code_hash: &'a str,
    pub version: &'a str,
    pub config_hash: Option<&'a str>,
    pub config: &'a Value,
}

/// Write `name` (a JSON provenance record) into `dir`.
pub fn write(
    dir: &Path,
    name: &str,
    command: &str,
    config_hash: Option<&str>,
    config: &Value,
) -> CliResult<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", dir.display())))?;
    let record = Provenance {
        command,
        code_hash: CODE_HASH,
        version: env!("CARGO_PKG_VERSION"),
        config_hash,
        config,
    };
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(&record)? + "\n";
    std::fs::write(&path, text)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

/// Provenance for a single output file: `<stem>.provenance.json` beside it.
pub fn write_sidecar(
    file: &Path,
    command: &str,
    config_hash: Option<&str>,
    config: &Value,
) -> CliResult<()> {
    let dir = file
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let stem = file
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("output");
    write(
        dir,
        &format!("{stem}.provenance.json"),
        command,
        config_hash,
        config,
    )
}
