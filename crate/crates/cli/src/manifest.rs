use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub const FILE_NAME: &str = "manifest.json";

/// Record of one run. `config` is fully resolved (defaults filled, flag
/// overrides applied, absolute input paths), so passing the manifest back
/// through `--config` repeats the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: Value,
    pub inputs: BTreeMap<String, PathBuf>,
    pub outputs: BTreeMap<String, PathBuf>,
    pub seed: Option<u64>,
    pub versions: BTreeMap<String, String>,
    pub timings: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: Value, seed: Option<u64>) -> Self {
        let versions = BTreeMap::from([("smsrecon".to_string(), env!("CARGO_PKG_VERSION").to_string())]);
        Self {
            subcommand: subcommand.to_string(),
            config,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            seed,
            versions,
            timings: BTreeMap::new(),
        }
    }

    pub fn write(&mut self, out_dir: &Path) -> Result<PathBuf, CliError> {
        let path = out_dir.join(FILE_NAME);
        self.outputs.insert("manifest".into(), path.clone());
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Config(e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

/// A loaded `--config` file: either a plain config or a previous run's
/// manifest, in which case its resolved config and inputs are reused.
pub struct ConfigSource {
    pub value: Value,
    /// Directory relative input paths are resolved against.
    pub base: PathBuf,
    pub inputs: BTreeMap<String, PathBuf>,
}

pub fn load_config(path: &Path, subcommand: &str) -> Result<ConfigSource, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    if value.get("subcommand").is_some() && value.get("config").is_some() {
        let m: RunManifest =
            serde_json::from_value(value).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if m.subcommand != subcommand {
            return Err(CliError::Config(format!(
                "manifest is for `{}`, not `{subcommand}`",
                m.subcommand
            )));
        }
        return Ok(ConfigSource { value: m.config, base, inputs: m.inputs });
    }
    Ok(ConfigSource { value, base, inputs: BTreeMap::new() })
}

pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    let joined = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    std::path::absolute(&joined).unwrap_or(joined)
}
