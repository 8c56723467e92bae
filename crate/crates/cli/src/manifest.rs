//! Run manifests: everything needed to reconstruct a run from its inputs.

use crate::failure::CliResult;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Sampler health counters summed over every chain of the run.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Diagnostics {
    pub ess_warnings: usize,
    pub jitter_retries: usize,
    pub noise_refreshes: usize,
    pub failed_replications: usize,
    /// Free-form facts such as rejected rows or acceptance rates.
    pub notes: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    pub seed: u64,
    pub config: serde_json::Value,
    pub stages: Vec<StageTiming>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub diagnostics: Diagnostics,
    #[serde(skip)]
    out_dir: PathBuf,
}

pub fn sha256_file(path: &Path) -> CliResult<InputDigest> {
    let bytes = fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(InputDigest {
        path: path.display().to_string(),
        bytes: bytes.len() as u64,
        sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
    })
}

impl RunManifest {
    pub fn new(out_dir: &Path, seed: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: std::env::args().collect(),
            seed,
            config: serde_json::Value::Null,
            stages: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            diagnostics: Diagnostics::default(),
            out_dir: out_dir.to_path_buf(),
        }
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn set_config<T: Serialize>(&mut self, config: &T) -> CliResult<()> {
        self.config = serde_json::to_value(config)?;
        Ok(())
    }

    pub fn add_input(&mut self, path: &Path) -> CliResult<()> {
        self.inputs.push(sha256_file(path)?);
        Ok(())
    }

    /// Times `f` and records it as a stage.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.stages.push(StageTiming { stage: name.into(), seconds: start.elapsed().as_secs_f64() });
        out
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.diagnostics.notes.insert(key.into(), v);
    }

    /// Path for an artifact inside the output directory; the name is recorded.
    pub fn output(&mut self, name: &str) -> CliResult<PathBuf> {
        fs::create_dir_all(&self.out_dir)?;
        self.outputs.push(name.into());
        Ok(self.out_dir.join(name))
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> CliResult<PathBuf> {
        let path = self.output(name)?;
        fs::write(&path, text)?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// Writes `manifest.json` into the output directory.
    pub fn finish(mut self) -> CliResult<PathBuf> {
        fs::create_dir_all(&self.out_dir)?;
        self.outputs.push("manifest.json".into());
        let path = self.out_dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&self)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_content() {
        let dir = std::env::temp_dir().join(format!("ncb-digest-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let p = dir.join("abc.txt");
        fs::write(&p, "abc").unwrap();
        let d = sha256_file(&p).unwrap();
        assert_eq!(d.sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(d.bytes, 3);
        fs::remove_dir_all(&dir).unwrap();
    }
}
