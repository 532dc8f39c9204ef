//! Artifact directories: atomic writes and the manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::ResolvedConfig;

pub const MANIFEST: &str = "manifest.json";

pub fn version() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub subcommand: String,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub artifacts: Vec<String>,
}

/// Write `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create a temporary file in {}", dir.display()))?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("cannot move artifact into place at {}", path.display()))?;
    Ok(())
}

/// An output directory collecting the artifacts of one run.
pub struct RunDir {
    path: PathBuf,
    artifacts: Vec<String>,
}

impl RunDir {
    pub fn create(path: &Path) -> Result<Self> {
        std::fs::create_dir_all(path)
            .with_context(|| format!("--out: cannot create {}", path.display()))?;
        Ok(Self {
            path: path.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        write_atomic(&self.path.join(name), contents.as_ref())?;
        if !self.artifacts.iter().any(|a| a == name) {
            self.artifacts.push(name.to_string());
        }
        Ok(())
    }

    /// Write the manifest last, so a directory with a manifest is complete.
    pub fn finish(mut self, config: &ResolvedConfig) -> Result<()> {
        self.artifacts.sort();
        let manifest = Manifest {
            version: version(),
            subcommand: config.subcommand.clone(),
            config: serde_json::to_value(config)?,
            config_hash: config.hash(),
            artifacts: self.artifacts,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        write_atomic(&self.path.join(MANIFEST), text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_artifacts_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let mut run = RunDir::create(dir.path()).unwrap();
        run.write("b.csv", "x\n").unwrap();
        run.write("a.csv", "y\n").unwrap();
        run.write("b.csv", "z\n").unwrap();
        let cfg = ResolvedConfig {
            subcommand: "bulk".into(),
            seed: 0,
            output_dir: dir.path().to_path_buf(),
            quadrature_points: None,
            eigensolver_cap: 1,
            parameters: serde_json::Value::Null,
        };
        run.finish(&cfg).unwrap();
        let m: Manifest =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(MANIFEST)).unwrap()).unwrap();
        assert_eq!(m.artifacts, ["a.csv", "b.csv"]);
        assert_eq!(std::fs::read_to_string(dir.path().join("b.csv")).unwrap(), "z\n");
        assert_eq!(m.config_hash, cfg.hash());
    }
}
