//! Artifact files: grid CSVs and pretty JSON summaries.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use spectra_core::{GridFunction, Potential};

/// Output directory handle; creates parent directories on demand.
pub struct Artifacts {
    root: PathBuf,
}

impl Artifacts {
    pub fn create(root: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Artifacts { root: root.to_path_buf() })
    }

    fn open(&self, name: &str) -> std::io::Result<BufWriter<File>> {
        let path = self.root.join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        Ok(BufWriter::new(File::create(path)?))
    }

    pub fn grid_csv(&self, name: &str, f: &GridFunction) -> std::io::Result<()> {
        let mut w = self.open(name)?;
        f.write_csv(&mut w).map_err(|e| std::io::Error::other(e.to_string()))?;
        w.flush()
    }

    pub fn text(&self, name: &str, body: &str) -> std::io::Result<()> {
        let mut w = self.open(name)?;
        w.write_all(body.as_bytes())?;
        w.flush()
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> std::io::Result<()> {
        let mut body = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        body.push('\n');
        self.text(name, &body)
    }
}

#[derive(Serialize)]
pub struct PotentialInfo {
    pub label: String,
    pub seed: Option<u64>,
    pub min: f64,
    pub max: f64,
}

impl PotentialInfo {
    pub fn of(q: &Potential) -> Self {
        PotentialInfo {
            label: q.label().to_string(),
            seed: q.seed(),
            min: q.min(),
            max: q.max(),
        }
    }
}
