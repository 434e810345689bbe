//! Output files stamped with a reproducibility header.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Writes files into one directory, each starting with the same comment line.
#[derive(Debug, Clone)]
pub struct OutputDir {
    dir: PathBuf,
    header: String,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(dir: &Path, command: &str, config_hash: &str, seed: u64) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            header: header_line(command, config_hash, seed),
            written: Vec::new(),
        })
    }

    pub fn header(&self) -> &str {
        &self.header
    }

    /// Writes `header + body` to `name`.
    pub fn write(&mut self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let mut text = String::with_capacity(self.header.len() + body.len() + 1);
        text.push_str(&self.header);
        text.push('\n');
        text.push_str(body);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Serialises rows through a CSV writer and writes them to `name`.
    pub fn write_csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<PathBuf>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(header)?;
        for r in rows {
            wtr.write_record(r)?;
        }
        let body = String::from_utf8(wtr.into_inner()?)?;
        self.write(name, &body)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

pub fn header_line(command: &str, config_hash: &str, seed: u64) -> String {
    format!(
        "# iclv {} command={command} config_hash={config_hash} seed={seed}",
        env!("CARGO_PKG_VERSION")
    )
}

/// Body of an output file with its header comment removed.
pub fn strip_header(text: &str) -> &str {
    match text.strip_prefix("# iclv ") {
        Some(rest) => rest.split_once('\n').map_or("", |(_, b)| b),
        None => text,
    }
}
