//! Dataset manifest: one tab-separated `file, modality, sample count` record
//! per line.

use std::fmt;
use std::path::Path;

use crate::codec;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const FUSED: &str = "fused";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub file: String,
    /// `thermal`, `optronic`, `radar` or `fused`.
    pub modality: String,
    pub sample_count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn push(
        &mut self,
        file: impl Into<String>,
        modality: impl Into<String>,
        sample_count: usize,
    ) {
        self.entries.push(ManifestEntry {
            file: file.into(),
            modality: modality.into(),
            sample_count,
        });
    }

    pub fn parse(text: &str) -> Result<Manifest> {
        let mut m = Manifest::default();
        for (n, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [file, modality, count] = fields[..] else {
                return Err(Error::Format(format!(
                    "manifest line {}: expected 3 tab-separated fields",
                    n + 1
                )));
            };
            if file.is_empty() || file.contains(['/', '\\']) {
                return Err(Error::Format(format!(
                    "manifest line {}: bad file name {file:?}",
                    n + 1
                )));
            }
            let sample_count = count.parse().map_err(|_| {
                Error::Format(format!(
                    "manifest line {}: bad sample count {count:?}",
                    n + 1
                ))
            })?;
            m.push(file, modality, sample_count);
        }
        Ok(m)
    }

    pub fn read(dir: &Path) -> Result<Manifest> {
        let path = dir.join(MANIFEST_FILE);
        let bytes = codec::read_file(&path)?;
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::Format("manifest is not UTF-8".into()).in_file(&path))?;
        Manifest::parse(&text).map_err(|e| e.in_file(&path))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        codec::write_file(&dir.join(MANIFEST_FILE), self.to_string().as_bytes())
    }
}

impl fmt::Display for Manifest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(f, "{}\t{}\t{}", e.file, e.modality, e.sample_count)?;
        }
        Ok(())
    }
}
