//! Dataset directories: MSFR files plus a manifest.

use std::path::Path;

use sha2::{Digest, Sha256};
use uavfusion_core::registration::Provenance;
use uavfusion_core::synth::SynthDataset;
use uavfusion_core::{FusedDataset, ModalityId, ModalitySet, Recording, ShapeProfile};

use crate::codec;
use crate::error::{Error, Result};
use crate::manifest::{Manifest, FUSED};
use crate::msfr::{self, FusedRecording};

pub fn raw_file_name(modality: ModalityId, recording_id: &str) -> String {
    format!("{}_{}.msfr", modality.name(), recording_id)
}

pub fn fused_file_name(recording_id: &str) -> String {
    format!("fused_{recording_id}.msfr")
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes every recording, thermal first, then the manifest.
pub fn write_raw_dataset(dir: &Path, data: &SynthDataset) -> Result<Manifest> {
    create_dir(dir)?;
    let mut manifest = Manifest::default();
    for rec in data.iter() {
        let name = raw_file_name(rec.modality, &rec.recording_id);
        msfr::write_recording(rec, &dir.join(&name))?;
        manifest.push(name, rec.modality.name(), rec.len());
    }
    manifest.write(dir)?;
    Ok(manifest)
}

/// Per-modality recordings loaded from a raw dataset directory.
#[derive(Debug, Default)]
pub struct RawDataset {
    pub thermal: Vec<Recording>,
    pub optronic: Vec<Recording>,
    pub radar: Vec<Recording>,
}

impl RawDataset {
    pub fn recordings(&self, modality: ModalityId) -> &[Recording] {
        match modality {
            ModalityId::Thermal => &self.thermal,
            ModalityId::Optronic => &self.optronic,
            ModalityId::Radar => &self.radar,
        }
    }
}

fn check_entry(path: &Path, declared: usize, actual: usize) -> Result<()> {
    if declared != actual {
        return Err(Error::Corrupt(format!(
            "manifest lists {declared} samples, file holds {actual}"
        ))
        .in_file(path));
    }
    Ok(())
}

pub fn read_raw_dataset(dir: &Path) -> Result<RawDataset> {
    let manifest = Manifest::read(dir)?;
    let missing: Vec<&str> = manifest
        .entries
        .iter()
        .filter(|e| !dir.join(&e.file).is_file())
        .map(|e| e.file.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Corrupt(format!(
            "files listed in the manifest are missing: {}",
            missing.join(", ")
        ))
        .in_file(dir));
    }
    let mut out = RawDataset::default();
    for e in &manifest.entries {
        let path = dir.join(&e.file);
        let modality = ModalityId::from_name(&e.modality).ok_or_else(|| {
            Error::Format(format!(
                "manifest entry {} has modality {:?}",
                e.file, e.modality
            ))
        })?;
        let rec = msfr::read_recording(&path)?;
        if rec.modality != modality {
            return Err(Error::Format(format!(
                "manifest says {modality}, file holds {}",
                rec.modality
            ))
            .in_file(&path));
        }
        check_entry(&path, e.sample_count, rec.len())?;
        match modality {
            ModalityId::Thermal => out.thermal.push(rec),
            ModalityId::Optronic => out.optronic.push(rec),
            ModalityId::Radar => out.radar.push(rec),
        }
    }
    Ok(out)
}

/// Writes one fused file per source recording, in provenance order.
pub fn write_fused_dataset(
    dir: &Path,
    data: &FusedDataset,
    profile: &ShapeProfile,
) -> Result<Manifest> {
    create_dir(dir)?;
    let set = data.modality_set;
    let mut manifest = Manifest::default();
    for (id, part) in data.parts() {
        let rec = FusedRecording {
            recording_id: id.to_string(),
            modality_set: set,
            stacked_shape: set.image_shape(profile).to_vec(),
            radar_len: set.radar_width(profile),
            samples: part.to_vec(),
        };
        let name = fused_file_name(id);
        msfr::write_fused(&rec, &dir.join(&name))?;
        manifest.push(name, FUSED, rec.samples.len());
    }
    manifest.write(dir)?;
    Ok(manifest)
}

/// A fused dataset with the tensor shapes declared by its files.
#[derive(Debug, Clone)]
pub struct FusedData {
    pub dataset: FusedDataset,
    /// `None` when the directory lists no files.
    pub stacked_shape: Option<Vec<usize>>,
    pub radar_len: usize,
    /// SHA-256 over the manifest and every listed file, in manifest order.
    pub digest: String,
    /// `(file name, SHA-256)` for every listed file.
    pub file_digests: Vec<(String, String)>,
}

pub fn hex_digest(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn read_fused_dataset(dir: &Path) -> Result<FusedData> {
    let manifest = Manifest::read(dir)?;
    let mut hasher = Sha256::new();
    hasher.update(manifest.to_string().as_bytes());
    let mut set: Option<ModalitySet> = None;
    let mut stacked_shape: Option<Vec<usize>> = None;
    let mut radar_len = 0;
    let mut samples = Vec::new();
    let mut provenance = Vec::new();
    let mut file_digests = Vec::new();
    for e in &manifest.entries {
        let path = dir.join(&e.file);
        if e.modality != FUSED {
            return Err(Error::Format(format!(
                "manifest entry {} is {:?}, expected {FUSED:?}",
                e.file, e.modality
            )));
        }
        let bytes = codec::read_file(&path)?;
        hasher.update(&bytes);
        file_digests.push((e.file.clone(), hex_digest(&bytes)));
        let rec = msfr::decode_fused(&bytes).map_err(|err| err.in_file(&path))?;
        check_entry(&path, e.sample_count, rec.samples.len())?;
        match (&set, &stacked_shape) {
            (Some(s), Some(shape))
                if *s != rec.modality_set
                    || *shape != rec.stacked_shape
                    || radar_len != rec.radar_len =>
            {
                return Err(Error::Format(format!(
                    "{}-modality file with shapes {:?}/{} differs from earlier {}-modality files with {:?}/{}",
                    rec.modality_set, rec.stacked_shape, rec.radar_len, s, shape, radar_len
                ))
                .in_file(&path));
            }
            _ => {}
        }
        set = Some(rec.modality_set);
        stacked_shape = Some(rec.stacked_shape.clone());
        radar_len = rec.radar_len;
        provenance.push(Provenance {
            recording_id: rec.recording_id,
            sample_count: rec.samples.len(),
        });
        samples.extend(rec.samples);
    }
    let dataset = FusedDataset {
        modality_set: set.unwrap_or(ModalitySet::One),
        samples,
        provenance,
        skipped: Vec::new(),
    };
    let digest = hex(&hasher.finalize());
    Ok(FusedData {
        dataset,
        stacked_shape,
        radar_len,
        digest,
        file_digests,
    })
}
