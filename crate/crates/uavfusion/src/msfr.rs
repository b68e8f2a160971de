//! MSFR recording files, plain and fused.
//!
//! Little-endian throughout. A plain file holds one modality:
//!
//! ```text
//! "MSFR" | version u16 = 1 | modality u8 (0 thermal, 1 optronic, 2 radar)
//! | id_len u16 | id UTF-8 | ndims u8 | dims u32 x ndims | count u32
//! | count x (timestamp f64 | label u8 | features f32 x prod(dims))
//! ```
//!
//! A fused file uses modality byte 3 and describes the registered samples
//! derived from one source recording:
//!
//! ```text
//! "MSFR" | version u16 = 1 | 3 | id_len u16 | id | ndims u8 | stacked dims
//! | modality_set u8 (1, 2, 3) | radar_len u32 | count u32
//! | count x (label u8
//!            | per contributing modality, thermal first:
//!                (source index u32 | timestamp f64 | label u8)
//!            | stacked f32 x prod(dims) | radar f32 x radar_len)
//! ```
//!
//! Two-modality and single-modality files have `radar_len = 0`.

use std::path::Path;

use uavfusion_core::registration::Contribution;
use uavfusion_core::{DetectionSample, FusedSample, Label, ModalityId, ModalitySet, Recording};

use crate::codec::{self, Reader};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MSFR";
pub const VERSION: u16 = 1;
pub const FUSED_MODALITY: u8 = 3;

fn read_label(r: &mut Reader<'_>, what: &str) -> Result<Label> {
    let b = r.u8(what)?;
    Label::from_byte(b).ok_or_else(|| Error::Format(format!("{what} byte {b} is neither 0 nor 1")))
}

/// Encodes a recording after checking its invariants.
pub fn encode_recording(rec: &Recording) -> Result<Vec<u8>> {
    rec.validate()?;
    let per_sample = 9 + 4 * rec.shape.iter().product::<usize>();
    let mut out = Vec::with_capacity(32 + rec.recording_id.len() + rec.len() * per_sample);
    out.extend_from_slice(MAGIC);
    codec::put_u16(&mut out, VERSION);
    codec::put_u8(&mut out, rec.modality.as_byte());
    codec::put_str(&mut out, &rec.recording_id)?;
    codec::put_dims(&mut out, &rec.shape)?;
    codec::put_u32_len(&mut out, rec.len(), "sample count")?;
    for s in &rec.samples {
        codec::put_f64(&mut out, s.timestamp);
        codec::put_u8(&mut out, s.label.as_byte());
        codec::put_f32s(&mut out, s.features.data());
    }
    Ok(out)
}

pub fn decode_recording(bytes: &[u8]) -> Result<Recording> {
    let mut r = Reader::new(bytes);
    codec::expect_magic(&mut r, MAGIC, VERSION)?;
    let m = r.u8("modality")?;
    let modality = match ModalityId::from_byte(m) {
        Some(id) => id,
        None if m == FUSED_MODALITY => {
            return Err(Error::Format(
                "fused recording where a single-modality recording was expected".into(),
            ))
        }
        None => return Err(Error::Format(format!("unknown modality byte {m}"))),
    };
    let id = r.str("recording id")?;
    let shape = r.dims("feature shape")?;
    let count = r.u32("sample count")? as usize;
    let mut rec = Recording::new(modality, id, shape);
    for i in 0..count {
        let what = format!("sample {i}");
        let timestamp = r.f64(&what)?;
        let label = read_label(&mut r, &what)?;
        let features = r.tensor(&rec.shape, &what)?;
        rec.samples.push(DetectionSample {
            timestamp,
            label,
            features,
        });
    }
    r.finish()?;
    rec.validate()?;
    Ok(rec)
}

/// Writes `rec` to `path` and returns the number of bytes written. Nothing
/// is written when the recording is invalid.
pub fn write_recording(rec: &Recording, path: &Path) -> Result<u64> {
    let bytes = encode_recording(rec)?;
    codec::write_file(path, &bytes)?;
    Ok(bytes.len() as u64)
}

pub fn read_recording(path: &Path) -> Result<Recording> {
    decode_recording(&codec::read_file(path)?).map_err(|e| e.in_file(path))
}

/// The registered samples derived from one source recording.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedRecording {
    pub recording_id: String,
    pub modality_set: ModalitySet,
    pub stacked_shape: Vec<usize>,
    pub radar_len: usize,
    pub samples: Vec<FusedSample>,
}

impl FusedRecording {
    /// Checks sample shapes, contributors and timestamp order.
    pub fn validate(&self) -> Result<()> {
        let mut prev = f64::NEG_INFINITY;
        for (i, s) in self.samples.iter().enumerate() {
            let bad = |msg: &str| {
                Error::Core(uavfusion_core::Error::InvalidRecording(format!(
                    "{} sample {i}: {msg}",
                    self.recording_id
                )))
            };
            if s.stacked.shape() != self.stacked_shape.as_slice() {
                return Err(bad(&format!(
                    "stacked shape {:?}, header says {:?}",
                    s.stacked.shape(),
                    self.stacked_shape
                )));
            }
            let radar_len = s.radar.as_ref().map_or(0, |r| r.len());
            if radar_len != self.radar_len || s.radar.is_some() != self.modality_set.has_radar() {
                return Err(bad("radar payload does not match the header"));
            }
            if s.optronic.is_some() != (self.modality_set != ModalitySet::One)
                || s.radar_source.is_some() != self.modality_set.has_radar()
            {
                return Err(bad(&format!(
                    "contributors do not match modality set {}",
                    self.modality_set
                )));
            }
            for (m, c) in s.contributions() {
                if !(c.timestamp.is_finite() && c.timestamp >= 0.0) {
                    return Err(bad(&format!(
                        "{m} timestamp {} is not finite and non-negative",
                        c.timestamp
                    )));
                }
            }
            if s.thermal.timestamp < prev {
                return Err(uavfusion_core::Error::Unsorted { index: i }.into());
            }
            prev = s.thermal.timestamp;
        }
        Ok(())
    }
}

fn put_contribution(out: &mut Vec<u8>, c: &Contribution) -> Result<()> {
    codec::put_u32_len(out, c.index, "source index")?;
    codec::put_f64(out, c.timestamp);
    codec::put_u8(out, c.label.as_byte());
    Ok(())
}

fn read_contribution(r: &mut Reader<'_>, what: &str) -> Result<Contribution> {
    let index = r.u32(what)? as usize;
    let timestamp = r.f64(what)?;
    let label = read_label(r, what)?;
    Ok(Contribution {
        index,
        timestamp,
        label,
    })
}

pub fn encode_fused(rec: &FusedRecording) -> Result<Vec<u8>> {
    rec.validate()?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    codec::put_u16(&mut out, VERSION);
    codec::put_u8(&mut out, FUSED_MODALITY);
    codec::put_str(&mut out, &rec.recording_id)?;
    codec::put_dims(&mut out, &rec.stacked_shape)?;
    codec::put_u8(&mut out, rec.modality_set.count() as u8);
    codec::put_u32_len(&mut out, rec.radar_len, "radar length")?;
    codec::put_u32_len(&mut out, rec.samples.len(), "sample count")?;
    for s in &rec.samples {
        codec::put_u8(&mut out, s.label.as_byte());
        for (_, c) in s.contributions() {
            put_contribution(&mut out, &c)?;
        }
        codec::put_f32s(&mut out, s.stacked.data());
        if let Some(radar) = &s.radar {
            codec::put_f32s(&mut out, radar.data());
        }
    }
    Ok(out)
}

pub fn decode_fused(bytes: &[u8]) -> Result<FusedRecording> {
    let mut r = Reader::new(bytes);
    codec::expect_magic(&mut r, MAGIC, VERSION)?;
    let m = r.u8("modality")?;
    if m != FUSED_MODALITY {
        return Err(Error::Format(format!(
            "modality byte {m} where a fused recording (3) was expected"
        )));
    }
    let recording_id = r.str("recording id")?;
    let stacked_shape = r.dims("stacked shape")?;
    let set_byte = r.u8("modality set")?;
    let modality_set = ModalitySet::from_count(set_byte as usize)
        .ok_or_else(|| Error::Format(format!("modality set byte {set_byte} is not 1, 2 or 3")))?;
    let radar_len = r.u32("radar length")? as usize;
    if !modality_set.has_radar() && radar_len != 0 {
        return Err(Error::Format(format!(
            "{modality_set}-modality file declares radar length {radar_len}"
        )));
    }
    let count = r.u32("sample count")? as usize;
    let mut samples = Vec::new();
    for i in 0..count {
        let what = format!("sample {i}");
        let label = read_label(&mut r, &what)?;
        let thermal = read_contribution(&mut r, &what)?;
        let optronic = match modality_set {
            ModalitySet::One => None,
            _ => Some(read_contribution(&mut r, &what)?),
        };
        let radar_source = match modality_set {
            ModalitySet::Three => Some(read_contribution(&mut r, &what)?),
            _ => None,
        };
        let stacked = r.tensor(&stacked_shape, &what)?;
        let radar = match modality_set {
            ModalitySet::Three => Some(r.tensor(&[radar_len], &what)?),
            _ => None,
        };
        samples.push(FusedSample {
            stacked,
            radar,
            label,
            thermal,
            optronic,
            radar_source,
        });
    }
    r.finish()?;
    let rec = FusedRecording {
        recording_id,
        modality_set,
        stacked_shape,
        radar_len,
        samples,
    };
    rec.validate()?;
    Ok(rec)
}

pub fn write_fused(rec: &FusedRecording, path: &Path) -> Result<u64> {
    let bytes = encode_fused(rec)?;
    codec::write_file(path, &bytes)?;
    Ok(bytes.len() as u64)
}

pub fn read_fused(path: &Path) -> Result<FusedRecording> {
    decode_fused(&codec::read_file(path)?).map_err(|e| e.in_file(path))
}
