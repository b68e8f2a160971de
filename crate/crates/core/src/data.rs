//! Per-sensor detection samples and recordings.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Ground-truth or predicted class. UAV is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    FalseAlarm = 0,
    Uav = 1,
}

impl Label {
    /// UAV iff `p > 0.5`; a probability of exactly one half is a false alarm.
    pub fn from_probability(p: f64) -> Label {
        if p > 0.5 {
            Label::Uav
        } else {
            Label::FalseAlarm
        }
    }

    pub fn from_byte(b: u8) -> Option<Label> {
        match b {
            0 => Some(Label::FalseAlarm),
            1 => Some(Label::Uav),
            _ => None,
        }
    }

    pub fn as_byte(self) -> u8 {
        self as u8
    }

    /// 1.0 for UAV, 0.0 for false alarm.
    pub fn target(self) -> f64 {
        self as u8 as f64
    }

    /// +1 for UAV, -1 for false alarm.
    pub fn sign(self) -> f64 {
        match self {
            Label::Uav => 1.0,
            Label::FalseAlarm => -1.0,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Uav => "UAV",
            Label::FalseAlarm => "FA",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModalityId {
    Thermal = 0,
    Optronic = 1,
    Radar = 2,
}

impl ModalityId {
    pub const ALL: [ModalityId; 3] = [ModalityId::Thermal, ModalityId::Optronic, ModalityId::Radar];

    pub fn from_byte(b: u8) -> Option<ModalityId> {
        match b {
            0 => Some(ModalityId::Thermal),
            1 => Some(ModalityId::Optronic),
            2 => Some(ModalityId::Radar),
            _ => None,
        }
    }

    pub fn as_byte(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            ModalityId::Thermal => "thermal",
            ModalityId::Optronic => "optronic",
            ModalityId::Radar => "radar",
        }
    }

    pub fn from_name(s: &str) -> Option<ModalityId> {
        ModalityId::ALL.into_iter().find(|m| m.name() == s)
    }
}

impl fmt::Display for ModalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-modality feature shapes. Fixed for a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShapeProfile {
    pub thermal: [usize; 3],
    pub optronic: [usize; 3],
    pub radar: usize,
}

impl ShapeProfile {
    /// Feature-map sizes of the upstream detectors: thermal 7x7x1024,
    /// optronic 7x7x512, radar 1664.
    pub const fn paper() -> Self {
        ShapeProfile {
            thermal: [7, 7, 1024],
            optronic: [7, 7, 512],
            radar: 1664,
        }
    }

    /// Same spatial layout with channel counts divided by 32.
    pub const fn reduced() -> Self {
        ShapeProfile {
            thermal: [7, 7, 32],
            optronic: [7, 7, 16],
            radar: 52,
        }
    }

    pub fn shape_of(&self, modality: ModalityId) -> Vec<usize> {
        match modality {
            ModalityId::Thermal => self.thermal.to_vec(),
            ModalityId::Optronic => self.optronic.to_vec(),
            ModalityId::Radar => vec![self.radar],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all_positive =
            self.thermal.iter().chain(&self.optronic).all(|&d| d > 0) && self.radar > 0;
        if !all_positive {
            return Err(Error::Config(format!(
                "shape profile dimensions must be positive: {:?}",
                self
            )));
        }
        if self.thermal[..2] != self.optronic[..2] {
            return Err(Error::Config(format!(
                "thermal and optronic spatial sizes differ: {:?} vs {:?}",
                self.thermal, self.optronic
            )));
        }
        Ok(())
    }
}

/// Which modalities feed a fusion model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModalitySet {
    /// Thermal only.
    One,
    /// Thermal and optronic, channel-stacked.
    Two,
    /// Stacked thermal-optronic plus the radar vector.
    Three,
}

impl ModalitySet {
    pub const ALL: [ModalitySet; 3] = [ModalitySet::One, ModalitySet::Two, ModalitySet::Three];

    pub fn count(self) -> usize {
        match self {
            ModalitySet::One => 1,
            ModalitySet::Two => 2,
            ModalitySet::Three => 3,
        }
    }

    pub fn from_count(n: usize) -> Option<ModalitySet> {
        match n {
            1 => Some(ModalitySet::One),
            2 => Some(ModalitySet::Two),
            3 => Some(ModalitySet::Three),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModalitySet::One => "one",
            ModalitySet::Two => "two",
            ModalitySet::Three => "three",
        }
    }

    pub fn from_name(s: &str) -> Option<ModalitySet> {
        ModalitySet::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn modalities(self) -> &'static [ModalityId] {
        match self {
            ModalitySet::One => &[ModalityId::Thermal],
            ModalitySet::Two => &[ModalityId::Thermal, ModalityId::Optronic],
            ModalitySet::Three => &ModalityId::ALL,
        }
    }

    pub fn has_radar(self) -> bool {
        self == ModalitySet::Three
    }

    /// Shape of the image-like input: thermal alone, or thermal and
    /// optronic stacked along channels.
    pub fn image_shape(self, profile: &ShapeProfile) -> [usize; 3] {
        let [h, w, ct] = profile.thermal;
        match self {
            ModalitySet::One => [h, w, ct],
            _ => [h, w, ct + profile.optronic[2]],
        }
    }

    pub fn radar_width(self, profile: &ShapeProfile) -> usize {
        if self.has_radar() {
            profile.radar
        } else {
            0
        }
    }
}

impl fmt::Display for ModalitySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Anything with a timestamp and a class, so registration can match streams
/// of raw and already-fused samples alike.
pub trait Timed {
    fn timestamp(&self) -> f64;
    fn label(&self) -> Label;
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSample {
    /// Seconds since the start of the recording.
    pub timestamp: f64,
    pub label: Label,
    pub features: Tensor<f32>,
}

impl Timed for DetectionSample {
    fn timestamp(&self) -> f64 {
        self.timestamp
    }
    fn label(&self) -> Label {
        self.label
    }
}

impl Timed for (f64, Label) {
    fn timestamp(&self) -> f64 {
        self.0
    }
    fn label(&self) -> Label {
        self.1
    }
}

/// Time-ordered samples of one modality from one capture session.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub modality: ModalityId,
    pub recording_id: String,
    /// Feature shape shared by every sample.
    pub shape: Vec<usize>,
    pub samples: Vec<DetectionSample>,
}

impl Recording {
    pub fn new(modality: ModalityId, recording_id: impl Into<String>, shape: Vec<usize>) -> Self {
        Recording {
            modality,
            recording_id: recording_id.into(),
            shape,
            samples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Checks sample shapes, timestamp validity and ordering.
    pub fn validate(&self) -> Result<()> {
        let mut prev = f64::NEG_INFINITY;
        for (i, s) in self.samples.iter().enumerate() {
            if !(s.timestamp.is_finite() && s.timestamp >= 0.0) {
                return Err(Error::InvalidRecording(format!(
                    "{}: sample {} has invalid timestamp {}",
                    self.recording_id, i, s.timestamp
                )));
            }
            if s.timestamp < prev {
                return Err(Error::Unsorted { index: i });
            }
            prev = s.timestamp;
            if s.features.shape() != self.shape.as_slice() {
                return Err(Error::InvalidRecording(format!(
                    "{}: sample {} has shape {:?}, recording shape is {:?}",
                    self.recording_id,
                    i,
                    s.features.shape(),
                    self.shape
                )));
            }
        }
        Ok(())
    }

    pub fn uav_count(&self) -> usize {
        self.samples
            .iter()
            .filter(|s| s.label == Label::Uav)
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_threshold_is_strict() {
        assert_eq!(Label::from_probability(0.5), Label::FalseAlarm);
        let next = f64::from_bits(0.5f64.to_bits() + 1);
        assert_eq!(Label::from_probability(next), Label::Uav);
    }

    #[test]
    fn recording_validation() {
        let mut r = Recording::new(ModalityId::Radar, "r0", vec![3]);
        r.samples.push(DetectionSample {
            timestamp: 1.0,
            label: Label::Uav,
            features: Tensor::zeros(&[3]),
        });
        r.samples.push(DetectionSample {
            timestamp: 0.5,
            label: Label::Uav,
            features: Tensor::zeros(&[3]),
        });
        assert_eq!(r.validate(), Err(Error::Unsorted { index: 1 }));
        r.samples[1].timestamp = 2.0;
        assert!(r.validate().is_ok());
        r.samples[1].features = Tensor::zeros(&[4]);
        assert!(matches!(r.validate(), Err(Error::InvalidRecording(_))));
    }

    #[test]
    fn profiles() {
        assert!(ShapeProfile::paper().validate().is_ok());
        assert!(ShapeProfile::reduced().validate().is_ok());
        assert_eq!(
            ShapeProfile::paper().shape_of(ModalityId::Radar),
            vec![1664]
        );
    }
}
