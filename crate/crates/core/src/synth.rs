//! Seeded synthetic stand-in for the per-sensor detectors' outputs.
//!
//! Each recording is a sequence of detection events on a frame clock. Event
//! `e` has class `y_e` (UAV with probability `uav_fraction`), and every
//! modality `m` that observes it emits
//!
//! ```text
//! features = delta_m * s(y_e) * u_m + sigma * n,     s(UAV) = +1, s(FA) = -1
//! ```
//!
//! where `u_m` is a unit-norm pattern fixed by the seed and `n` is standard
//! normal noise drawn independently per element and per modality.
//!
//! Projecting modality `m` onto `u_m` gives `N(s * delta_m, sigma^2)`, so the
//! modalities are conditionally independent given the class and the
//! Bayes-optimal classifier for a set `M` of modalities sees an effective
//! separation `d = sqrt(sum_{m in M} delta_m^2) / sigma`. With UAV prior `pi`
//! and `c = ln((1 - pi) / pi) / (2 d)`, its error is
//!
//! ```text
//! err(M) = pi * Phi(c - d) + (1 - pi) * Phi(-c - d)
//! ```
//!
//! which [`bayes_error`] evaluates. Adding a modality never increases it.
//!
//! Thermal and optronic frames of one event share a timestamp (the frame
//! time plus a shared jitter). Radar reports are snapped to the radar's own
//! sampling clock and jittered independently.

use alloc::format;
use alloc::vec::Vec;

use crate::data::{DetectionSample, Label, ModalityId, Recording, ShapeProfile};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, Rng};
use crate::tensor::Tensor;

/// UAV share of the single-modality sample counts (1045 of 3209).
pub const DEFAULT_UAV_FRACTION: f64 = 1045.0 / 3209.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub recordings_per_modality: usize,
    /// Detection events per recording.
    pub samples_per_recording: usize,
    pub uav_fraction: f64,
    /// Class separation per modality, indexed by `ModalityId as usize`.
    pub separation: [f64; 3],
    pub noise_sigma: f64,
    /// Thermal/optronic frame rate in Hz.
    pub frame_rate: f64,
    /// Radar reporting rate in Hz.
    pub radar_rate: f64,
    /// Half-width in seconds of the uniform timestamp jitter.
    pub timestamp_jitter: f64,
    /// Probability that a modality misses an event, by `ModalityId as usize`.
    pub dropout: [f64; 3],
    pub seed: u64,
    pub profile: ShapeProfile,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            recordings_per_modality: 29,
            samples_per_recording: 111,
            uav_fraction: DEFAULT_UAV_FRACTION,
            separation: [1.8; 3],
            noise_sigma: 1.0,
            frame_rate: 2.0,
            radar_rate: 3.0,
            timestamp_jitter: 0.02,
            dropout: [0.0, 0.17, 0.27],
            seed: 0,
            profile: ShapeProfile::paper(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fraction = |x: f64| (0.0..=1.0).contains(&x);
        let nonneg = |x: f64| x.is_finite() && x >= 0.0;
        let positive = |x: f64| x.is_finite() && x > 0.0;
        let mut problems = Vec::new();
        if !fraction(self.uav_fraction) {
            problems.push(format!("uav_fraction {} outside [0, 1]", self.uav_fraction));
        }
        for m in ModalityId::ALL {
            let i = m as usize;
            if !nonneg(self.separation[i]) {
                problems.push(format!(
                    "{} separation {} must be non-negative",
                    m, self.separation[i]
                ));
            }
            if !fraction(self.dropout[i]) {
                problems.push(format!("{} dropout {} outside [0, 1]", m, self.dropout[i]));
            }
        }
        if !nonneg(self.noise_sigma) {
            problems.push(format!(
                "noise_sigma {} must be non-negative",
                self.noise_sigma
            ));
        }
        if !positive(self.frame_rate) {
            problems.push(format!("frame_rate {} must be positive", self.frame_rate));
        }
        if !positive(self.radar_rate) {
            problems.push(format!("radar_rate {} must be positive", self.radar_rate));
        }
        if !nonneg(self.timestamp_jitter) {
            problems.push(format!(
                "timestamp_jitter {} must be non-negative",
                self.timestamp_jitter
            ));
        }
        if let Err(e) = self.profile.validate() {
            problems.push(format!("{e}"));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

/// One recording per modality per recording index, ids shared across modalities.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub thermal: Vec<Recording>,
    pub optronic: Vec<Recording>,
    pub radar: Vec<Recording>,
}

impl SynthDataset {
    pub fn recordings(&self, modality: ModalityId) -> &[Recording] {
        match modality {
            ModalityId::Thermal => &self.thermal,
            ModalityId::Optronic => &self.optronic,
            ModalityId::Radar => &self.radar,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Recording> {
        self.thermal.iter().chain(&self.optronic).chain(&self.radar)
    }
}

const PATTERN_STREAM: u64 = 0x5041_5454;
const EVENT_STREAM: u64 = 0x4556_4e54;
const NOISE_STREAM: u64 = 0x4e4f_4953;

/// Unit-norm class pattern for one modality, fixed by the seed.
///
/// Feature maps `(H, W, C)` get a separable pattern, the outer product of a
/// spatial profile and a channel direction, as an activation map of a
/// detector would. Vectors get an isotropic random direction.
pub fn modality_pattern(seed: u64, modality: ModalityId, shape: &[usize]) -> Tensor<f64> {
    let mut rng = Rng::derived(seed, PATTERN_STREAM + modality as u64);
    let n: usize = shape.iter().product();
    let mut v: Vec<f64> = if let [h, w, c] = *shape {
        let spatial: Vec<f64> = (0..h * w).map(|_| rng.normal()).collect();
        let channel: Vec<f64> = (0..c).map(|_| rng.normal()).collect();
        spatial
            .iter()
            .flat_map(|&a| channel.iter().map(move |&b| a * b))
            .collect()
    } else {
        (0..n).map(|_| rng.normal()).collect()
    };
    let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    Tensor::from_vec(shape, v).expect("pattern length matches shape")
}

pub fn recording_id(index: usize) -> alloc::string::String {
    format!("rec{:03}", index)
}

fn feature_tensor(pattern: &Tensor<f64>, amplitude: f64, sigma: f64, rng: &mut Rng) -> Tensor<f32> {
    let data = pattern
        .data()
        .iter()
        .map(|&u| (amplitude * u + sigma * rng.normal()) as f32)
        .collect();
    Tensor::from_vec(pattern.shape(), data).expect("pattern shape")
}

struct Event {
    time: f64,
    label: Label,
    frame_jitter: f64,
    radar_jitter: f64,
    observed: [bool; 3],
}

/// Generates the synthetic dataset. A pure function of `config`.
pub fn generate_synthetic_dataset(config: &SynthConfig) -> Result<SynthDataset> {
    config.validate()?;
    let patterns: Vec<Tensor<f64>> = ModalityId::ALL
        .iter()
        .map(|&m| modality_pattern(config.seed, m, &config.profile.shape_of(m)))
        .collect();
    let mut out = SynthDataset {
        thermal: Vec::new(),
        optronic: Vec::new(),
        radar: Vec::new(),
    };
    for r in 0..config.recordings_per_modality {
        let [t, o, ra] = generate_recording(config, r, &patterns);
        out.thermal.push(t);
        out.optronic.push(o);
        out.radar.push(ra);
    }
    Ok(out)
}

fn generate_recording(
    config: &SynthConfig,
    index: usize,
    patterns: &[Tensor<f64>],
) -> [Recording; 3] {
    let rec_seed = derive_seed(config.seed, index as u64);
    let mut rng = Rng::derived(rec_seed, EVENT_STREAM);
    let j = config.timestamp_jitter;
    let events: Vec<Event> = (0..config.samples_per_recording)
        .map(|k| {
            let label = if rng.bernoulli(config.uav_fraction) {
                Label::Uav
            } else {
                Label::FalseAlarm
            };
            let frame_jitter = rng.uniform_range(-j, j);
            let radar_jitter = rng.uniform_range(-j, j);
            let mut observed = [false; 3];
            for (i, o) in observed.iter_mut().enumerate() {
                *o = !rng.bernoulli(config.dropout[i]);
            }
            Event {
                time: (k + 1) as f64 / config.frame_rate,
                label,
                frame_jitter,
                radar_jitter,
                observed,
            }
        })
        .collect();

    let id = recording_id(index);
    ModalityId::ALL.map(|m| {
        let mut noise = Rng::derived(rec_seed, NOISE_STREAM + m as u64);
        let pattern = &patterns[m as usize];
        let mut rec = Recording::new(m, id.clone(), config.profile.shape_of(m));
        for e in events.iter().filter(|e| e.observed[m as usize]) {
            let timestamp = match m {
                ModalityId::Radar => {
                    let tick = libm::round(e.time * config.radar_rate) / config.radar_rate;
                    (tick + e.radar_jitter).max(0.0)
                }
                _ => (e.time + e.frame_jitter).max(0.0),
            };
            let amplitude = config.separation[m as usize] * e.label.sign();
            let features = feature_tensor(pattern, amplitude, config.noise_sigma, &mut noise);
            rec.samples.push(DetectionSample {
                timestamp,
                label: e.label,
                features,
            });
        }
        rec.samples
            .sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        rec
    })
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Bayes-optimal error rate for the modalities with the given separations.
pub fn bayes_error(separations: &[f64], sigma: f64, uav_fraction: f64) -> f64 {
    let pi = uav_fraction;
    if pi <= 0.0 || pi >= 1.0 {
        return 0.0;
    }
    let d = libm::sqrt(separations.iter().map(|s| s * s).sum::<f64>()) / sigma;
    if d == 0.0 {
        return pi.min(1.0 - pi);
    }
    if !d.is_finite() {
        return 0.0;
    }
    let c = libm::log((1.0 - pi) / pi) / (2.0 * d);
    pi * normal_cdf(c - d) + (1.0 - pi) * normal_cdf(-c - d)
}
