//! Flat `key = value` run configuration.
//!
//! Blank lines and text after `#` are ignored. Every key is optional;
//! unknown and repeated keys are rejected. Command-line flags are applied
//! after the file through the same [`RunConfig::set`].

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use uavfusion_core::{MatchConfig, ModalitySet, ModelSpec, ShapeProfile, SynthConfig, TrainConfig};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("configuration key `{0}` is set twice")]
    Duplicate(String),
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("bad value {value:?} for `{key}`: {reason}")]
    Value {
        key: String,
        value: String,
        reason: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read {}: {reason}", path.display())]
    Unreadable { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileName {
    Paper,
    Reduced,
}

impl ProfileName {
    pub fn shapes(self) -> ShapeProfile {
        match self {
            ProfileName::Paper => ShapeProfile::paper(),
            ProfileName::Reduced => ShapeProfile::reduced(),
        }
    }

    /// Convolution filters and dense units used unless configured.
    pub fn default_widths(self) -> (usize, usize) {
        match self {
            ProfileName::Paper => (512, 512),
            ProfileName::Reduced => (16, 32),
        }
    }
}

impl FromStr for ProfileName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "paper" => Ok(ProfileName::Paper),
            "reduced" => Ok(ProfileName::Reduced),
            _ => Err("expected `paper` or `reduced`".into()),
        }
    }
}

impl fmt::Display for ProfileName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileName::Paper => "paper",
            ProfileName::Reduced => "reduced",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub profile: ProfileName,
    pub modalities: ModalitySet,
    pub repeats: usize,
    /// Recordings (the last ones by id) held out for testing by `register`.
    pub test_recordings: usize,
    pub data_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub models: Vec<PathBuf>,
    /// `seed` and `profile` are taken from the fields above.
    pub synth: SynthConfig,
    pub matching: MatchConfig,
    pub conv_filters: Option<usize>,
    pub kernel: [usize; 2],
    pub dense_units: Option<usize>,
    pub dropout_rate: f64,
    /// `seed` is taken from the field above.
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            profile: ProfileName::Paper,
            modalities: ModalitySet::Three,
            repeats: 1,
            test_recordings: 3,
            data_dir: None,
            out: None,
            models: Vec::new(),
            synth: SynthConfig::default(),
            matching: MatchConfig::default(),
            conv_filters: None,
            kernel: [3, 3],
            dense_units: None,
            dropout_rate: 0.5,
            train: TrainConfig::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Value {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn parse_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: n + 1,
                    text: raw.into(),
                });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line: n + 1,
                    text: raw.into(),
                });
            }
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::Duplicate(key.into()));
            }
            cfg.set(key, value.trim())?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Unreadable {
            path: path.into(),
            reason: e.to_string(),
        })?;
        RunConfig::from_text(&text)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let s = &mut self.synth;
        let t = &mut self.train;
        match key {
            "seed" => self.seed = parse(key, value)?,
            "profile" => self.profile = parse(key, value)?,
            "modalities" => {
                self.modalities =
                    ModalitySet::from_name(value).ok_or_else(|| ConfigError::Value {
                        key: key.into(),
                        value: value.into(),
                        reason: "expected `one`, `two` or `three`".into(),
                    })?
            }
            "repeats" => self.repeats = parse(key, value)?,
            "test_recordings" => self.test_recordings = parse(key, value)?,
            "data_dir" => self.data_dir = parse_path(value),
            "out" => self.out = parse_path(value),
            "models" => {
                self.models = value
                    .split(',')
                    .map(str::trim)
                    .filter(|v| !v.is_empty())
                    .map(PathBuf::from)
                    .collect()
            }
            "recordings_per_modality" => s.recordings_per_modality = parse(key, value)?,
            "samples_per_recording" => s.samples_per_recording = parse(key, value)?,
            "uav_fraction" => s.uav_fraction = parse(key, value)?,
            "separation_thermal" => s.separation[0] = parse(key, value)?,
            "separation_optronic" => s.separation[1] = parse(key, value)?,
            "separation_radar" => s.separation[2] = parse(key, value)?,
            "noise_sigma" => s.noise_sigma = parse(key, value)?,
            "frame_rate" => s.frame_rate = parse(key, value)?,
            "radar_rate" => s.radar_rate = parse(key, value)?,
            "timestamp_jitter" => s.timestamp_jitter = parse(key, value)?,
            "dropout_thermal" => s.dropout[0] = parse(key, value)?,
            "dropout_optronic" => s.dropout[1] = parse(key, value)?,
            "dropout_radar" => s.dropout[2] = parse(key, value)?,
            "frame_tolerance" => self.matching.frame_tolerance = parse(key, value)?,
            "radar_tolerance" => self.matching.radar_tolerance = parse(key, value)?,
            "label_constrained" => self.matching.label_constrained = parse(key, value)?,
            "one_to_one" => self.matching.one_to_one = parse(key, value)?,
            "conv_filters" => self.conv_filters = Some(parse(key, value)?),
            "kernel_height" => self.kernel[0] = parse(key, value)?,
            "kernel_width" => self.kernel[1] = parse(key, value)?,
            "dense_units" => self.dense_units = Some(parse(key, value)?),
            "dropout_rate" => self.dropout_rate = parse(key, value)?,
            "learning_rate" => t.optimizer.lr0 = parse(key, value)?,
            "lr_decay" => t.optimizer.decay = parse(key, value)?,
            "rho" => t.optimizer.rho = parse(key, value)?,
            "epsilon" => t.optimizer.eps = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "max_epochs" => t.max_epochs = parse(key, value)?,
            "patience" => t.patience = parse(key, value)?,
            "val_fraction" => t.val_fraction = parse(key, value)?,
            "restore_best" => t.restore_best = parse(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seed,
            profile: self.profile.shapes(),
            ..self.synth.clone()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train
        }
    }

    pub fn model_spec(&self) -> ModelSpec {
        let (filters, units) = self.profile.default_widths();
        ModelSpec {
            modality_set: self.modalities,
            profile: self.profile.shapes(),
            conv_filters: self.conv_filters.unwrap_or(filters),
            kernel: self.kernel,
            dense_units: self.dense_units.unwrap_or(units),
            dropout_rate: self.dropout_rate,
        }
    }

    /// Checks every section; the message lists the first failing one.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: uavfusion_core::Error| match e {
            uavfusion_core::Error::Config(msg) => ConfigError::Invalid(msg),
            e => ConfigError::Invalid(e.to_string()),
        };
        self.synth_config().validate().map_err(invalid)?;
        self.matching.validate().map_err(invalid)?;
        self.model_spec().validate().map_err(invalid)?;
        self.train_config().validate().map_err(invalid)?;
        if self.repeats == 0 {
            return Err(ConfigError::Invalid("repeats must be at least 1".into()));
        }
        Ok(())
    }

    /// Every key with its effective value, in a form [`RunConfig::from_text`]
    /// reads back.
    pub fn render(&self) -> String {
        let spec = self.model_spec();
        let s = self.synth_config();
        let t = self.train_config();
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        };
        let models: Vec<String> = self
            .models
            .iter()
            .map(|p| p.display().to_string())
            .collect();
        let rows: Vec<(&str, String)> = vec![
            ("seed", self.seed.to_string()),
            ("profile", self.profile.to_string()),
            ("modalities", self.modalities.name().into()),
            ("repeats", self.repeats.to_string()),
            ("test_recordings", self.test_recordings.to_string()),
            ("data_dir", path(&self.data_dir)),
            ("out", path(&self.out)),
            ("models", models.join(",")),
            (
                "recordings_per_modality",
                s.recordings_per_modality.to_string(),
            ),
            ("samples_per_recording", s.samples_per_recording.to_string()),
            ("uav_fraction", s.uav_fraction.to_string()),
            ("separation_thermal", s.separation[0].to_string()),
            ("separation_optronic", s.separation[1].to_string()),
            ("separation_radar", s.separation[2].to_string()),
            ("noise_sigma", s.noise_sigma.to_string()),
            ("frame_rate", s.frame_rate.to_string()),
            ("radar_rate", s.radar_rate.to_string()),
            ("timestamp_jitter", s.timestamp_jitter.to_string()),
            ("dropout_thermal", s.dropout[0].to_string()),
            ("dropout_optronic", s.dropout[1].to_string()),
            ("dropout_radar", s.dropout[2].to_string()),
            ("frame_tolerance", self.matching.frame_tolerance.to_string()),
            ("radar_tolerance", self.matching.radar_tolerance.to_string()),
            (
                "label_constrained",
                self.matching.label_constrained.to_string(),
            ),
            ("one_to_one", self.matching.one_to_one.to_string()),
            ("conv_filters", spec.conv_filters.to_string()),
            ("kernel_height", spec.kernel[0].to_string()),
            ("kernel_width", spec.kernel[1].to_string()),
            ("dense_units", spec.dense_units.to_string()),
            ("dropout_rate", spec.dropout_rate.to_string()),
            ("learning_rate", t.optimizer.lr0.to_string()),
            ("lr_decay", t.optimizer.decay.to_string()),
            ("rho", t.optimizer.rho.to_string()),
            ("epsilon", t.optimizer.eps.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("max_epochs", t.max_epochs.to_string()),
            ("patience", t.patience.to_string()),
            ("val_fraction", t.val_fraction.to_string()),
            ("restore_best", t.restore_best.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}
