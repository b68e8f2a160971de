//! `generate`, `register`, `train` and `evaluate`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use uavfusion_core::metrics::{classification_report, confusion_at_threshold, roc_curve};
use uavfusion_core::registration::fuse_dataset;
use uavfusion_core::synth::generate_synthetic_dataset;
use uavfusion_core::train::{self, init_seed, repeat_seed, split_indices};
use uavfusion_core::{FusedSample, Label, ModalityId, ModalitySet, Model, Recording, Rng};

use crate::codec;
use crate::config::{ConfigError, RunConfig};
use crate::dataset::{self, FusedData};
use crate::error::Error;
use crate::manifest::{Manifest, FUSED};
use crate::msfr::{self, FusedRecording};
use crate::report::{
    self, DatasetDoc, EvaluationDocument, FileDigest, ModelEvaluation, TrainingDocument,
    ValidationDoc,
};
use crate::weights;

pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.txt";
pub const EVALUATION_FILE: &str = "evaluation.json";
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Parser)]
#[command(
    name = "uavfusion",
    version,
    about = "Multi-sensor late-fusion UAV classification pipeline"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic dataset: MSFR files per modality and recording.
    Generate,
    /// Register modalities and write train/test fused datasets.
    Register,
    /// Train `repeats` models on a fused dataset.
    Train,
    /// Evaluate trained models on a fused dataset.
    Evaluate,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// `key = value` configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Shape profile: `paper` or `reduced`.
    #[arg(long, global = true, value_name = "NAME")]
    pub profile: Option<String>,
    /// Modality set: `one`, `two` or `three`.
    #[arg(long, global = true, value_name = "SET")]
    pub modalities: Option<String>,
    #[arg(long, global = true, value_name = "N")]
    pub repeats: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Input dataset directory (raw for `register`, fused otherwise).
    #[arg(long, global = true, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Weights file to evaluate; repeatable.
    #[arg(long = "model", global = true, value_name = "PATH")]
    pub models: Vec<PathBuf>,
}

/// A failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const PRECONDITION: i32 = 4;
    pub const INCOMPATIBLE: i32 = 5;
    pub const UNEXPECTED: i32 = 1;

    fn new(code: i32, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    fn config(message: impl Into<String>) -> Self {
        CliError::new(Self::CONFIG, message)
    }

    fn data(message: impl Into<String>) -> Self {
        CliError::new(Self::DATA, message)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::config(e.to_string())
    }
}

/// Reading or writing inputs: bad files are data errors, unwritable outputs
/// unexpected faults.
fn input_error(e: Error) -> CliError {
    CliError::data(e.to_string())
}

fn output_error(e: Error) -> CliError {
    CliError::new(CliError::UNEXPECTED, e.to_string())
}

fn core_error(e: uavfusion_core::Error) -> CliError {
    use uavfusion_core::Error as E;
    let code = match &e {
        E::Config(_) => CliError::CONFIG,
        E::Precondition(_) => CliError::PRECONDITION,
        E::Shape { .. } => CliError::INCOMPATIBLE,
        E::InvalidRecording(_) | E::Unsorted { .. } | E::UndefinedMetric(_) => CliError::DATA,
        E::NumericFault(_) => CliError::UNEXPECTED,
    };
    CliError::new(code, e.to_string())
}

/// Loads the configuration file, then applies command-line overrides.
pub fn resolve_config(args: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    let mut set = |key: &str, value: Option<String>| -> Result<(), ConfigError> {
        match value {
            Some(v) => cfg.set(key, &v),
            None => Ok(()),
        }
    };
    set("seed", args.seed.map(|v| v.to_string()))?;
    set("profile", args.profile.clone())?;
    set("modalities", args.modalities.clone())?;
    set("repeats", args.repeats.map(|v| v.to_string()))?;
    set("out", args.out.as_ref().map(|p| p.display().to_string()))?;
    set(
        "data_dir",
        args.data.as_ref().map(|p| p.display().to_string()),
    )?;
    if !args.models.is_empty() {
        cfg.models = args.models.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve_config(&cli.common)?;
    info!("resolved configuration:\n{}", cfg.render());
    match cli.command {
        Command::Generate => cmd_generate(&cfg),
        Command::Register => cmd_register(&cfg),
        Command::Train => cmd_train(&cfg),
        Command::Evaluate => cmd_evaluate(&cfg),
    }
}

fn out_dir(cfg: &RunConfig) -> Result<&Path, CliError> {
    let dir = cfg
        .out
        .as_deref()
        .ok_or_else(|| CliError::config("no output directory: pass --out or set `out`"))?;
    std::fs::create_dir_all(dir).map_err(|e| output_error(Error::io(dir, e)))?;
    codec::write_file(&dir.join(RESOLVED_CONFIG_FILE), cfg.render().as_bytes())
        .map_err(output_error)?;
    Ok(dir)
}

fn data_dir(cfg: &RunConfig) -> Result<&Path, CliError> {
    cfg.data_dir
        .as_deref()
        .ok_or_else(|| CliError::config("no input directory: pass --data or set `data_dir`"))
}

pub fn cmd_generate(cfg: &RunConfig) -> Result<(), CliError> {
    let out = out_dir(cfg)?;
    let data = generate_synthetic_dataset(&cfg.synth_config()).map_err(core_error)?;
    let manifest = dataset::write_raw_dataset(out, &data).map_err(output_error)?;
    for m in ModalityId::ALL {
        let recs = data.recordings(m);
        let samples: usize = recs.iter().map(Recording::len).sum();
        println!("{m}: {} recordings, {samples} samples", recs.len());
    }
    info!(
        "wrote {} files to {}",
        manifest.entries.len(),
        out.display()
    );
    Ok(())
}

/// Counts per modality set, split into train and test recordings.
#[derive(Debug, Default, Clone, Copy)]
struct SplitCounts {
    train: usize,
    test: usize,
}

pub fn cmd_register(cfg: &RunConfig) -> Result<(), CliError> {
    let input = data_dir(cfg)?;
    let raw = dataset::read_raw_dataset(input).map_err(input_error)?;
    let out = out_dir(cfg)?;
    let set = cfg.modalities;

    let index = |recs: &[Recording]| -> BTreeMap<String, usize> {
        recs.iter()
            .enumerate()
            .map(|(i, r)| (r.recording_id.clone(), i))
            .collect()
    };
    let thermal = index(&raw.thermal);
    let optronic = index(&raw.optronic);
    let radar = index(&raw.radar);

    let mut missing = Vec::new();
    for id in thermal.keys() {
        for (m, map) in [
            (ModalityId::Optronic, &optronic),
            (ModalityId::Radar, &radar),
        ] {
            if set.modalities().contains(&m) && !map.contains_key(id) {
                missing.push(format!("{id} ({m})"));
            }
        }
    }
    if !missing.is_empty() {
        return Err(CliError::data(format!(
            "{}-modality registration needs counterparts missing for: {}",
            set,
            missing.join(", ")
        )));
    }

    let ids: Vec<&String> = thermal.keys().collect();
    let n_test = cfg.test_recordings.min(ids.len());
    let first_test = ids.len() - n_test;
    let profile = cfg.profile.shapes();
    let mut counts = [SplitCounts::default(); 3];
    let mut manifests = [Manifest::default(), Manifest::default()];
    let dirs = [out.join("train"), out.join("test")];
    for d in &dirs {
        std::fs::create_dir_all(d).map_err(|e| output_error(Error::io(d, e)))?;
    }
    for (k, id) in ids.iter().enumerate() {
        let pick = |map: &BTreeMap<String, usize>, recs: &[Recording]| -> Vec<Recording> {
            map.get(*id)
                .map(|&i| vec![recs[i].clone()])
                .unwrap_or_default()
        };
        let t = pick(&thermal, &raw.thermal);
        let o = pick(&optronic, &raw.optronic);
        let r = pick(&radar, &raw.radar);
        let part = usize::from(k >= first_test);
        for s in ModalitySet::ALL {
            let fused = fuse_dataset(&t, &o, &r, s, &cfg.matching).map_err(core_error)?;
            let c = &mut counts[s.count() - 1];
            if part == 0 {
                c.train += fused.len();
            } else {
                c.test += fused.len();
            }
            if s != set {
                continue;
            }
            if fused.skipped.is_empty() {
                fused.audit(&cfg.matching).map_err(core_error)?;
                let rec = FusedRecording {
                    recording_id: (*id).clone(),
                    modality_set: set,
                    stacked_shape: set.image_shape(&profile).to_vec(),
                    radar_len: set.radar_width(&profile),
                    samples: fused.samples,
                };
                let name = dataset::fused_file_name(id);
                msfr::write_fused(&rec, &dirs[part].join(&name)).map_err(|e| match e.root() {
                    Error::Core(c) => core_error(c.clone()),
                    _ => output_error(e),
                })?;
                manifests[part].push(name, FUSED, rec.samples.len());
            } else {
                warn!("{id}: skipped for the {s}-modality dataset");
            }
        }
    }
    for (m, d) in manifests.iter().zip(&dirs) {
        m.write(d).map_err(output_error)?;
    }
    for s in ModalitySet::ALL {
        let c = counts[s.count() - 1];
        println!(
            "{s}: {} samples (train {}, test {})",
            c.train + c.test,
            c.train,
            c.test
        );
    }
    println!(
        "wrote {}-modality dataset to {} and {}",
        set,
        dirs[0].display(),
        dirs[1].display()
    );
    Ok(())
}

fn read_fused(dir: &Path) -> Result<FusedData, CliError> {
    dataset::read_fused_dataset(dir).map_err(input_error)
}

/// Confirms a model's inputs fit the dataset's tensors.
fn check_compatible(model: &Model<f32>, data: &FusedData, what: &str) -> Result<(), CliError> {
    let spec = &model.spec;
    let incompatible =
        |detail: String| CliError::new(CliError::INCOMPATIBLE, format!("{what}: {detail}"));
    if spec.modality_set != data.dataset.modality_set {
        return Err(incompatible(format!(
            "model takes {}-modality input, dataset is {}-modality",
            spec.modality_set, data.dataset.modality_set
        )));
    }
    if let Some(shape) = &data.stacked_shape {
        if shape.as_slice() != spec.input_shape() || data.radar_len != spec.radar_width() {
            return Err(incompatible(format!(
                "model expects image {:?} and radar {}, dataset holds {:?} and {}",
                spec.input_shape(),
                spec.radar_width(),
                shape,
                data.radar_len
            )));
        }
    }
    Ok(())
}

fn labels_of(samples: &[&FusedSample]) -> Vec<Label> {
    samples.iter().map(|s| s.label).collect()
}

fn to_f64(p: &[f32]) -> Vec<f64> {
    p.iter().map(|&x| x as f64).collect()
}

pub fn cmd_train(cfg: &RunConfig) -> Result<(), CliError> {
    let data = read_fused(data_dir(cfg)?)?;
    let out = out_dir(cfg)?;
    let samples = &data.dataset.samples;
    if samples.is_empty() {
        return Err(CliError::new(
            CliError::PRECONDITION,
            "fused dataset is empty",
        ));
    }
    let spec = cfg.model_spec();
    let set = spec.modality_set;
    check_compatible(
        &Model::zeros(spec).map_err(core_error)?,
        &data,
        "configuration",
    )?;

    let mut f1s = Vec::new();
    for k in 0..cfg.repeats {
        let seed = repeat_seed(cfg.seed, k);
        let tc = uavfusion_core::TrainConfig {
            seed,
            ..cfg.train_config()
        };
        let model = Model::build(spec, &mut Rng::seed_from(init_seed(seed))).map_err(core_error)?;
        info!(
            "seed {seed}: training {} parameters on {} samples",
            model.count_parameters(),
            samples.len()
        );
        let (model, rep) = train::train_with_observer(model, samples, &tc, |e| {
            info!(
                "seed {seed} epoch {}: loss {:.4} acc {:.4} val_loss {:.4} val_acc {:.4}",
                e.epoch, e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy
            )
        })
        .map_err(core_error)?;

        let (_, val_idx) = split_indices(samples.len(), tc.val_fraction, seed);
        let val: Vec<&FusedSample> = val_idx.iter().map(|&i| &samples[i]).collect();
        let (_, val_acc, probs) = train::evaluate(&model, &val).map_err(core_error)?;
        let cm = confusion_at_threshold(&labels_of(&val), &to_f64(&probs), DECISION_THRESHOLD)
            .map_err(core_error)?;
        let f1 = classification_report(&cm).map_err(core_error)?.weighted.f1;
        f1s.push(f1);

        weights::write_model(&model, &out.join(format!("model_seed{seed}.msfw")))
            .map_err(output_error)?;
        let doc = TrainingDocument::new(
            set.name(),
            seed,
            &rep,
            ValidationDoc {
                accuracy: val_acc,
                f1,
            },
        );
        codec::write_file(
            &out.join(format!("train_report_seed{seed}.json")),
            report::to_json(&doc).as_bytes(),
        )
        .map_err(output_error)?;
        println!(
            "seed {seed}: stopped at epoch {} (best {}), validation F1 {:.4}, digest {}",
            rep.stopped_epoch, rep.best_epoch, f1, rep.parameter_digest
        );
    }
    println!(
        "mean validation F1 over {} runs: {:.4}",
        f1s.len(),
        report::mean(&f1s)
    );
    Ok(())
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into())
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.models.is_empty() {
        return Err(CliError::config(
            "no model to evaluate: pass --model or set `models`",
        ));
    }
    let data = read_fused(data_dir(cfg)?)?;
    let refs: Vec<&FusedSample> = data.dataset.samples.iter().collect();
    if refs.is_empty() {
        return Err(CliError::data("evaluation dataset is empty"));
    }
    let models = cfg
        .models
        .iter()
        .map(|p| weights::read_model(p).map_err(input_error))
        .collect::<Result<Vec<_>, _>>()?;
    for (m, p) in models.iter().zip(&cfg.models) {
        check_compatible(m, &data, &p.display().to_string())?;
    }
    let out = out_dir(cfg)?;
    let labels = labels_of(&refs);

    let mut evaluations = Vec::new();
    for (model, path) in models.iter().zip(&cfg.models) {
        let (_, _, probs) = train::evaluate(model, &refs).map_err(core_error)?;
        let scores = to_f64(&probs);
        let cm =
            confusion_at_threshold(&labels, &scores, DECISION_THRESHOLD).map_err(core_error)?;
        let rep = classification_report(&cm).map_err(core_error)?;
        let roc = roc_curve(&labels, &scores).map_err(core_error)?;
        let csv_name = format!("roc_{}.csv", file_stem(path));
        codec::write_file(&out.join(&csv_name), report::roc_csv(&roc).as_bytes())
            .map_err(output_error)?;
        let name = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        println!("{name}\n\n{}\n\n{}\nAUC {:.4}\n", cm, rep, roc.auc);
        evaluations.push(ModelEvaluation::new(
            name,
            model.digest(),
            model.count_parameters(),
            &rep,
            roc.auc,
            csv_name,
        ));
    }
    let dataset = DatasetDoc {
        digest: data.digest.clone(),
        sample_count: refs.len(),
        uav_count: data.dataset.uav_count(),
        files: data
            .file_digests
            .iter()
            .map(|(f, d)| FileDigest {
                file: f.clone(),
                sha256: d.clone(),
            })
            .collect(),
    };
    let doc = EvaluationDocument::new(
        data.dataset.modality_set.name(),
        DECISION_THRESHOLD,
        dataset,
        evaluations,
    );
    codec::write_file(&out.join(EVALUATION_FILE), report::to_json(&doc).as_bytes())
        .map_err(output_error)?;
    println!(
        "mean weighted F1 over {} models: {:.4}",
        doc.per_seed_f1.len(),
        doc.mean_f1
    );
    Ok(())
}
